#include <dner/nn.hpp>
#include <dner/optim.hpp>
#include <dner/tape.hpp>
#include <dner/tensor.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"

using namespace dner;

using Tape = TapeT<double>;
using Var = Tape::Var;

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(Scalars, StableSigmoidAndSoftplus) {
  EXPECT_DOUBLE_EQ(stable_sigmoid(0.0), 0.5);
  EXPECT_NEAR(stable_sigmoid(1e3), 1.0, 1e-12);
  EXPECT_NEAR(stable_sigmoid(-1e3), 0.0, 1e-12);
  EXPECT_FALSE(std::isnan(stable_sigmoid(-745.0)));
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(50.0), 50.0, 1e-12);
  EXPECT_NEAR(softplus(-50.0), std::exp(-50.0), 1e-14);
}

TEST(Tape, ForwardValues) {
  Tape tape;
  auto x = tape.input({1.0, -2.0, 3.0});
  auto r = tape.relu(x);
  EXPECT_EQ(tape.value(r)[0], 1.0);
  EXPECT_EQ(tape.value(r)[1], 0.0);
  EXPECT_EQ(tape.value(r)[2], 3.0);

  auto c = tape.concat2(tape.pick(x, 2), tape.pick(x, 0));
  EXPECT_EQ(tape.value(c)[0], 3.0);
  EXPECT_EQ(tape.value(c)[1], 1.0);

  auto s = tape.slice(x, 1, 2);
  EXPECT_EQ(tape.value(s)[0], -2.0);

  auto k = tape.mul_const(x, {2.0, 0.0, -1.0});
  EXPECT_EQ(tape.value(k)[2], -3.0);

  auto a = tape.add_const(x, {0.0, -kInf, 1.0});
  EXPECT_EQ(tape.value(a)[1], -kInf);

  auto lv = tape.logsumexp_vec(tape.input({0.0, std::log(2.0), -kInf}));
  EXPECT_NEAR(tape.scalar(lv), std::log(3.0), 1e-12);

  std::vector<Var> parts = {tape.input({1.0}), tape.input({1.0}), tape.input({-kInf})};
  EXPECT_NEAR(tape.scalar(tape.logsumexp(parts)), 1.0 + std::log(2.0), 1e-12);
  EXPECT_EQ(tape.scalar(tape.sum(parts)), -kInf);

  std::vector<Var> none;
  EXPECT_EQ(tape.scalar(tape.sum(none)), 0.0);
  EXPECT_EQ(tape.scalar(tape.logsumexp(none)), -kInf);

  auto bce = tape.bce_with_logit(tape.input({0.0}), 1.0);
  EXPECT_NEAR(tape.scalar(bce), std::log(2.0), 1e-12);
}

TEST(Tape, LogsumexpOfAllNegInfBacksPropagatesZero) {
  ParamStoreT<double> store;
  auto& p = store.add("p", 2);
  p.value = {0.5, -0.5};
  Tape tape;
  auto v = tape.param(p);
  auto blocked = tape.add_const(v, {-kInf, -kInf});
  auto lse = tape.logsumexp_vec(blocked);
  EXPECT_EQ(tape.scalar(lse), -kInf);
  auto loss = tape.add(lse, tape.input({1.0}));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(p.grad[0], 0.0);
  EXPECT_DOUBLE_EQ(p.grad[1], 0.0);
  EXPECT_FALSE(std::isnan(p.grad[0]));
}

TEST(Tape, AffineShapeChecks) {
  ParamStoreT<double> store;
  auto& W = store.add("W", 2, 3);
  auto& b = store.add("b", 2);
  Tape tape;
  auto x3 = tape.input({1.0, 2.0, 3.0});
  EXPECT_NO_THROW(tape.affine(W, b, x3));
  auto x2 = tape.input({1.0, 2.0});
  EXPECT_THROW(tape.affine(W, b, x2), std::logic_error);
}

TEST(Tape, CrfStepMatchesManualRecurrence) {
  ParamStoreT<double> store;
  auto& trans = store.add("trans", 3, 3);
  for (int i = 0; i < 9; ++i) trans.value[i] = 0.1 * i - 0.4;
  std::vector<double> mask(9, 0.0);
  mask[1 * 3 + 2] = -kInf;
  Tape tape;
  auto prev = tape.input({0.2, -0.1, 0.3});
  auto out = tape.crf_step(prev, trans, mask);
  for (int j = 0; j < 3; ++j) {
    double mx = -kInf;
    for (int i = 0; i < 3; ++i) mx = std::max(mx, 0.2 - 0.3 * (i == 1) + 0.1 * (i == 2));
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
      double prev_i = (i == 0 ? 0.2 : i == 1 ? -0.1 : 0.3);
      double term = prev_i + trans.value[i * 3 + j] + mask[i * 3 + j];
      acc += std::exp(term);
    }
    EXPECT_NEAR(tape.scalar(tape.pick(out, j)), std::log(acc), 1e-12) << "state " << j;
  }
}

// One composite loss touching nearly every op, compared against central
// finite differences over every parameter scalar.
TEST(Tape, GradientsMatchFiniteDifferences) {
  ParamStoreT<double> store;
  auto& W = store.add("W", 3, 4);
  auto& b = store.add("b", 3);
  auto& emb = store.add("emb", 4, 2);
  auto& p = store.add("p", 2);
  std::mt19937_64 rng(7);
  for (auto* t : {&W, &b, &emb, &p}) init_uniform(*t, rng, 0.7);

  auto loss_value = [&]() {
    Tape tape;
    auto e1 = tape.lookup(emb, 1);
    auto e3 = tape.lookup(emb, 3);
    auto x = tape.concat2(e1, tape.add(e3, tape.param(p)));
    auto y = tape.affine(W, b, x);
    auto t = tape.tanh(y);
    auto s = tape.sigmoid(tape.mul_const(y, {0.5, -1.0, 2.0}));
    auto m = tape.mul(t, s);
    auto rl = tape.relu(tape.sub(m, tape.add_const(t, {0.1, 0.1, 0.1})));
    std::vector<Var> scalars = {tape.pick(rl, 0), tape.pick(m, 1), tape.param_entry(W, 0, 0)};
    auto lse = tape.logsumexp(scalars);
    auto lv = tape.logsumexp_vec(m);
    auto bce = tape.bce_with_logit(tape.pick(y, 2), 1.0);
    std::vector<Var> parts = {lse, lv, bce};
    return tape.scalar(tape.sum(parts));
  };

  Tape tape;
  auto e1 = tape.lookup(emb, 1);
  auto e3 = tape.lookup(emb, 3);
  auto x = tape.concat2(e1, tape.add(e3, tape.param(p)));
  auto y = tape.affine(W, b, x);
  auto t = tape.tanh(y);
  auto s = tape.sigmoid(tape.mul_const(y, {0.5, -1.0, 2.0}));
  auto m = tape.mul(t, s);
  auto rl = tape.relu(tape.sub(m, tape.add_const(t, {0.1, 0.1, 0.1})));
  std::vector<Var> scalars = {tape.pick(rl, 0), tape.pick(m, 1), tape.param_entry(W, 0, 0)};
  auto lse = tape.logsumexp(scalars);
  auto lv = tape.logsumexp_vec(m);
  auto bce = tape.bce_with_logit(tape.pick(y, 2), 1.0);
  std::vector<Var> parts = {lse, lv, bce};
  auto loss = tape.sum(parts);
  EXPECT_NEAR(tape.scalar(loss), loss_value(), 1e-12);

  store.zero_grad();
  tape.backward(loss);
  auto analytic = oracles::snapshot_grads(store);
  auto res = oracles::finite_difference_check(store, analytic, loss_value);
  EXPECT_LT(res.max_rel, 1e-6) << "worst at " << res.worst;
}

TEST(Tape, CrfStepGradientsMatchFiniteDifferences) {
  ParamStoreT<double> store;
  auto& trans = store.add("trans", 4, 4);
  auto& start = store.add("start", 4);
  auto& e0 = store.add("e0", 4);
  auto& e1 = store.add("e1", 4);
  auto& e2 = store.add("e2", 4);
  std::mt19937_64 rng(11);
  for (size_t i = 0; i < store.count(); ++i) init_uniform(store[i], rng, 0.9);

  std::vector<double> mask(16, 0.0);
  mask[0 * 4 + 3] = -kInf;
  mask[2 * 4 + 1] = -kInf;

  auto build = [&](Tape& tape) {
    auto alpha = tape.add(tape.param(start), tape.param(e0));
    alpha = tape.add(tape.crf_step(alpha, trans, mask), tape.param(e1));
    alpha = tape.add(tape.crf_step(alpha, trans, mask), tape.param(e2));
    return tape.logsumexp_vec(alpha);
  };
  auto loss_value = [&]() {
    Tape tape;
    return tape.scalar(build(tape));
  };

  Tape tape;
  auto loss = build(tape);
  store.zero_grad();
  tape.backward(loss);
  auto analytic = oracles::snapshot_grads(store);
  auto res = oracles::finite_difference_check(store, analytic, loss_value);
  EXPECT_LT(res.max_rel, 1e-6) << "worst at " << res.worst;
}

TEST(Lstm, InitSetsForgetBiasToOne) {
  ParamStoreT<double> store;
  auto p = add_lstm(store, "l", 3, 4);
  std::mt19937_64 rng(1);
  init_lstm(p, rng);
  for (int r = 0; r < 16; ++r) {
    double v = p.b->value[r];
    if (r >= 4 && r < 8) EXPECT_DOUBLE_EQ(v, 1.0) << "forget row " << r;
    else EXPECT_LE(std::abs(v), 0.1) << "row " << r;
  }
  for (double v : p.W->value) EXPECT_LE(std::abs(v), 0.1);
}

TEST(Lstm, StepMatchesHandComputation) {
  ParamStoreT<double> store;
  auto p = add_lstm(store, "l", 1, 1);
  // rows: input, forget, output, candidate; columns: x then h
  p.W->value = {0.5, 0.25, -0.3, 0.1, 0.2, -0.2, 0.7, 0.4};
  p.b->value = {0.1, -0.1, 0.05, 0.0};

  Tape tape;
  auto st = lstm_zero_state(tape, 1);
  auto x = tape.input({0.3});
  st = lstm_step(tape, p, st, x);

  double i = stable_sigmoid(0.5 * 0.3 + 0.1);
  double f = stable_sigmoid(-0.3 * 0.3 - 0.1);
  double o = stable_sigmoid(0.2 * 0.3 + 0.05);
  double g = std::tanh(0.7 * 0.3);
  double c1 = i * g;
  double h1 = o * std::tanh(c1);
  EXPECT_NEAR(tape.scalar(st.c), c1, 1e-15);
  EXPECT_NEAR(tape.scalar(st.h), h1, 1e-15);

  auto st2 = lstm_step(tape, p, st, tape.input({-0.6}));
  double i2 = stable_sigmoid(0.5 * -0.6 + 0.25 * h1 + 0.1);
  double f2 = stable_sigmoid(-0.3 * -0.6 + 0.1 * h1 - 0.1);
  double o2 = stable_sigmoid(0.2 * -0.6 - 0.2 * h1 + 0.05);
  double g2 = std::tanh(0.7 * -0.6 + 0.4 * h1);
  double c2 = f2 * c1 + i2 * g2;
  EXPECT_NEAR(tape.scalar(st2.c), c2, 1e-15);
  EXPECT_NEAR(tape.scalar(st2.h), o2 * std::tanh(c2), 1e-15);
}

TEST(Lstm, BiLstmGradientsMatchFiniteDifferences) {
  ParamStoreT<double> store;
  auto p = add_bilstm(store, "bi", 2, 3);
  std::mt19937_64 rng(3);
  init_bilstm(p, rng);
  std::vector<std::vector<double>> xs = {{0.4, -0.2}, {0.1, 0.9}, {-0.7, 0.3}};

  auto build = [&](Tape& tape) {
    std::vector<Var> in;
    for (const auto& x : xs) in.push_back(tape.input(x));
    auto hs = encode_words(tape, p, in);
    std::vector<Var> picks;
    for (size_t t = 0; t < hs.size(); ++t)
      for (int d = 0; d < 6; ++d) picks.push_back(tape.pick(hs[t], d));
    auto lse = tape.logsumexp(picks);
    auto seq = encode_sequence(tape, p, in);
    return tape.add(lse, tape.logsumexp_vec(seq));
  };
  auto loss_value = [&]() {
    Tape tape;
    return tape.scalar(build(tape));
  };

  Tape tape;
  auto loss = build(tape);
  store.zero_grad();
  tape.backward(loss);
  auto analytic = oracles::snapshot_grads(store);
  auto res = oracles::finite_difference_check(store, analytic, loss_value);
  EXPECT_LT(res.max_rel, 1e-5) << "worst at " << res.worst;
}

TEST(Lstm, SpanTableMatchesFreshEncodings) {
  ParamStoreT<double> store;
  auto p = add_bilstm(store, "bi", 2, 3);
  std::mt19937_64 rng(5);
  init_bilstm(p, rng);

  int n = 5, max_len = 3;
  std::vector<std::vector<double>> raw(n);
  std::uniform_real_distribution<double> dist(-1, 1);
  for (auto& x : raw) x = {dist(rng), dist(rng)};

  Tape tape;
  std::vector<Var> xs;
  for (const auto& x : raw) xs.push_back(tape.input(x));
  SpanTableT<double> table(tape, p, xs, max_len);

  for (int i = 0; i < n; ++i)
    for (int j = i; j < n && j - i < max_len; ++j) {
      std::vector<Var> slice(xs.begin() + i, xs.begin() + j + 1);
      auto fresh = encode_sequence(tape, p, slice);
      auto got = table.at(i, j);
      ASSERT_EQ(got.size, fresh.size);
      for (int d = 0; d < got.size; ++d)
        EXPECT_NEAR(tape.value(got)[d], tape.value(fresh)[d], 1e-13)
            << "span [" << i << "," << j << "] dim " << d;
    }
  EXPECT_THROW(table.at(0, max_len), std::out_of_range);
  EXPECT_THROW(table.at(2, 1), std::out_of_range);
  EXPECT_THROW(table.at(0, n), std::out_of_range);
}

TEST(Dropout, EvalAndZeroRateAreIdentity) {
  Tape tape;
  std::mt19937_64 rng(1);
  auto x = tape.input({1.0, 2.0, 3.0});
  auto e = dropout(tape, x, 0.5, rng, false);
  for (int d = 0; d < 3; ++d) EXPECT_EQ(tape.value(e)[d], tape.value(x)[d]);
  auto z = dropout(tape, x, 0.0, rng, true);
  for (int d = 0; d < 3; ++d) EXPECT_EQ(tape.value(z)[d], tape.value(x)[d]);
}

TEST(Dropout, RescalesKeptUnits) {
  Tape tape;
  std::mt19937_64 rng(42);
  int n = 20000;
  double drop = 0.3;
  auto x = tape.input(std::vector<double>(n, 1.0));
  auto d = dropout(tape, x, drop, rng, true);
  auto vals = tape.value(d);
  double sum = 0.0;
  int zeros = 0;
  for (int i = 0; i < n; ++i) {
    if (vals[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_NEAR(vals[i], 1.0 / (1.0 - drop), 1e-12);
      sum += vals[i];
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / n, drop, 0.02);
  EXPECT_NEAR(sum / n, 1.0, 0.03);
}

TEST(Adam, ConvergesOnQuadratic) {
  ParamStoreT<double> store;
  auto& th = store.add("theta", 1);
  th.value[0] = 0.0;
  AdamT<double> opt(store, 0.1);
  for (int i = 0; i < 500; ++i) {
    store.zero_grad();
    th.grad[0] = 2.0 * (th.value[0] - 3.0);
    opt.step();
  }
  EXPECT_NEAR(th.value[0], 3.0, 1e-6);
  EXPECT_EQ(opt.steps(), 500);
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
  ParamStoreT<double> store;
  auto& th = store.add("theta", 1);
  th.value[0] = 1.0;
  AdamT<double> opt(store, 0.05);
  th.grad[0] = 1e-3;
  opt.step();
  EXPECT_NEAR(1.0 - th.value[0], 0.05, 0.05 * 1e-4);
}

TEST(Adam, CoupledWeightDecayPullsTowardZero) {
  ParamStoreT<double> store;
  auto& th = store.add("theta", 1);
  th.value[0] = 5.0;
  AdamT<double> opt(store, 0.01, 0.1);
  for (int i = 0; i < 2000; ++i) {
    store.zero_grad();
    opt.step();
  }
  EXPECT_LT(std::abs(th.value[0]), 0.05);
}

TEST(Tape, ResetAllowsReuse) {
  Tape tape;
  auto a = tape.input({1.0});
  EXPECT_EQ(tape.scalar(a), 1.0);
  size_t count = tape.node_count();
  tape.reset();
  EXPECT_EQ(tape.node_count(), 0u);
  auto b = tape.input({2.0});
  EXPECT_EQ(tape.scalar(b), 2.0);
  (void)count;
}
