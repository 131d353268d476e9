#pragma once

#include <random>
#include <string>
#include <vector>

#include "dner/tape.hpp"
#include "dner/tensor.hpp"

namespace dner {

// One direction of one LSTM layer. W packs the four gates as rows
// [i; f; o; g], each block hidden x (input + hidden).
template <typename Real>
struct LstmParamsT {
  TensorT<Real>* W = nullptr;
  TensorT<Real>* b = nullptr;
  int input = 0;
  int hidden = 0;
};

template <typename Real>
LstmParamsT<Real> add_lstm(ParamStoreT<Real>& store, const std::string& prefix, int input,
                           int hidden) {
  LstmParamsT<Real> p;
  p.input = input;
  p.hidden = hidden;
  p.W = &store.add(prefix + ".W", 4 * hidden, input + hidden);
  p.b = &store.add(prefix + ".b", 4 * hidden);
  return p;
}

template <typename Real>
void init_lstm(LstmParamsT<Real>& p, std::mt19937_64& rng, Real scale = Real(0.1)) {
  init_uniform(*p.W, rng, scale);
  std::fill(p.b->value.begin(), p.b->value.end(), Real(0));
  // Forget gate starts open so early gradients reach back through time.
  for (int i = p.hidden; i < 2 * p.hidden; ++i) p.b->value[i] = Real(1);
}

template <typename Real>
struct LstmStateT {
  typename TapeT<Real>::Var h;
  typename TapeT<Real>::Var c;
};

template <typename Real>
LstmStateT<Real> lstm_zero_state(TapeT<Real>& tape, int hidden) {
  return {tape.zeros(hidden), tape.zeros(hidden)};
}

template <typename Real>
LstmStateT<Real> lstm_step(TapeT<Real>& tape, const LstmParamsT<Real>& p,
                           const LstmStateT<Real>& prev, typename TapeT<Real>::Var x) {
  auto xh = tape.concat2(x, prev.h);
  auto z = tape.affine(*p.W, *p.b, xh);
  const int H = p.hidden;
  auto i = tape.sigmoid(tape.slice(z, 0, H));
  auto f = tape.sigmoid(tape.slice(z, H, H));
  auto o = tape.sigmoid(tape.slice(z, 2 * H, H));
  auto g = tape.tanh(tape.slice(z, 3 * H, H));
  auto c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  auto h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

// Runs the cell over xs and returns the hidden state at every step.
template <typename Real>
std::vector<typename TapeT<Real>::Var> lstm_run(TapeT<Real>& tape, const LstmParamsT<Real>& p,
                                                std::span<const typename TapeT<Real>::Var> xs) {
  std::vector<typename TapeT<Real>::Var> hs;
  hs.reserve(xs.size());
  auto st = lstm_zero_state(tape, p.hidden);
  for (auto x : xs) {
    st = lstm_step(tape, p, st, x);
    hs.push_back(st.h);
  }
  return hs;
}

template <typename Real>
struct BiLstmParamsT {
  LstmParamsT<Real> fwd;
  LstmParamsT<Real> bwd;
};

template <typename Real>
BiLstmParamsT<Real> add_bilstm(ParamStoreT<Real>& store, const std::string& prefix, int input,
                               int hidden) {
  return {add_lstm(store, prefix + ".fwd", input, hidden),
          add_lstm(store, prefix + ".bwd", input, hidden)};
}

template <typename Real>
void init_bilstm(BiLstmParamsT<Real>& p, std::mt19937_64& rng, Real scale = Real(0.1)) {
  init_lstm(p.fwd, rng, scale);
  init_lstm(p.bwd, rng, scale);
}

// Per-position representation: forward and backward hidden states
// concatenated at each step. Output size 2*hidden per position.
template <typename Real>
std::vector<typename TapeT<Real>::Var> encode_words(
    TapeT<Real>& tape, const BiLstmParamsT<Real>& p,
    std::span<const typename TapeT<Real>::Var> xs) {
  auto fwd = lstm_run(tape, p.fwd, xs);
  std::vector<typename TapeT<Real>::Var> rev(xs.rbegin(), xs.rend());
  auto bwd = lstm_run(tape, p.bwd, rev);
  std::vector<typename TapeT<Real>::Var> out;
  out.reserve(xs.size());
  for (size_t t = 0; t < xs.size(); ++t)
    out.push_back(tape.concat2(fwd[t], bwd[xs.size() - 1 - t]));
  return out;
}

// Sequence summary: final forward state over xs[lo..hi] concatenated with
// the final backward state. Output size 2*hidden.
template <typename Real>
typename TapeT<Real>::Var encode_sequence(TapeT<Real>& tape, const BiLstmParamsT<Real>& p,
                                          std::span<const typename TapeT<Real>::Var> xs) {
  auto fst = lstm_zero_state(tape, p.fwd.hidden);
  for (auto x : xs) fst = lstm_step(tape, p.fwd, fst, x);
  auto bst = lstm_zero_state(tape, p.bwd.hidden);
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) bst = lstm_step(tape, p.bwd, bst, *it);
  return tape.concat2(fst.h, bst.h);
}

// Span summaries h[i:j] for every j-i+1 <= max_len, computed with shared
// prefixes: one forward chain per start and one backward chain per end,
// so the whole table costs O(n * max_len) cell steps instead of
// O(n * max_len^2). Entry (i, j) equals encode_sequence over xs[i..j].
template <typename Real>
class SpanTableT {
 public:
  SpanTableT(TapeT<Real>& tape, const BiLstmParamsT<Real>& p,
             std::span<const typename TapeT<Real>::Var> xs, int max_len)
      : n_(static_cast<int>(xs.size())), max_len_(max_len), fwd_(n_ * max_len), bwd_(n_ * max_len) {
    for (int i = 0; i < n_; ++i) {
      auto st = lstm_zero_state(tape, p.fwd.hidden);
      for (int j = i; j < n_ && j - i < max_len_; ++j) {
        st = lstm_step(tape, p.fwd, st, xs[j]);
        fwd_[i * max_len_ + (j - i)] = st.h;
      }
    }
    for (int j = 0; j < n_; ++j) {
      auto st = lstm_zero_state(tape, p.bwd.hidden);
      for (int i = j; i >= 0 && j - i < max_len_; --i) {
        st = lstm_step(tape, p.bwd, st, xs[i]);
        bwd_[j * max_len_ + (j - i)] = st.h;
      }
    }
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_ && j - i < max_len_; ++j)
        cat_.push_back(tape.concat2(fwd_[i * max_len_ + (j - i)], bwd_[j * max_len_ + (j - i)]));
    int pos = 0;
    index_.assign(n_ * max_len_, -1);
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_ && j - i < max_len_; ++j) index_[i * max_len_ + (j - i)] = pos++;
  }

  typename TapeT<Real>::Var at(int i, int j) const {
    if (i < 0 || j < i || j >= n_ || j - i >= max_len_)
      throw std::out_of_range("span table: bad span");
    return cat_[index_[i * max_len_ + (j - i)]];
  }

 private:
  int n_;
  int max_len_;
  std::vector<typename TapeT<Real>::Var> fwd_;
  std::vector<typename TapeT<Real>::Var> bwd_;
  std::vector<typename TapeT<Real>::Var> cat_;
  std::vector<int> index_;
};

// Inverted dropout: at train time keeps each unit with probability
// 1 - drop and rescales by 1/(1 - drop); identity at eval time.
template <typename Real>
typename TapeT<Real>::Var dropout(TapeT<Real>& tape, typename TapeT<Real>::Var x, Real drop,
                                  std::mt19937_64& rng, bool training) {
  if (!training || drop <= Real(0)) return x;
  if (drop >= Real(1)) throw std::logic_error("dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(drop));
  std::vector<Real> mask(x.size);
  Real scale = Real(1) / (Real(1) - drop);
  for (auto& m : mask) m = keep(rng) ? scale : Real(0);
  return tape.mul_const(x, std::move(mask));
}

}  // namespace dner
