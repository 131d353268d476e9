#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dner/tags.hpp"
#include "dner/tape.hpp"
#include "dner/tensor.hpp"

namespace dner {

// Linear chain over masked tags. emit is n x T row-major, trans T x T,
// start has T entries. Masked-out moves contribute -inf.

template <typename Real>
Real crf_logZ(std::span<const Real> emit, int n, std::span<const Real> trans,
              std::span<const Real> start, const TagMask& mask) {
  const int T = mask.num;
  if (n < 1 || emit.size() != static_cast<size_t>(n) * T || trans.size() != static_cast<size_t>(T) * T ||
      start.size() != static_cast<size_t>(T))
    throw std::invalid_argument("crf_logZ: dimension mismatch");
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  std::vector<Real> alpha(T), next(T);
  for (int y = 0; y < T; ++y)
    alpha[y] = mask.start_ok[y] ? start[y] + emit[y] : kNegInf;
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < T; ++j) {
      Real mx = kNegInf;
      for (int i = 0; i < T; ++i)
        if (mask.allowed(i, j)) mx = std::max(mx, alpha[i] + trans[i * T + j]);
      if (std::isinf(mx)) {
        next[j] = kNegInf;
        continue;
      }
      Real acc = 0;
      for (int i = 0; i < T; ++i)
        if (mask.allowed(i, j)) acc += std::exp(alpha[i] + trans[i * T + j] - mx);
      next[j] = mx + std::log(acc) + emit[t * T + j];
    }
    alpha.swap(next);
  }
  Real mx = kNegInf;
  for (int y = 0; y < T; ++y) mx = std::max(mx, alpha[y]);
  if (std::isinf(mx)) return kNegInf;
  Real acc = 0;
  for (int y = 0; y < T; ++y) acc += std::exp(alpha[y] - mx);
  return mx + std::log(acc);
}

template <typename Real>
Real crf_path_score(const std::vector<int>& tags, std::span<const Real> emit, int n,
                    std::span<const Real> trans, std::span<const Real> start,
                    const TagMask& mask) {
  const int T = mask.num;
  if (static_cast<int>(tags.size()) != n) throw std::invalid_argument("crf_path_score: length");
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  if (n == 0) return 0;
  if (!mask.start_ok[tags[0]]) return kNegInf;
  Real s = start[tags[0]] + emit[tags[0]];
  for (int t = 1; t < n; ++t) {
    if (!mask.allowed(tags[t - 1], tags[t])) return kNegInf;
    s += trans[tags[t - 1] * T + tags[t]] + emit[t * T + tags[t]];
  }
  return s;
}

// Best tag sequence. On ties the latest position takes the lowest tag
// index first, which the backtrace realizes by picking the smallest
// argmax at every step.
template <typename Real>
std::vector<int> crf_viterbi(std::span<const Real> emit, int n, std::span<const Real> trans,
                             std::span<const Real> start, const TagMask& mask) {
  const int T = mask.num;
  if (n < 1) return {};
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  std::vector<Real> alpha(T), next(T);
  std::vector<int> bp(static_cast<size_t>(n) * T, -1);
  for (int y = 0; y < T; ++y)
    alpha[y] = mask.start_ok[y] ? start[y] + emit[y] : kNegInf;
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < T; ++j) {
      Real best = kNegInf;
      int arg = -1;
      for (int i = 0; i < T; ++i) {
        if (!mask.allowed(i, j) || std::isinf(alpha[i])) continue;
        Real s = alpha[i] + trans[i * T + j];
        if (arg < 0 || s > best) {
          best = s;
          arg = i;
        }
      }
      next[j] = arg < 0 ? kNegInf : best + emit[t * T + j];
      bp[t * T + j] = arg;
    }
    alpha.swap(next);
  }
  int yend = -1;
  Real best = kNegInf;
  for (int y = 0; y < T; ++y) {
    if (std::isinf(alpha[y])) continue;
    if (yend < 0 || alpha[y] > best) {
      best = alpha[y];
      yend = y;
    }
  }
  if (yend < 0) throw std::logic_error("viterbi: no valid sequence");
  std::vector<int> tags(n);
  tags[n - 1] = yend;
  for (int t = n - 1; t > 0; --t) tags[t - 1] = bp[t * T + tags[t]];
  return tags;
}

namespace detail {
template <typename Real>
std::vector<Real> trans_mask_values(const TagMask& mask) {
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  std::vector<Real> mv(mask.trans_ok.size());
  for (size_t p = 0; p < mv.size(); ++p) mv[p] = mask.trans_ok[p] ? Real(0) : kNegInf;
  return mv;
}
}  // namespace detail

// Differentiable log partition; emits holds one T-sized var per position.
template <typename Real>
typename TapeT<Real>::Var crf_logZ_tape(TapeT<Real>& tape,
                                        std::span<const typename TapeT<Real>::Var> emits,
                                        TensorT<Real>& trans, TensorT<Real>& start,
                                        const TagMask& mask) {
  using Var = typename TapeT<Real>::Var;
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  if (emits.empty()) throw std::invalid_argument("crf_logZ_tape: empty sentence");
  std::vector<Real> start_mask(mask.num);
  for (int y = 0; y < mask.num; ++y) start_mask[y] = mask.start_ok[y] ? Real(0) : kNegInf;
  auto tmask = detail::trans_mask_values<Real>(mask);
  Var alpha = tape.add_const(tape.add(tape.param(start), emits[0]), start_mask);
  for (size_t t = 1; t < emits.size(); ++t)
    alpha = tape.add(tape.crf_step(alpha, trans, tmask), emits[t]);
  return tape.logsumexp_vec(alpha);
}

template <typename Real>
typename TapeT<Real>::Var crf_path_score_tape(TapeT<Real>& tape,
                                              std::span<const typename TapeT<Real>::Var> emits,
                                              TensorT<Real>& trans, TensorT<Real>& start,
                                              const std::vector<int>& tags, const TagMask& mask) {
  using Var = typename TapeT<Real>::Var;
  if (tags.size() != emits.size()) throw std::invalid_argument("crf score: length mismatch");
  if (!tags_valid(tags, mask)) throw std::invalid_argument("crf score: sequence breaks the mask");
  std::vector<Var> terms;
  terms.push_back(tape.param_entry(start, tags[0], 0));
  terms.push_back(tape.pick(emits[0], tags[0]));
  for (size_t t = 1; t < tags.size(); ++t) {
    terms.push_back(tape.param_entry(trans, tags[t - 1], tags[t]));
    terms.push_back(tape.pick(emits[t], tags[t]));
  }
  return tape.sum(terms);
}

template <typename Real>
typename TapeT<Real>::Var crf_nll_tape(TapeT<Real>& tape,
                                       std::span<const typename TapeT<Real>::Var> emits,
                                       TensorT<Real>& trans, TensorT<Real>& start,
                                       const std::vector<int>& tags, const TagMask& mask) {
  auto logz = crf_logZ_tape(tape, emits, trans, start, mask);
  auto gold = crf_path_score_tape(tape, emits, trans, start, tags, mask);
  return tape.sub(logz, gold);
}

}  // namespace dner
