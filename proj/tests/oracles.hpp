#pragma once

// Brute-force reference implementations the tests compare against. Everything
// here recomputes results from first principles: no inside passes, no Viterbi,
// no shared code with the library beyond data types and score lookups.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <dner/corpus.hpp>
#include <dner/hypergraph.hpp>
#include <dner/tags.hpp>
#include <dner/tensor.hpp>

namespace oracles {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Score lookup keyed the same way edge score slots are keyed.
struct KeyedScores {
  std::map<std::tuple<int, int, int, int>, double> table;

  double operator()(dner::EdgeFamily f, int type, int i, int j) const {
    return table.at(std::make_tuple(static_cast<int>(f), type, i, j));
  }
};

// One random score per slot, expanded to one score per edge for the graph side.
inline KeyedScores random_key_scores(const dner::SegmentalHypergraph& g, std::mt19937_64& rng,
                                     double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  KeyedScores ks;
  for (const auto& k : g.keys())
    ks.table[std::make_tuple(static_cast<int>(k.family), k.type, k.i, k.j)] = dist(rng);
  return ks;
}

inline std::vector<double> expand_to_edges(const dner::SegmentalHypergraph& g,
                                           const KeyedScores& ks) {
  std::vector<double> out;
  out.reserve(g.edges().size());
  for (const auto& e : g.edges()) out.push_back(ks(e.family, e.type, e.i, e.j));
  return out;
}

struct SegmentBrute {
  double log_z = 0.0;
  double best = 0.0;
  std::vector<dner::TypedSegment> best_set;
  double set_count = 0.0;
};

// Direct evaluation of the segment model. A set of typed segments scores as a
// sum of independent per-position terms, so the partition function and the
// maximizer factor over positions: enumerate every end-subset combination a
// position can host and fold. Ties are broken toward the first combination in
// enumeration order; callers that care about ties must not rely on best_set.
template <typename Score>
SegmentBrute brute_force_segment_model(int n, int c, int m, Score&& score) {
  using dner::EdgeFamily;
  struct PosChoice {
    double sc = 0.0;
    std::vector<dner::TypedSegment> segs;
  };
  SegmentBrute out;
  out.set_count = 1.0;
  for (int i = 0; i < n; ++i) {
    int w = std::min(c, n - i);
    std::vector<PosChoice> acc{PosChoice{}};
    for (int k = 0; k < m; ++k) {
      std::vector<PosChoice> next;
      next.reserve(acc.size() << w);
      for (std::uint32_t mask = 0; mask < (1u << w); ++mask) {
        double sc = 0.0;
        std::vector<dner::TypedSegment> segs;
        if (mask != 0) {
          sc += score(EdgeFamily::TStart, k, i, -1);
          int jmax = i;
          for (int d = 0; d < w; ++d)
            if (mask >> d & 1u) jmax = i + d;
          for (int j = i; j <= jmax; ++j) {
            bool end_here = (mask >> (j - i)) & 1u;
            if (end_here && j == jmax) sc += score(EdgeFamily::IEnd, k, i, j);
            else if (end_here) sc += score(EdgeFamily::IEndCont, k, i, j);
            else sc += score(EdgeFamily::ICont, k, i, j);
          }
          for (int d = 0; d < w; ++d)
            if (mask >> d & 1u) segs.push_back(dner::TypedSegment{k, dner::Span{i, i + d}});
        }
        for (const auto& a : acc) {
          PosChoice pc;
          pc.sc = a.sc + sc;
          pc.segs = a.segs;
          pc.segs.insert(pc.segs.end(), segs.begin(), segs.end());
          next.push_back(std::move(pc));
        }
      }
      acc = std::move(next);
    }
    for (auto& pc : acc) {
      if (pc.segs.empty()) {
        pc.sc += score(EdgeFamily::ASkip, -1, i, -1);
      } else {
        pc.sc += score(EdgeFamily::AStart, -1, i, -1);
        std::vector<char> taken(m, 0);
        for (const auto& s : pc.segs) taken[s.type] = 1;
        for (int t = 0; t < m; ++t)
          pc.sc += taken[t] ? score(EdgeFamily::ETake, t, i, -1)
                            : score(EdgeFamily::ESkip, t, i, -1);
      }
    }
    double mx = kNegInf;
    const PosChoice* arg = nullptr;
    for (const auto& pc : acc)
      if (pc.sc > mx) {
        mx = pc.sc;
        arg = &pc;
      }
    double sum = 0.0;
    for (const auto& pc : acc) sum += std::exp(pc.sc - mx);
    out.log_z += mx + std::log(sum);
    out.best += mx;
    out.best_set.insert(out.best_set.end(), arg->segs.begin(), arg->segs.end());
    out.set_count *= static_cast<double>(acc.size());
  }
  std::sort(out.best_set.begin(), out.best_set.end());
  return out;
}

// Every source-to-sink hyperpath as a sorted list of edge ids. Tails never
// share edges (only the sink is reachable twice), so merging stays duplicate
// free. Only meant for small graphs.
inline std::vector<std::vector<int>> all_hyperpaths(const dner::SegmentalHypergraph& g) {
  const auto& nodes = g.nodes();
  std::vector<std::vector<std::vector<int>>> memo(nodes.size());
  for (int id : g.topo()) {
    const auto& nd = nodes[id];
    if (nd.kind == dner::NodeKind::X) {
      memo[id] = {{}};
      continue;
    }
    std::vector<std::vector<int>> acc;
    for (int eid : nd.out) {
      const auto& e = g.edges()[eid];
      if (e.arity == 1) {
        for (const auto& sub : memo[e.tails[0]]) {
          auto v = sub;
          v.insert(std::lower_bound(v.begin(), v.end(), eid), eid);
          acc.push_back(std::move(v));
        }
      } else {
        for (const auto& l : memo[e.tails[0]])
          for (const auto& r : memo[e.tails[1]]) {
            std::vector<int> v;
            v.reserve(l.size() + r.size() + 1);
            std::merge(l.begin(), l.end(), r.begin(), r.end(), std::back_inserter(v));
            v.insert(std::lower_bound(v.begin(), v.end(), eid), eid);
            acc.push_back(std::move(v));
          }
      }
    }
    memo[id] = std::move(acc);
  }
  return memo[g.root()];
}

struct CrfBrute {
  double log_z = kNegInf;
  double best = kNegInf;
  std::vector<int> best_tags;
};

// Enumerates all T^n tag sequences. Ties on the maximum prefer the sequence
// whose reversed tag list is lexicographically smaller, matching a backward
// pass that keeps the smallest backpointer and smallest final state.
inline CrfBrute brute_force_crf(std::span<const double> emit, int n,
                                std::span<const double> trans, std::span<const double> start,
                                const dner::TagMask& mask) {
  int T = mask.num;
  CrfBrute out;
  std::vector<int> tags(n, 0);
  double mx = kNegInf, sum = 0.0;
  auto reverse_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
    for (int i = n - 1; i >= 0; --i)
      if (a[i] != b[i]) return a[i] < b[i];
    return false;
  };
  std::function<void(int, double)> rec = [&](int t, double sc) {
    if (t == n) {
      if (sum == 0.0 || sc > mx) {
        sum = (sum == 0.0) ? 1.0 : sum * std::exp(mx - sc) + 1.0;
        mx = sc;
        out.best_tags = tags;
        out.best = sc;
      } else {
        sum += std::exp(sc - mx);
        if (sc == out.best && reverse_less(tags, out.best_tags)) out.best_tags = tags;
      }
      return;
    }
    for (int y = 0; y < T; ++y) {
      if (t == 0 && !mask.start_ok[y]) continue;
      if (t > 0 && !mask.allowed(tags[t - 1], y)) continue;
      tags[t] = y;
      double step = emit[t * T + y] + (t == 0 ? start[y] : trans[tags[t - 1] * T + y]);
      rec(t + 1, sc + step);
    }
  };
  rec(0, 0.0);
  if (sum > 0.0) out.log_z = mx + std::log(sum);
  return out;
}

// Log-probability of one selection under independent per-candidate sigmoids,
// written out naively.
inline double naive_selection_logprob(std::span<const double> logits,
                                      const std::vector<char>& selected) {
  double lp = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    double p = 1.0 / (1.0 + std::exp(-logits[i]));
    lp += selected[i] ? std::log(p) : std::log(1.0 - p);
  }
  return lp;
}

struct SelectionBrute {
  double lse_all = kNegInf;
  std::vector<char> best;
  double best_lp = kNegInf;
};

inline SelectionBrute brute_force_selection(std::span<const double> logits) {
  size_t mc = logits.size();
  SelectionBrute out;
  double mx = kNegInf, sum = 0.0;
  for (std::uint64_t bits = 0; bits < (1ull << mc); ++bits) {
    std::vector<char> sel(mc, 0);
    for (size_t i = 0; i < mc; ++i) sel[i] = (bits >> i) & 1ull;
    double lp = naive_selection_logprob(logits, sel);
    if (sum == 0.0 || lp > mx) {
      sum = (sum == 0.0) ? 1.0 : sum * std::exp(mx - lp) + 1.0;
      mx = lp;
      out.best = sel;
      out.best_lp = lp;
    } else {
      sum += std::exp(lp - mx);
    }
  }
  out.lse_all = mx + std::log(sum);
  return out;
}

// Uniform random walk through the transition mask. Restarts if a dead end is
// hit (cannot happen with the tag mask used here, where self loops are legal).
inline std::vector<int> random_valid_tags(std::mt19937_64& rng, const dner::TagMask& mask,
                                          int n) {
  std::vector<int> tags(n);
  std::vector<int> opts;
  for (int t = 0; t < n; ++t) {
    opts.clear();
    for (int y = 0; y < mask.num; ++y) {
      bool ok = (t == 0) ? mask.start_ok[y] != 0 : mask.allowed(tags[t - 1], y);
      if (ok) opts.push_back(y);
    }
    tags[t] = opts[std::uniform_int_distribution<size_t>(0, opts.size() - 1)(rng)];
  }
  return tags;
}

struct GradCheckResult {
  double max_rel = 0.0;
  double max_abs = 0.0;
  std::string worst;
};

// Central finite differences over every parameter scalar against previously
// captured analytic gradients. loss_value must recompute the loss from the
// current parameter values with no side effects.
template <typename LossFn>
GradCheckResult finite_difference_check(dner::ParamStoreT<double>& params,
                                        const std::vector<std::vector<double>>& analytic,
                                        LossFn&& loss_value, double h = 1e-5) {
  GradCheckResult res;
  for (size_t p = 0; p < params.count(); ++p) {
    auto& t = params[p];
    for (size_t idx = 0; idx < t.value.size(); ++idx) {
      double keep = t.value[idx];
      t.value[idx] = keep + h;
      double up = loss_value();
      t.value[idx] = keep - h;
      double dn = loss_value();
      t.value[idx] = keep;
      double fd = (up - dn) / (2.0 * h);
      double ad = analytic[p][idx];
      double abs_err = std::abs(fd - ad);
      double rel = abs_err / std::max({1e-5, std::abs(fd), std::abs(ad)});
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst = t.name + "[" + std::to_string(idx) + "]";
      }
      res.max_abs = std::max(res.max_abs, abs_err);
    }
  }
  return res;
}

inline std::vector<std::vector<double>> snapshot_grads(const dner::ParamStoreT<double>& params) {
  std::vector<std::vector<double>> out;
  for (size_t p = 0; p < params.count(); ++p) out.push_back(params[p].grad);
  return out;
}

}  // namespace oracles
