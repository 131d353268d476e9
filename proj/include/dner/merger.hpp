#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dner/corpus.hpp"

namespace dner {

// A set of same-type segments that may form one entity: spans in order,
// pairwise separated by at least one token.
struct MergeCandidate {
  int type = -1;
  std::vector<Span> spans;

  auto operator<=>(const MergeCandidate&) const = default;
};

// All candidates over the given segments with 1..max_segments parts.
// Deterministic order: type, then first span, then part count, then spans.
inline std::vector<MergeCandidate> enumerate_candidates(const std::vector<TypedSegment>& segments,
                                                        int max_segments = 3) {
  if (max_segments < 1) throw std::invalid_argument("candidates: need max_segments >= 1");
  std::vector<TypedSegment> segs = segments;
  std::sort(segs.begin(), segs.end());
  segs.erase(std::unique(segs.begin(), segs.end()), segs.end());

  std::vector<MergeCandidate> out;
  std::vector<Span> cur;
  auto extend = [&](auto&& self, int type, size_t from) -> void {
    out.push_back(MergeCandidate{type, cur});
    if (static_cast<int>(cur.size()) == max_segments) return;
    for (size_t s = from; s < segs.size(); ++s) {
      if (segs[s].type != type) continue;
      if (segs[s].span.start < cur.back().end + 2) continue;
      cur.push_back(segs[s].span);
      self(self, type, s + 1);
      cur.pop_back();
    }
  };
  for (size_t s = 0; s < segs.size(); ++s) {
    cur.assign(1, segs[s].span);
    extend(extend, segs[s].type, s + 1);
  }
  std::sort(out.begin(), out.end(), [](const MergeCandidate& a, const MergeCandidate& b) {
    if (a.type != b.type) return a.type < b.type;
    if (a.spans.front() != b.spans.front()) return a.spans.front() < b.spans.front();
    if (a.spans.size() != b.spans.size()) return a.spans.size() < b.spans.size();
    return a.spans < b.spans;
  });
  return out;
}

// 1 where the candidate's span set is exactly one gold entity, else 0.
inline std::vector<char> gold_merge_labels(const std::vector<MergeCandidate>& candidates,
                                           const std::vector<Entity>& gold,
                                           const std::vector<std::string>& types) {
  std::vector<char> labels(candidates.size(), 0);
  for (size_t c = 0; c < candidates.size(); ++c) {
    const MergeCandidate& cand = candidates[c];
    const std::string& tname = types.at(cand.type);
    for (const Entity& e : gold) {
      if (e.etype == tname && e.spans == cand.spans) {
        labels[c] = 1;
        break;
      }
    }
  }
  return labels;
}

// log p(selection | x, s) under independent per-candidate decisions:
// selected candidates contribute log p_c, the rest log(1 - p_c).
template <typename Real>
Real selection_logprob(std::span<const Real> logits, std::span<const char> selected) {
  if (logits.size() != selected.size())
    throw std::invalid_argument("selection_logprob: size mismatch");
  auto log1p_exp = [](Real z) {
    return z > Real(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  };
  Real lp = 0;
  for (size_t c = 0; c < logits.size(); ++c) {
    // log sigmoid(z) = -log(1+e^{-z}); log(1-sigmoid(z)) = -log(1+e^{z})
    lp -= selected[c] ? log1p_exp(-logits[c]) : log1p_exp(logits[c]);
  }
  return lp;
}

// Most probable selection: take a candidate iff p > 1/2, i.e. logit > 0.
// At p exactly 1/2 both choices tie; the candidate is left out.
template <typename Real>
std::vector<char> select_candidates(std::span<const Real> logits) {
  std::vector<char> sel(logits.size(), 0);
  for (size_t c = 0; c < logits.size(); ++c) sel[c] = logits[c] > Real(0) ? 1 : 0;
  return sel;
}

inline std::vector<Entity> entities_from_selection(const std::vector<MergeCandidate>& candidates,
                                                   std::span<const char> selected,
                                                   const std::vector<std::string>& types) {
  if (candidates.size() != selected.size())
    throw std::invalid_argument("entities_from_selection: size mismatch");
  std::vector<Entity> out;
  for (size_t c = 0; c < candidates.size(); ++c)
    if (selected[c]) out.push_back(Entity{types.at(candidates[c].type), candidates[c].spans});
  normalize_entities(out);
  return out;
}

}  // namespace dner
