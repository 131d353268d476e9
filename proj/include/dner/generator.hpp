#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dner/corpus.hpp"

namespace dner {

// Knobs for the synthetic clinical-style corpus. Fractions are targets:
// frac_* over emitted entities, overlap_fraction over sentences.
struct GenConfig {
  std::uint64_t seed = 0;
  int sentences = 500;
  int filler_vocab = 40;  // size of the non-entity filler word pool
  std::vector<std::string> types = {"disorder"};
  double frac_single = 0.45;
  double frac_double = 0.51;
  double frac_triple = 0.04;
  double overlap_fraction = 0.30;
  int max_segment_len = 2;
};

class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

struct CorpusStats {
  int sentences = 0;
  int entities = 0;
  std::array<int, 3> by_segments = {0, 0, 0};  // 1, 2, 3+ spans
  int discontiguous = 0;
  int overlapping_entities = 0;     // entity shares a token with another entity
  int sentences_with_overlap = 0;   // sentence holds at least one such pair

  double frac_segments(int k) const {
    return entities == 0 ? 0.0 : double(by_segments[k - 1]) / entities;
  }
  double frac_overlap_sentences() const {
    return sentences == 0 ? 0.0 : double(sentences_with_overlap) / sentences;
  }
};

inline CorpusStats corpus_stats(const std::vector<AnnotatedSentence>& corpus) {
  CorpusStats st;
  st.sentences = static_cast<int>(corpus.size());
  for (const auto& sent : corpus) {
    st.entities += static_cast<int>(sent.entities.size());
    bool any_overlap = false;
    for (size_t i = 0; i < sent.entities.size(); ++i) {
      const Entity& e = sent.entities[i];
      size_t k = std::min<size_t>(e.spans.size(), 3);
      st.by_segments[k - 1]++;
      if (e.spans.size() > 1) st.discontiguous++;
      bool overlaps = false;
      for (size_t j = 0; j < sent.entities.size(); ++j)
        if (j != i && e.shares_token(sent.entities[j])) overlaps = true;
      if (overlaps) {
        st.overlapping_entities++;
        any_overlap = true;
      }
    }
    if (any_overlap) st.sentences_with_overlap++;
  }
  return st;
}

namespace genwords {

inline const std::vector<std::string>& subjects() {
  static const std::vector<std::string> v = {"patient", "exam",  "scan",
                                             "report",  "study", "film"};
  return v;
}
inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"shows", "reveals", "demonstrates",
                                             "suggests", "confirms"};
  return v;
}
inline const std::vector<std::string>& findings() {
  static const std::vector<std::string> v = {
      "laceration", "lesion",   "edema",    "bleeding", "mass",     "ulcer",
      "tear",       "swelling", "opacity",  "stenosis", "thrombus", "fracture"};
  return v;
}
inline const std::vector<std::string>& anatomy() {
  static const std::vector<std::string> v = {
      "esophagus", "stomach",  "liver",    "spleen", "colon",   "lung",
      "kidney",    "bladder",  "pancreas", "duodenum", "ileum", "aorta"};
  return v;
}
inline const std::vector<std::string>& modifiers() {
  static const std::vector<std::string> v = {"mild",  "severe", "small",
                                             "large", "acute",  "chronic"};
  return v;
}

}  // namespace genwords

namespace detail {

// Per-sentence surface patterns. Entity words come from dedicated pools and
// connector words differ per pattern, so segment structure is recoverable
// from lexical cues alone.
enum class GenPattern { Single, Double, Triple, OverlapPair };

struct PatternProbs {
  double single, dbl, triple, overlap;
};

inline PatternProbs pattern_probs(const GenConfig& cfg) {
  double fsum = cfg.frac_single + cfg.frac_double + cfg.frac_triple;
  if (std::abs(fsum - 1.0) > 1e-9)
    throw GenerationError("segment-count fractions must sum to 1");
  if (cfg.max_segment_len < 1)
    throw GenerationError("max_segment_len must be >= 1");
  if (cfg.overlap_fraction < 0 || cfg.overlap_fraction >= 1)
    throw GenerationError("overlap_fraction must lie in [0, 1)");
  if (cfg.types.empty()) throw GenerationError("type inventory is empty");
  // An overlap sentence emits two 2-segment entities, the other patterns one
  // entity each; solve pattern rates so entity-level fractions hit targets.
  double t = 1.0 + cfg.overlap_fraction;
  PatternProbs p;
  p.overlap = cfg.overlap_fraction;
  p.single = cfg.frac_single * t;
  p.triple = cfg.frac_triple * t;
  p.dbl = cfg.frac_double * t - 2.0 * cfg.overlap_fraction;
  if (p.single < 0 || p.dbl < 0 || p.triple < 0 || p.single + p.dbl + p.triple + p.overlap > 1.0 + 1e-9)
    throw GenerationError(
        "infeasible targets: overlap_fraction too high for the requested "
        "2-segment entity fraction");
  return p;
}

}  // namespace detail

// Deterministic function of the config (seed included). Every emitted entity
// satisfies the Entity invariants; entities have at most 3 segments.
inline std::vector<AnnotatedSentence> generate_corpus(const GenConfig& cfg) {
  using namespace genwords;
  const detail::PatternProbs probs = detail::pattern_probs(cfg);
  if (cfg.sentences < 0) throw GenerationError("sentence count must be >= 0");
  if (cfg.filler_vocab < 1) throw GenerationError("filler_vocab must be >= 1");

  std::mt19937_64 rng(cfg.seed);
  auto pick = [&rng](const std::vector<std::string>& pool) -> const std::string& {
    return pool[rng() % pool.size()];
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::string> fillers;
  fillers.reserve(cfg.filler_vocab);
  for (int i = 0; i < cfg.filler_vocab; ++i)
    fillers.push_back("note" + std::to_string(i));

  // Types are cued by the finding word: finding pool index mod |types|.
  auto typed_finding = [&](int type) -> const std::string& {
    const auto& pool = findings();
    int per = static_cast<int>(pool.size()) / static_cast<int>(cfg.types.size());
    if (per == 0) per = 1;
    int base = (type * per) % static_cast<int>(pool.size());
    return pool[base + rng() % per];
  };

  std::vector<AnnotatedSentence> corpus;
  corpus.reserve(cfg.sentences);
  for (int si = 0; si < cfg.sentences; ++si) {
    double u = unit(rng);
    detail::GenPattern pat;
    if (u < probs.single)
      pat = detail::GenPattern::Single;
    else if (u < probs.single + probs.dbl)
      pat = detail::GenPattern::Double;
    else if (u < probs.single + probs.dbl + probs.triple)
      pat = detail::GenPattern::Triple;
    else
      pat = detail::GenPattern::OverlapPair;

    AnnotatedSentence s;
    s.tokens.push_back(pick(subjects()));
    s.tokens.push_back(pick(verbs()));
    int prefix = static_cast<int>(rng() % 3);
    for (int i = 0; i < prefix; ++i) s.tokens.push_back(pick(fillers));

    int type = static_cast<int>(rng() % cfg.types.size());
    const std::string& tname = cfg.types[type];
    int at = static_cast<int>(s.tokens.size());

    switch (pat) {
      case detail::GenPattern::Single: {
        // "<anatomy> <finding>": one contiguous entity.
        if (cfg.max_segment_len >= 2) {
          s.tokens.push_back(pick(anatomy()));
          s.tokens.push_back(typed_finding(type));
          s.entities.push_back(Entity{tname, {Span{at, at + 1}}});
        } else {
          s.tokens.push_back(typed_finding(type));
          s.entities.push_back(Entity{tname, {Span{at, at}}});
        }
        break;
      }
      case detail::GenPattern::Double: {
        // "<finding> in [the] <anatomy>": a 2-segment entity.
        s.tokens.push_back(typed_finding(type));
        s.tokens.push_back("in");
        if (rng() % 2) s.tokens.push_back("the");
        int a = static_cast<int>(s.tokens.size());
        s.tokens.push_back(pick(anatomy()));
        s.entities.push_back(Entity{tname, {Span{at, at}, Span{a, a}}});
        break;
      }
      case detail::GenPattern::Triple: {
        // "<finding> across <anatomy> then <anatomy>": one 3-segment entity.
        s.tokens.push_back(typed_finding(type));
        s.tokens.push_back("across");
        int a1 = static_cast<int>(s.tokens.size());
        s.tokens.push_back(pick(anatomy()));
        s.tokens.push_back("then");
        int a2 = static_cast<int>(s.tokens.size());
        s.tokens.push_back(pick(anatomy()));
        s.entities.push_back(
            Entity{tname, {Span{at, at}, Span{a1, a1}, Span{a2, a2}}});
        break;
      }
      case detail::GenPattern::OverlapPair: {
        // "<finding> in <anatomy> and <anatomy>": two 2-segment entities
        // sharing the finding token.
        s.tokens.push_back(typed_finding(type));
        s.tokens.push_back("in");
        int a1 = static_cast<int>(s.tokens.size());
        s.tokens.push_back(pick(anatomy()));
        s.tokens.push_back("and");
        int a2 = static_cast<int>(s.tokens.size());
        s.tokens.push_back(pick(anatomy()));
        s.entities.push_back(Entity{tname, {Span{at, at}, Span{a1, a1}}});
        s.entities.push_back(Entity{tname, {Span{at, at}, Span{a2, a2}}});
        break;
      }
    }

    int suffix = static_cast<int>(rng() % 3);
    if (suffix >= 1) s.tokens.push_back(pick(modifiers()));
    if (suffix >= 2) s.tokens.push_back(pick(fillers));

    normalize_entities(s.entities);
    for (const Entity& e : s.entities)
      validate_entity(e, static_cast<int>(s.tokens.size()), "generated: ");
    corpus.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace dner
