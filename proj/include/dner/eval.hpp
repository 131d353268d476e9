#pragma once

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dner/corpus.hpp"

namespace dner {

struct PrCounts {
  int64_t gold = 0;
  int64_t pred = 0;
  int64_t match = 0;

  double precision() const { return pred == 0 ? 0.0 : static_cast<double>(match) / pred; }
  double recall() const { return gold == 0 ? 0.0 : static_cast<double>(match) / gold; }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
  }
};

struct EvalReport {
  PrCounts overall;
  PrCounts seg1, seg2, seg3plus;
  PrCounts contiguous, discontiguous;
  PrCounts overlapping, nonoverlapping;
};

namespace detail {

inline bool entity_overlaps_any(const std::vector<Entity>& all, size_t self) {
  for (size_t o = 0; o < all.size(); ++o)
    if (o != self && all[self].shares_token(all[o])) return true;
  return false;
}

// Exact-match counting on one bucket: both sides filtered by the same
// predicate, matches counted on the intersection of the filtered sets.
template <typename Pred>
void tally(PrCounts& c, const std::vector<Entity>& gold, const std::vector<Entity>& pred,
           Pred keep) {
  std::vector<Entity> g, p;
  for (size_t i = 0; i < gold.size(); ++i)
    if (keep(gold, i)) g.push_back(gold[i]);
  for (size_t i = 0; i < pred.size(); ++i)
    if (keep(pred, i)) p.push_back(pred[i]);
  c.gold += static_cast<int64_t>(g.size());
  c.pred += static_cast<int64_t>(p.size());
  size_t a = 0, b = 0;
  while (a < g.size() && b < p.size()) {
    if (g[a] == p[b]) {
      ++c.match;
      ++a;
      ++b;
    } else if (g[a] < p[b]) {
      ++a;
    } else {
      ++b;
    }
  }
}

}  // namespace detail

// Micro-averaged exact match: an entity counts when type and the full
// span list agree. Buckets slice both sides by segment count and by
// whether the entity shares a token with another entity on its own side.
inline EvalReport evaluate_entities(const std::vector<AnnotatedSentence>& gold,
                                    const std::vector<AnnotatedSentence>& pred) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("evaluate: corpora differ in sentence count");
  EvalReport rep;
  for (size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].tokens != pred[s].tokens)
      throw std::invalid_argument("evaluate: sentence " + std::to_string(s) +
                                  " tokens differ between gold and prediction");
    std::vector<Entity> g = gold[s].entities, p = pred[s].entities;
    normalize_entities(g);
    normalize_entities(p);
    auto all = [](const std::vector<Entity>&, size_t) { return true; };
    auto segs = [](int lo, int hi) {
      return [lo, hi](const std::vector<Entity>& v, size_t i) {
        int k = static_cast<int>(v[i].spans.size());
        return k >= lo && k <= hi;
      };
    };
    auto ov = [](bool want) {
      return [want](const std::vector<Entity>& v, size_t i) {
        return detail::entity_overlaps_any(v, i) == want;
      };
    };
    auto contig = [](bool want) {
      return [want](const std::vector<Entity>& v, size_t i) {
        return v[i].contiguous() == want;
      };
    };
    detail::tally(rep.overall, g, p, all);
    detail::tally(rep.seg1, g, p, segs(1, 1));
    detail::tally(rep.seg2, g, p, segs(2, 2));
    detail::tally(rep.seg3plus, g, p, segs(3, 1 << 30));
    detail::tally(rep.contiguous, g, p, contig(true));
    detail::tally(rep.discontiguous, g, p, contig(false));
    detail::tally(rep.overlapping, g, p, ov(true));
    detail::tally(rep.nonoverlapping, g, p, ov(false));
  }
  return rep;
}

inline nlohmann::json to_json(const PrCounts& c) {
  return {{"gold", c.gold},           {"pred", c.pred},     {"match", c.match},
          {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"overall", to_json(r.overall)},
          {"by_segments", {{"1", to_json(r.seg1)}, {"2", to_json(r.seg2)}, {"3+", to_json(r.seg3plus)}}},
          {"contiguous", to_json(r.contiguous)},
          {"discontiguous", to_json(r.discontiguous)},
          {"overlapping", to_json(r.overlapping)},
          {"nonoverlapping", to_json(r.nonoverlapping)}};
}

inline void print_report(const EvalReport& r, std::ostream& os) {
  auto fmt = os.flags();
  auto prec = os.precision();
  auto row = [&](const char* name, const PrCounts& c) {
    os << std::left << std::setw(16) << name << std::right << std::fixed << std::setprecision(4)
       << std::setw(10) << c.precision() << std::setw(10) << c.recall() << std::setw(10) << c.f1()
       << std::setw(8) << c.gold << std::setw(8) << c.pred << std::setw(8) << c.match << "\n";
  };
  os << std::left << std::setw(16) << "bucket" << std::right << std::setw(10) << "P"
     << std::setw(10) << "R" << std::setw(10) << "F1" << std::setw(8) << "gold" << std::setw(8)
     << "pred" << std::setw(8) << "match" << "\n";
  row("overall", r.overall);
  row("1 segment", r.seg1);
  row("2 segments", r.seg2);
  row("3+ segments", r.seg3plus);
  row("contiguous", r.contiguous);
  row("discontiguous", r.discontiguous);
  row("overlapping", r.overlapping);
  row("non-overlap", r.nonoverlapping);
  os.flags(fmt);
  os.precision(prec);
}

}  // namespace dner
