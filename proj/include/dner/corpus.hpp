#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dner {

// Token span, 0-based, both ends inclusive.
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
  auto operator<=>(const Span&) const = default;
};

// A typed contiguous span: either an entity on its own or one piece of a
// discontiguous entity.
struct Segment {
  Span span;
  std::string etype;

  auto operator<=>(const Segment&) const = default;
};

// Same thing with the type resolved to an index into a type inventory.
// The hypergraph and merger work in this form.
struct TypedSegment {
  int type = 0;
  Span span;

  auto operator<=>(const TypedSegment&) const = default;
};

// An entity: one type, 1..K spans sorted by start, pairwise non-overlapping,
// with at least one token between consecutive spans.
struct Entity {
  std::string etype;
  std::vector<Span> spans;

  bool contiguous() const { return spans.size() == 1; }
  bool covers_token(int t) const {
    for (const Span& s : spans)
      if (s.start <= t && t <= s.end) return true;
    return false;
  }
  bool shares_token(const Entity& o) const {
    for (const Span& a : spans)
      for (const Span& b : o.spans)
        if (a.overlaps(b)) return true;
    return false;
  }
  auto operator<=>(const Entity&) const = default;
};

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<Entity> entities;  // canonical order, no duplicates

  bool operator==(const AnnotatedSentence&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string line_tag(int line_no) {
  return line_no >= 0 ? "line " + std::to_string(line_no) + ": " : "";
}

}  // namespace detail

// Validates entity invariants against a sentence of n tokens.
// Throws ParseError; `where` prefixes the message.
inline void validate_entity(const Entity& e, int n, const std::string& where) {
  if (e.spans.empty()) throw ParseError(where + "entity has no spans");
  for (const Span& s : e.spans) {
    if (s.start < 0 || s.end < s.start || s.end >= n)
      throw ParseError(where + "span [" + std::to_string(s.start) + "," +
                       std::to_string(s.end) + "] out of range for " +
                       std::to_string(n) + " tokens");
  }
  for (size_t i = 1; i < e.spans.size(); ++i) {
    const Span& prev = e.spans[i - 1];
    const Span& cur = e.spans[i];
    if (cur.start < prev.start)
      throw ParseError(where + "spans not sorted by start");
    if (prev.overlaps(cur))
      throw ParseError(where + "overlapping spans within one entity");
    if (cur.start <= prev.end + 1)
      throw ParseError(where + "consecutive spans must be separated by a gap");
  }
}

// Canonical entity order inside a sentence, duplicates collapsed.
inline void normalize_entities(std::vector<Entity>& entities) {
  std::sort(entities.begin(), entities.end());
  entities.erase(std::unique(entities.begin(), entities.end()), entities.end());
}

// One sentence per JSON line:
//   {"tokens": ["a","b"], "entities": [{"type":"X","spans":[[0,0],[2,3]]}]}
// Spans are 0-based inclusive pairs and must arrive sorted by start.
inline AnnotatedSentence parse_jsonl(const std::string& line, int line_no = -1) {
  const std::string where = detail::line_tag(line_no);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + "malformed JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("tokens") || !j.contains("entities"))
    throw ParseError(where + "expected object with 'tokens' and 'entities'");

  AnnotatedSentence out;
  try {
    out.tokens = j.at("tokens").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where + "field 'tokens' must be an array of strings");
  }
  if (!j.at("entities").is_array())
    throw ParseError(where + "field 'entities' must be an array");

  for (const auto& je : j.at("entities")) {
    Entity e;
    if (!je.is_object() || !je.contains("type") || !je.contains("spans"))
      throw ParseError(where + "entity must have 'type' and 'spans'");
    if (!je.at("type").is_string())
      throw ParseError(where + "field 'type' must be a string");
    e.etype = je.at("type").get<std::string>();
    if (!je.at("spans").is_array() || je.at("spans").empty())
      throw ParseError(where + "field 'spans' must be a nonempty array");
    for (const auto& js : je.at("spans")) {
      if (!js.is_array() || js.size() != 2 || !js[0].is_number_integer() ||
          !js[1].is_number_integer())
        throw ParseError(where + "field 'spans' must hold [start, end] pairs");
      e.spans.push_back(Span{js[0].get<int>(), js[1].get<int>()});
    }
    validate_entity(e, static_cast<int>(out.tokens.size()), where);
    out.entities.push_back(std::move(e));
  }
  normalize_entities(out.entities);
  return out;
}

inline std::string serialize(const AnnotatedSentence& s) {
  nlohmann::json j;
  j["tokens"] = s.tokens;
  j["entities"] = nlohmann::json::array();
  for (const Entity& e : s.entities) {
    nlohmann::json je;
    je["type"] = e.etype;
    je["spans"] = nlohmann::json::array();
    for (const Span& sp : e.spans) je["spans"].push_back({sp.start, sp.end});
    j["entities"].push_back(std::move(je));
  }
  return j.dump();
}

// The segment set a gold entity set induces: every span of every entity,
// typed, deduplicated.
inline std::vector<Segment> derive_gold_segments(const std::vector<Entity>& entities) {
  std::vector<Segment> segs;
  for (const Entity& e : entities)
    for (const Span& sp : e.spans) segs.push_back(Segment{sp, e.etype});
  std::sort(segs.begin(), segs.end());
  segs.erase(std::unique(segs.begin(), segs.end()), segs.end());
  return segs;
}

// All spans of length <= c in a sentence of n tokens, sorted by (start, end).
inline std::vector<Span> enumerate_spans(int n, int c) {
  if (n < 0) throw std::invalid_argument("enumerate_spans: n must be >= 0");
  if (c < 1) throw std::invalid_argument("enumerate_spans: c must be >= 1");
  std::vector<Span> spans;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n && j - i + 1 <= c; ++j) spans.push_back(Span{i, j});
  return spans;
}

// Sorted unique entity type names of a corpus.
inline std::vector<std::string> type_inventory(const std::vector<AnnotatedSentence>& corpus) {
  std::vector<std::string> types;
  for (const auto& s : corpus)
    for (const auto& e : s.entities) types.push_back(e.etype);
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  return types;
}

inline int type_index(const std::vector<std::string>& inventory, const std::string& name) {
  auto it = std::lower_bound(inventory.begin(), inventory.end(), name);
  if (it == inventory.end() || *it != name)
    throw std::runtime_error("unknown entity type: " + name);
  return static_cast<int>(it - inventory.begin());
}

inline std::vector<TypedSegment> to_typed(const std::vector<Segment>& segs,
                                          const std::vector<std::string>& inventory) {
  std::vector<TypedSegment> out;
  out.reserve(segs.size());
  for (const Segment& s : segs)
    out.push_back(TypedSegment{type_index(inventory, s.etype), s.span});
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<Segment> from_typed(const std::vector<TypedSegment>& segs,
                                       const std::vector<std::string>& inventory) {
  std::vector<Segment> out;
  out.reserve(segs.size());
  for (const TypedSegment& s : segs)
    out.push_back(Segment{s.span, inventory.at(s.type)});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dner
