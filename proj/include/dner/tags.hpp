#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "dner/corpus.hpp"

namespace dner {

// Tag space: O plus six typed roles. B/I mark contiguous entities, BH/IH
// mark segments shared with another entity, BD/ID mark the remaining
// segments of discontiguous entities.
enum class TagRole : int { B = 0, I = 1, BH = 2, IH = 3, BD = 4, ID = 5 };

constexpr int kTagO = 0;
constexpr int kRolesPerType = 6;

inline int num_tags(int m) { return 1 + kRolesPerType * m; }
inline int tag_of(int type, TagRole role) {
  return 1 + kRolesPerType * type + static_cast<int>(role);
}
inline int tag_type(int tag) { return tag == kTagO ? -1 : (tag - 1) / kRolesPerType; }
inline TagRole tag_role(int tag) {
  if (tag == kTagO) throw std::logic_error("O has no role");
  return static_cast<TagRole>((tag - 1) % kRolesPerType);
}
inline bool tag_is_inside(int tag) {
  if (tag == kTagO) return false;
  TagRole r = tag_role(tag);
  return r == TagRole::I || r == TagRole::IH || r == TagRole::ID;
}

inline std::string tag_name(int tag, const std::vector<std::string>* types = nullptr) {
  if (tag == kTagO) return "O";
  static const char* roles[] = {"B", "I", "BH", "IH", "BD", "ID"};
  int k = tag_type(tag);
  std::string ty = types && k < static_cast<int>(types->size()) ? (*types)[k] : std::to_string(k);
  return std::string(roles[static_cast<int>(tag_role(tag))]) + "-" + ty;
}

// Inside tags continue a same-type run of their own role pair; everything
// else may follow anything. A sentence cannot open with an inside tag.
struct TagMask {
  int num;
  std::vector<char> start_ok;
  std::vector<char> trans_ok;
  bool allowed(int from, int to) const { return trans_ok[from * num + to] != 0; }
};

inline TagMask make_tag_mask(int m) {
  TagMask mask;
  mask.num = num_tags(m);
  mask.start_ok.assign(mask.num, 1);
  mask.trans_ok.assign(static_cast<size_t>(mask.num) * mask.num, 1);
  for (int to = 0; to < mask.num; ++to) {
    if (!tag_is_inside(to)) continue;
    mask.start_ok[to] = 0;
    TagRole open = static_cast<TagRole>(static_cast<int>(tag_role(to)) - 1);
    int b = tag_of(tag_type(to), open);
    for (int from = 0; from < mask.num; ++from)
      mask.trans_ok[from * mask.num + to] = (from == b || from == to) ? 1 : 0;
  }
  return mask;
}

inline bool tags_valid(const std::vector<int>& tags, const TagMask& mask) {
  if (tags.empty()) return true;
  if (!mask.start_ok[tags[0]]) return false;
  for (size_t t = 1; t < tags.size(); ++t)
    if (!mask.allowed(tags[t - 1], tags[t])) return false;
  return true;
}

namespace detail {
enum SegClass : int { kContig = 0, kBody = 1, kHead = 2 };
}

// Token-level tags for a sentence. Contiguous entities paint B/I. Each
// segment of a discontiguous entity paints BD/ID, or BH/IH when its tokens
// are shared with some other entity. On collisions the higher class wins
// (contiguous < body < head); a surviving stretch that lost its opening
// token restarts with the begin variant, so the output always satisfies
// the transition mask.
inline std::vector<int> encode_tags(const AnnotatedSentence& sent,
                                    const std::vector<std::string>& types) {
  const int n = static_cast<int>(sent.tokens.size());
  for (const Entity& e : sent.entities) validate_entity(e, n, "encode_tags");
  struct Paint {
    int cls = -1;
    int type = -1;
    int owner = -1;
  };
  std::vector<Paint> paint(n);
  int owner_id = 0;
  for (size_t ei = 0; ei < sent.entities.size(); ++ei) {
    const Entity& e = sent.entities[ei];
    int type = type_index(types, e.etype);
    for (const Span& sp : e.spans) {
      int cls = detail::kContig;
      if (e.spans.size() > 1) {
        cls = detail::kBody;
        for (size_t oj = 0; oj < sent.entities.size(); ++oj) {
          if (oj == ei) continue;
          for (int p = sp.start; p <= sp.end && cls != detail::kHead; ++p)
            if (sent.entities[oj].covers_token(p)) cls = detail::kHead;
          if (cls == detail::kHead) break;
        }
      }
      int uid = owner_id++;
      for (int p = sp.start; p <= sp.end; ++p) {
        if (paint[p].cls >= cls) continue;
        paint[p] = Paint{cls, type, uid};
      }
    }
  }
  std::vector<int> tags(n, kTagO);
  for (int p = 0; p < n; ++p) {
    if (paint[p].cls < 0) continue;
    bool begin = p == 0 || paint[p - 1].owner != paint[p].owner;
    TagRole role;
    switch (paint[p].cls) {
      case detail::kContig: role = begin ? TagRole::B : TagRole::I; break;
      case detail::kBody: role = begin ? TagRole::BD : TagRole::ID; break;
      default: role = begin ? TagRole::BH : TagRole::IH; break;
    }
    tags[p] = tag_of(paint[p].type, role);
  }
  return tags;
}

struct TagRun {
  int cls;
  int type;
  Span span;
};

// Maximal same-role stretches. A dangling inside tag opens a run as if it
// were its begin variant.
inline std::vector<TagRun> parse_tag_runs(const std::vector<int>& tags) {
  std::vector<TagRun> runs;
  for (size_t p = 0; p < tags.size(); ++p) {
    int tag = tags[p];
    if (tag == kTagO) continue;
    TagRole role = tag_role(tag);
    int cls = detail::kContig;
    if (role == TagRole::BD || role == TagRole::ID) cls = detail::kBody;
    if (role == TagRole::BH || role == TagRole::IH) cls = detail::kHead;
    bool inside = tag_is_inside(tag);
    bool continues = inside && !runs.empty() && runs.back().cls == cls &&
                     runs.back().type == tag_type(tag) &&
                     runs.back().span.end == static_cast<int>(p) - 1;
    if (continues)
      runs.back().span.end = static_cast<int>(p);
    else
      runs.push_back(TagRun{cls, tag_type(tag), Span{static_cast<int>(p), static_cast<int>(p)}});
  }
  return runs;
}

namespace detail {

struct RunView {
  std::vector<Entity> contiguous;
  std::vector<TagRun> segs;  // head and body runs, by position
};

// Contiguous runs become entities directly; one immediately followed by a
// same-type head run extends over it, recovering a mention whose opening
// was overwritten by the shared segment. Head and body runs stay available
// for combination.
inline RunView split_runs(const std::vector<TagRun>& runs,
                          const std::vector<std::string>& types) {
  RunView view;
  for (size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].cls == kContig) {
      Span sp = runs[r].span;
      if (r + 1 < runs.size() && runs[r + 1].cls == kHead && runs[r + 1].type == runs[r].type &&
          runs[r + 1].span.start == sp.end + 1)
        sp.end = runs[r + 1].span.end;
      view.contiguous.push_back(Entity{types.at(runs[r].type), {sp}});
    } else {
      view.segs.push_back(runs[r]);
    }
  }
  return view;
}

inline bool gap_ok(const Span& a, const Span& b) {
  return b.start >= a.end + 2 || a.start >= b.end + 2;
}

inline bool has_partner(const RunView& view, size_t s) {
  for (size_t o = 0; o < view.segs.size(); ++o) {
    if (o == s) continue;
    if (view.segs[o].type == view.segs[s].type && gap_ok(view.segs[s].span, view.segs[o].span))
      return true;
  }
  return false;
}

}  // namespace detail

// Exhaustive reading: every in-order combination of 2..max_segments
// same-type head/body runs with one-token gaps becomes an entity, except
// combinations of three or more that close on a shared segment; those
// duplicate shorter readings already emitted. A run with no possible
// partner stands alone.
inline std::vector<Entity> decode_tags_all(const std::vector<int>& tags,
                                           const std::vector<std::string>& types,
                                           int max_segments = 3) {
  auto view = detail::split_runs(parse_tag_runs(tags), types);
  std::vector<Entity> out = view.contiguous;
  const auto& segs = view.segs;
  std::vector<Span> cur;
  auto extend = [&](auto&& self, int type, size_t from, bool last_head) -> void {
    if (cur.size() >= 2 && !(cur.size() >= 3 && last_head))
      out.push_back(Entity{types.at(type), cur});
    if (static_cast<int>(cur.size()) == max_segments) return;
    for (size_t s = from; s < segs.size(); ++s) {
      if (segs[s].type != type) continue;
      if (segs[s].span.start < cur.back().end + 2) continue;
      cur.push_back(segs[s].span);
      self(self, type, s + 1, segs[s].cls == detail::kHead);
      cur.pop_back();
    }
  };
  for (size_t s = 0; s < segs.size(); ++s) {
    cur.assign(1, segs[s].span);
    extend(extend, segs[s].type, s + 1, segs[s].cls == detail::kHead);
    if (!detail::has_partner(view, s))
      out.push_back(Entity{types.at(segs[s].type), {segs[s].span}});
  }
  normalize_entities(out);
  return out;
}

// Minimal reading: each body claims the nearest free same-type head to its
// right, falling back to its left; leftover bodies pair up in order; any
// run still uncovered joins its nearest compatible run, or stands alone.
// Every entity it emits is one the exhaustive reading also emits.
inline std::vector<Entity> decode_tags_enough(const std::vector<int>& tags,
                                              const std::vector<std::string>& types) {
  auto view = detail::split_runs(parse_tag_runs(tags), types);
  std::vector<Entity> out = view.contiguous;
  const auto& segs = view.segs;
  const size_t S = segs.size();
  std::vector<char> head_used(S, 0), covered(S, 0);

  auto emit_pair = [&](size_t a, size_t b) {
    Span lo = segs[a].span, hi = segs[b].span;
    if (hi < lo) std::swap(lo, hi);
    out.push_back(Entity{types.at(segs[a].type), {lo, hi}});
    covered[a] = covered[b] = 1;
  };

  std::vector<size_t> unpaired;
  for (size_t s = 0; s < S; ++s) {
    if (segs[s].cls != detail::kBody) continue;
    size_t pick = S;
    for (size_t h = s + 1; h < S; ++h)
      if (segs[h].cls == detail::kHead && !head_used[h] && segs[h].type == segs[s].type &&
          segs[h].span.start >= segs[s].span.end + 2) {
        pick = h;
        break;
      }
    if (pick == S)
      for (size_t h = s; h-- > 0;)
        if (segs[h].cls == detail::kHead && !head_used[h] && segs[h].type == segs[s].type &&
            segs[s].span.start >= segs[h].span.end + 2) {
          pick = h;
          break;
        }
    if (pick < S) {
      head_used[pick] = 1;
      emit_pair(s, pick);
    } else {
      unpaired.push_back(s);
    }
  }

  for (size_t u = 0; u < unpaired.size();) {
    if (u + 1 < unpaired.size() && segs[unpaired[u]].type == segs[unpaired[u + 1]].type &&
        segs[unpaired[u + 1]].span.start >= segs[unpaired[u]].span.end + 2) {
      emit_pair(unpaired[u], unpaired[u + 1]);
      u += 2;
    } else {
      ++u;
    }
  }

  for (size_t s = 0; s < S; ++s) {
    if (covered[s]) continue;
    size_t pick = S;
    int best_gap = 0;
    for (size_t o = 0; o < S; ++o) {
      if (o == s || segs[o].type != segs[s].type ||
          !detail::gap_ok(segs[s].span, segs[o].span))
        continue;
      int gap = std::max(segs[o].span.start - segs[s].span.end,
                         segs[s].span.start - segs[o].span.end);
      if (pick == S || gap < best_gap ||
          (gap == best_gap && segs[o].span.start < segs[pick].span.start)) {
        pick = o;
        best_gap = gap;
      }
    }
    if (pick < S)
      emit_pair(s, pick);
    else
      out.push_back(Entity{types.at(segs[s].type), {segs[s].span}});
  }
  normalize_entities(out);
  return out;
}

}  // namespace dner
