#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dner/corpus.hpp"
#include "dner/tape.hpp"

namespace dner {

// Edge families. Families sharing (type, position) share one score slot.
//   a_skip     A_i -> (A_{i+1})              no segment starts at i
//   a_start    A_i -> (E_i, A_{i+1})         at least one segment starts at i
//   e_skip     type-row pass in the subset gadget under E_i
//   e_take     type-row activation in the subset gadget under E_i
//   t_start    T^k_i -> (I^k_{i,i})
//   i_end      I^k_{i,j} -> (X)              emit segment (k, i, j)
//   i_cont     I^k_{i,j} -> (I^k_{i,j+1})
//   i_end_cont I^k_{i,j} -> (X, I^k_{i,j+1}) emit (k, i, j), a longer one continues
enum class EdgeFamily : uint8_t { ASkip, AStart, ESkip, ETake, TStart, IEnd, ICont, IEndCont };

inline const char* family_name(EdgeFamily f) {
  switch (f) {
    case EdgeFamily::ASkip: return "a_skip";
    case EdgeFamily::AStart: return "a_start";
    case EdgeFamily::ESkip: return "e_skip";
    case EdgeFamily::ETake: return "e_take";
    case EdgeFamily::TStart: return "t_start";
    case EdgeFamily::IEnd: return "i_end";
    case EdgeFamily::ICont: return "i_cont";
    case EdgeFamily::IEndCont: return "i_end_cont";
  }
  return "?";
}

constexpr int kNumEdgeFamilies = 8;

// Segment families score the span representation next to the word at the
// running end; every other family scores the word at the anchor position.
inline bool family_uses_span(EdgeFamily f) {
  return f == EdgeFamily::IEnd || f == EdgeFamily::ICont || f == EdgeFamily::IEndCont;
}
inline bool family_typed(EdgeFamily f) {
  return f != EdgeFamily::ASkip && f != EdgeFamily::AStart;
}

struct Hyperedge {
  int head = -1;
  std::array<int, 2> tails{-1, -1};
  int arity = 0;
  EdgeFamily family = EdgeFamily::ASkip;
  int type = -1;
  int i = -1;
  int j = -1;
  int key = -1;
  bool emits = false;
};

enum class NodeKind : uint8_t { A, U, V, T, I, X };

struct HgNode {
  NodeKind kind;
  int type = -1;
  int i = -1;
  int j = -1;
  std::vector<int> out;
};

struct ScoreKey {
  EdgeFamily family;
  int type;
  int i;
  int j;
};

// Hypergraph over n token positions whose source-to-sink hyperpaths are in
// bijection with the sets of typed segments of token length <= c. U rows of
// the gadget under E_i still owe one activation; V rows are already
// satisfied, which keeps the subset choice linear in the type count.
class SegmentalHypergraph {
 public:
  SegmentalHypergraph(int n, int c, int m) : n_(n), c_(c), m_(m) {
    if (n < 1) throw std::invalid_argument("hypergraph: need at least one token");
    if (c < 1) throw std::invalid_argument("hypergraph: max segment length must be positive");
    if (m < 1) throw std::invalid_argument("hypergraph: need at least one type");
    build();
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int m() const { return m_; }
  const std::vector<HgNode>& nodes() const { return nodes_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  const std::vector<ScoreKey>& keys() const { return keys_; }
  const std::vector<int>& topo() const { return topo_; }
  int root() const { return root_; }
  int sink() const { return sink_; }

  int a_node(int i) const { return a_.at(i); }
  int u_node(int i, int t) const { return u_.at(i * m_ + t); }
  int v_node(int i, int t) const { return v_.at(i * m_ + t); }
  int t_node(int k, int i) const { return t_.at(k * n_ + i); }
  int i_node(int k, int i, int j) const {
    if (j < i || j - i >= c_ || j >= n_) return -1;
    return i_.at((k * n_ + i) * c_ + (j - i));
  }

  int edge_a_skip(int i) const { return eid_a_skip_.at(i); }
  int edge_a_start(int i) const { return eid_a_start_.at(i); }
  int edge_u_skip(int i, int t) const { return eid_u_skip_.at(i * m_ + t); }
  int edge_u_take(int i, int t) const { return eid_u_take_.at(i * m_ + t); }
  int edge_v_skip(int i, int t) const { return eid_v_skip_.at(i * m_ + t); }
  int edge_v_take(int i, int t) const { return eid_v_take_.at(i * m_ + t); }
  int edge_t_start(int k, int i) const { return eid_t_start_.at(k * n_ + i); }
  int edge_i_end(int k, int i, int j) const { return eid_i_end_.at(ipos(k, i, j)); }
  int edge_i_cont(int k, int i, int j) const { return eid_i_cont_.at(ipos(k, i, j)); }
  int edge_i_end_cont(int k, int i, int j) const { return eid_i_end_cont_.at(ipos(k, i, j)); }

  std::string node_label(int id, const std::vector<std::string>* types = nullptr) const {
    const HgNode& nd = nodes_.at(id);
    auto ty = [&](int k) {
      return types && k >= 0 && k < static_cast<int>(types->size()) ? (*types)[k]
                                                                    : std::to_string(k);
    };
    switch (nd.kind) {
      case NodeKind::A: return "A" + std::to_string(nd.i);
      case NodeKind::U:
        if (nd.type == 0) return "E" + std::to_string(nd.i);
        return "U" + std::to_string(nd.i) + "." + std::to_string(nd.type);
      case NodeKind::V: return "V" + std::to_string(nd.i) + "." + std::to_string(nd.type);
      case NodeKind::T: return "T" + std::to_string(nd.i) + "[" + ty(nd.type) + "]";
      case NodeKind::I:
        return "I" + std::to_string(nd.i) + ":" + std::to_string(nd.j) + "[" + ty(nd.type) + "]";
      case NodeKind::X: return "X";
    }
    return "?";
  }

 private:
  int n_, c_, m_;
  std::vector<HgNode> nodes_;
  std::vector<Hyperedge> edges_;
  std::vector<ScoreKey> keys_;
  std::vector<int> topo_;
  int root_ = -1;
  int sink_ = -1;
  std::vector<int> a_, u_, v_, t_, i_;
  std::vector<int> eid_a_skip_, eid_a_start_;
  std::vector<int> eid_u_skip_, eid_u_take_, eid_v_skip_, eid_v_take_;
  std::vector<int> eid_t_start_;
  std::vector<int> eid_i_end_, eid_i_cont_, eid_i_end_cont_;
  std::map<std::tuple<int, int, int, int>, int> key_ids_;

  size_t ipos(int k, int i, int j) const {
    if (j < i || j - i >= c_ || j >= n_ || i < 0 || k < 0 || k >= m_)
      throw std::out_of_range("hypergraph: bad segment index");
    return static_cast<size_t>((k * n_ + i) * c_ + (j - i));
  }

  int add_node(NodeKind kind, int type, int i, int j) {
    nodes_.push_back(HgNode{kind, type, i, j, {}});
    return static_cast<int>(nodes_.size() - 1);
  }

  int add_edge(EdgeFamily f, int type, int i, int j, int head, std::initializer_list<int> tails,
               bool emits = false) {
    Hyperedge e;
    e.family = f;
    e.type = type;
    e.i = i;
    e.j = j;
    e.head = head;
    e.emits = emits;
    for (int t : tails) e.tails[e.arity++] = t;
    auto kt = std::make_tuple(static_cast<int>(f), type, i, j);
    auto it = key_ids_.find(kt);
    if (it == key_ids_.end()) {
      it = key_ids_.emplace(kt, static_cast<int>(keys_.size())).first;
      keys_.push_back(ScoreKey{f, type, i, j});
    }
    e.key = it->second;
    int id = static_cast<int>(edges_.size());
    edges_.push_back(e);
    nodes_[head].out.push_back(id);
    return id;
  }

  void build() {
    a_.resize(n_);
    u_.assign(static_cast<size_t>(n_) * m_, -1);
    v_.assign(static_cast<size_t>(n_) * m_, -1);
    t_.assign(static_cast<size_t>(m_) * n_, -1);
    i_.assign(static_cast<size_t>(m_) * n_ * c_, -1);

    for (int i = 0; i < n_; ++i) a_[i] = add_node(NodeKind::A, -1, i, -1);
    for (int i = 0; i < n_; ++i) {
      u_[i * m_ + 0] = add_node(NodeKind::U, 0, i, -1);
      for (int t = 1; t < m_; ++t) {
        u_[i * m_ + t] = add_node(NodeKind::U, t, i, -1);
        v_[i * m_ + t] = add_node(NodeKind::V, t, i, -1);
      }
    }
    for (int k = 0; k < m_; ++k)
      for (int i = 0; i < n_; ++i) t_[k * n_ + i] = add_node(NodeKind::T, k, i, -1);
    for (int k = 0; k < m_; ++k)
      for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_ && j - i < c_; ++j)
          i_[(k * n_ + i) * c_ + (j - i)] = add_node(NodeKind::I, k, i, j);
    sink_ = add_node(NodeKind::X, -1, -1, -1);
    root_ = a_[0];

    eid_a_skip_.assign(n_, -1);
    eid_a_start_.assign(n_, -1);
    eid_u_skip_.assign(static_cast<size_t>(n_) * m_, -1);
    eid_u_take_.assign(static_cast<size_t>(n_) * m_, -1);
    eid_v_skip_.assign(static_cast<size_t>(n_) * m_, -1);
    eid_v_take_.assign(static_cast<size_t>(n_) * m_, -1);
    eid_t_start_.assign(static_cast<size_t>(m_) * n_, -1);
    eid_i_end_.assign(static_cast<size_t>(m_) * n_ * c_, -1);
    eid_i_cont_.assign(static_cast<size_t>(m_) * n_ * c_, -1);
    eid_i_end_cont_.assign(static_cast<size_t>(m_) * n_ * c_, -1);

    for (int i = 0; i < n_; ++i) {
      bool last = (i == n_ - 1);
      int e0 = u_node(i, 0);
      if (last) {
        eid_a_skip_[i] = add_edge(EdgeFamily::ASkip, -1, i, -1, a_[i], {sink_});
        eid_a_start_[i] = add_edge(EdgeFamily::AStart, -1, i, -1, a_[i], {e0});
      } else {
        eid_a_skip_[i] = add_edge(EdgeFamily::ASkip, -1, i, -1, a_[i], {a_[i + 1]});
        eid_a_start_[i] = add_edge(EdgeFamily::AStart, -1, i, -1, a_[i], {e0, a_[i + 1]});
      }
      for (int t = 0; t < m_; ++t) {
        int src = u_node(i, t);
        if (t < m_ - 1) {
          eid_u_skip_[i * m_ + t] =
              add_edge(EdgeFamily::ESkip, t, i, -1, src, {u_node(i, t + 1)});
          eid_u_take_[i * m_ + t] =
              add_edge(EdgeFamily::ETake, t, i, -1, src, {t_node(t, i), v_node(i, t + 1)});
        } else {
          eid_u_take_[i * m_ + t] = add_edge(EdgeFamily::ETake, t, i, -1, src, {t_node(t, i)});
        }
      }
      for (int t = 1; t < m_; ++t) {
        int src = v_node(i, t);
        if (t < m_ - 1) {
          eid_v_skip_[i * m_ + t] =
              add_edge(EdgeFamily::ESkip, t, i, -1, src, {v_node(i, t + 1)});
          eid_v_take_[i * m_ + t] =
              add_edge(EdgeFamily::ETake, t, i, -1, src, {t_node(t, i), v_node(i, t + 1)});
        } else {
          eid_v_skip_[i * m_ + t] = add_edge(EdgeFamily::ESkip, t, i, -1, src, {sink_});
          eid_v_take_[i * m_ + t] = add_edge(EdgeFamily::ETake, t, i, -1, src, {t_node(t, i)});
        }
      }
      for (int k = 0; k < m_; ++k)
        eid_t_start_[k * n_ + i] =
            add_edge(EdgeFamily::TStart, k, i, -1, t_node(k, i), {i_node(k, i, i)});
      for (int k = 0; k < m_; ++k)
        for (int j = i; j < n_ && j - i < c_; ++j) {
          int src = i_node(k, i, j);
          size_t p = ipos(k, i, j);
          eid_i_end_[p] = add_edge(EdgeFamily::IEnd, k, i, j, src, {sink_}, true);
          bool can_cont = (j + 1 < n_) && (j + 1 - i < c_);
          if (can_cont) {
            eid_i_cont_[p] =
                add_edge(EdgeFamily::ICont, k, i, j, src, {i_node(k, i, j + 1)});
            eid_i_end_cont_[p] = add_edge(EdgeFamily::IEndCont, k, i, j, src,
                                          {sink_, i_node(k, i, j + 1)}, true);
          }
        }
    }

    topo_.reserve(nodes_.size());
    topo_.push_back(sink_);
    for (int i = n_ - 1; i >= 0; --i) {
      for (int k = 0; k < m_; ++k)
        for (int j = std::min(n_ - 1, i + c_ - 1); j >= i; --j) topo_.push_back(i_node(k, i, j));
      for (int k = 0; k < m_; ++k) topo_.push_back(t_node(k, i));
      for (int t = m_ - 1; t >= 1; --t) topo_.push_back(v_node(i, t));
      for (int t = m_ - 1; t >= 0; --t) topo_.push_back(u_node(i, t));
      topo_.push_back(a_[i]);
    }
  }
};

// Log-partition over all hyperpaths, scores indexed by edge id.
template <typename Real>
Real inside_logZ(const SegmentalHypergraph& g, std::span<const Real> edge_scores) {
  if (edge_scores.size() != g.edges().size())
    throw std::invalid_argument("inside: score count mismatch");
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  std::vector<Real> in(g.nodes().size(), kNegInf);
  std::vector<Real> terms;
  for (int v : g.topo()) {
    if (v == g.sink()) {
      in[v] = Real(0);
      continue;
    }
    terms.clear();
    Real mx = kNegInf;
    for (int eid : g.nodes()[v].out) {
      const Hyperedge& e = g.edges()[eid];
      Real t = edge_scores[eid];
      for (int a = 0; a < e.arity; ++a) t += in[e.tails[a]];
      terms.push_back(t);
      mx = std::max(mx, t);
    }
    if (terms.empty() || (std::isinf(mx) && mx < Real(0))) {
      in[v] = kNegInf;
      continue;
    }
    Real acc = 0;
    for (Real t : terms) acc += std::exp(t - mx);
    in[v] = mx + std::log(acc);
  }
  return in[g.root()];
}

// Same recurrence recorded on the tape so the partition is differentiable.
template <typename Real>
typename TapeT<Real>::Var inside_logZ_tape(TapeT<Real>& tape, const SegmentalHypergraph& g,
                                           std::span<const typename TapeT<Real>::Var> edge_scores) {
  using Var = typename TapeT<Real>::Var;
  if (edge_scores.size() != g.edges().size())
    throw std::invalid_argument("inside: score count mismatch");
  std::vector<Var> in(g.nodes().size());
  std::vector<Var> terms;
  std::vector<Var> parts;
  for (int v : g.topo()) {
    if (v == g.sink()) {
      in[v] = tape.zeros(1);
      continue;
    }
    terms.clear();
    for (int eid : g.nodes()[v].out) {
      const Hyperedge& e = g.edges()[eid];
      parts.clear();
      parts.push_back(edge_scores[eid]);
      for (int a = 0; a < e.arity; ++a) parts.push_back(in[e.tails[a]]);
      terms.push_back(tape.sum(parts));
    }
    in[v] = tape.logsumexp(terms);
  }
  return in[g.root()];
}

// Number of derivations, by the same sweep with counting semantics.
inline double hyperpath_count(const SegmentalHypergraph& g) {
  std::vector<double> cnt(g.nodes().size(), 0);
  for (int v : g.topo()) {
    if (v == g.sink()) {
      cnt[v] = 1;
      continue;
    }
    double s = 0;
    for (int eid : g.nodes()[v].out) {
      const Hyperedge& e = g.edges()[eid];
      double p = 1;
      for (int a = 0; a < e.arity; ++a) p *= cnt[e.tails[a]];
      s += p;
    }
    cnt[v] = s;
  }
  return cnt[g.root()];
}

template <typename Real>
struct MapResultT {
  Real score = 0;
  std::vector<int> edge_ids;
};

// Highest-scoring hyperpath. Ties resolve to the derivation with fewer
// edges, then to the lexicographically smaller sorted edge id sequence,
// so equal-score decodes are reproducible. With all scores zero the empty
// segment set wins: its derivation is the unique shortest one.
template <typename Real>
MapResultT<Real> map_decode(const SegmentalHypergraph& g, std::span<const Real> edge_scores) {
  if (edge_scores.size() != g.edges().size())
    throw std::invalid_argument("decode: score count mismatch");
  struct Cand {
    Real score = 0;
    int64_t count = 0;
    std::vector<int> ids;
  };
  std::vector<Cand> best(g.nodes().size());
  for (int v : g.topo()) {
    if (v == g.sink()) continue;
    Cand cur;
    bool have = false;
    for (int eid : g.nodes()[v].out) {
      const Hyperedge& e = g.edges()[eid];
      Cand c;
      c.score = edge_scores[eid];
      c.count = 1;
      for (int a = 0; a < e.arity; ++a) {
        c.score += best[e.tails[a]].score;
        c.count += best[e.tails[a]].count;
      }
      if (have) {
        if (c.score < cur.score) continue;
        if (c.score == cur.score && c.count > cur.count) continue;
      }
      if (e.arity == 0) {
        c.ids.clear();
      } else if (e.arity == 1) {
        c.ids = best[e.tails[0]].ids;
      } else {
        const auto& l = best[e.tails[0]].ids;
        const auto& r = best[e.tails[1]].ids;
        c.ids.resize(l.size() + r.size());
        std::merge(l.begin(), l.end(), r.begin(), r.end(), c.ids.begin());
      }
      c.ids.insert(std::upper_bound(c.ids.begin(), c.ids.end(), eid), eid);
      if (have && c.score == cur.score && c.count == cur.count && !(c.ids < cur.ids)) continue;
      cur = std::move(c);
      have = true;
    }
    if (!have) throw std::logic_error("decode: node without outgoing edges");
    best[v] = std::move(cur);
  }
  return {best[g.root()].score, std::move(best[g.root()].ids)};
}

// Segments emitted along a hyperpath, sorted.
inline std::vector<TypedSegment> read_hyperpath(const SegmentalHypergraph& g,
                                                std::span<const int> edge_ids) {
  std::vector<TypedSegment> out;
  for (int eid : edge_ids) {
    const Hyperedge& e = g.edges().at(eid);
    if (e.emits) out.push_back(TypedSegment{e.type, Span{e.i, e.j}});
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Unique hyperpath emitting exactly the given segment set, as sorted edge
// ids. Rejects segments that do not fit the graph and duplicate segments.
inline std::vector<int> segments_to_hyperpath(const SegmentalHypergraph& g,
                                              std::vector<TypedSegment> segs) {
  // The position scan below consumes segments grouped by start, and the
  // per-type end lists must come out ascending for the binary_search.
  std::sort(segs.begin(), segs.end(), [](const TypedSegment& a, const TypedSegment& b) {
    return std::tie(a.span.start, a.type, a.span.end) < std::tie(b.span.start, b.type, b.span.end);
  });
  for (size_t s = 0; s < segs.size(); ++s) {
    const TypedSegment& ts = segs[s];
    if (ts.type < 0 || ts.type >= g.m()) throw std::invalid_argument("segment type out of range");
    if (ts.span.start < 0 || ts.span.end < ts.span.start || ts.span.end >= g.n())
      throw std::invalid_argument("segment span out of range");
    if (ts.span.length() > g.c()) throw std::invalid_argument("segment longer than the length cap");
    if (s > 0 && segs[s - 1] == ts) throw std::invalid_argument("duplicate segment");
  }
  std::vector<int> ids;
  size_t pos = 0;
  for (int i = 0; i < g.n(); ++i) {
    std::vector<std::vector<int>> ends(g.m());
    while (pos < segs.size() && segs[pos].span.start == i) {
      ends[segs[pos].type].push_back(segs[pos].span.end);
      ++pos;
    }
    bool any = false;
    for (int k = 0; k < g.m(); ++k) any = any || !ends[k].empty();
    if (!any) {
      ids.push_back(g.edge_a_skip(i));
      continue;
    }
    ids.push_back(g.edge_a_start(i));
    bool taken = false;
    for (int t = 0; t < g.m(); ++t) {
      bool take = !ends[t].empty();
      if (!taken) {
        if (take) {
          ids.push_back(g.edge_u_take(i, t));
          taken = true;
        } else {
          ids.push_back(g.edge_u_skip(i, t));
        }
      } else {
        ids.push_back(take ? g.edge_v_take(i, t) : g.edge_v_skip(i, t));
      }
    }
    for (int k = 0; k < g.m(); ++k) {
      if (ends[k].empty()) continue;
      ids.push_back(g.edge_t_start(k, i));
      int jmax = ends[k].back();
      for (int j = i; j <= jmax; ++j) {
        bool end_here = std::binary_search(ends[k].begin(), ends[k].end(), j);
        if (end_here && j < jmax)
          ids.push_back(g.edge_i_end_cont(k, i, j));
        else if (end_here)
          ids.push_back(g.edge_i_end(k, i, j));
        else
          ids.push_back(g.edge_i_cont(k, i, j));
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Checks that the ids form one complete derivation from the root.
inline bool validate_hyperpath(const SegmentalHypergraph& g, std::span<const int> edge_ids) {
  std::vector<std::vector<int>> by_head(g.nodes().size());
  for (int eid : edge_ids) {
    if (eid < 0 || eid >= static_cast<int>(g.edges().size())) return false;
    by_head[g.edges()[eid].head].push_back(eid);
  }
  std::vector<char> active(g.nodes().size(), 0);
  active[g.root()] = 1;
  size_t used = 0;
  // Parents precede children in reverse sweep order.
  for (auto it = g.topo().rbegin(); it != g.topo().rend(); ++it) {
    int v = *it;
    if (v == g.sink()) continue;
    if (!active[v]) {
      if (!by_head[v].empty()) return false;
      continue;
    }
    if (by_head[v].size() != 1) return false;
    const Hyperedge& e = g.edges()[by_head[v][0]];
    ++used;
    for (int a = 0; a < e.arity; ++a) {
      int t = e.tails[a];
      if (t != g.sink() && active[t]) return false;
      active[t] = 1;
    }
  }
  return used == edge_ids.size();
}

template <typename Real>
Real path_score(const SegmentalHypergraph& g, std::span<const Real> edge_scores,
                std::span<const int> edge_ids) {
  Real s = 0;
  for (int eid : edge_ids) s += edge_scores[eid];
  return s;
}

template <typename Real>
std::vector<TypedSegment> decode_segments(const SegmentalHypergraph& g,
                                          std::span<const Real> edge_scores) {
  auto res = map_decode(g, edge_scores);
  return read_hyperpath(g, res.edge_ids);
}

// -log p(gold segments | x) = logZ - score(gold hyperpath), on the tape.
template <typename Real>
typename TapeT<Real>::Var segment_nll_tape(TapeT<Real>& tape, const SegmentalHypergraph& g,
                                           std::span<const typename TapeT<Real>::Var> edge_scores,
                                           const std::vector<TypedSegment>& gold) {
  using Var = typename TapeT<Real>::Var;
  auto ids = segments_to_hyperpath(g, gold);
  std::vector<Var> terms;
  terms.reserve(ids.size());
  for (int eid : ids) terms.push_back(edge_scores[eid]);
  Var gold_score = tape.sum(terms);
  Var logz = inside_logZ_tape(tape, g, edge_scores);
  return tape.sub(logz, gold_score);
}

// Every typed segment the graph can emit, sorted.
inline std::vector<TypedSegment> enumerate_typed_segments(int n, int c, int m) {
  std::vector<TypedSegment> out;
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n && j - i < c; ++j) out.push_back(TypedSegment{k, Span{i, j}});
  std::sort(out.begin(), out.end());
  return out;
}

inline void dump_hypergraph(const SegmentalHypergraph& g, const std::vector<std::string>* types,
                            std::ostream& os) {
  os << "positions: " << g.n() << "  max segment length: " << g.c()
     << "  types: " << g.m() << "\n";
  os << "nodes: " << g.nodes().size() << "  edges: " << g.edges().size()
     << "  score slots: " << g.keys().size() << "  hyperpaths: " << hyperpath_count(g) << "\n";
  for (size_t eid = 0; eid < g.edges().size(); ++eid) {
    const Hyperedge& e = g.edges()[eid];
    os << "e" << eid << ": " << g.node_label(e.head, types) << " -> (";
    for (int a = 0; a < e.arity; ++a) {
      if (a) os << ", ";
      os << g.node_label(e.tails[a], types);
    }
    os << ") " << family_name(e.family);
    if (e.type >= 0) {
      os << " type=";
      if (types && e.type < static_cast<int>(types->size()))
        os << (*types)[e.type];
      else
        os << e.type;
    }
    if (family_uses_span(e.family))
      os << " feat=span[" << e.i << ":" << e.j << "]+word[" << e.j << "]";
    else
      os << " feat=word[" << e.i << "]";
    if (e.emits) os << " emits=[" << e.i << "," << e.j << "]";
    os << "\n";
  }
}

}  // namespace dner
