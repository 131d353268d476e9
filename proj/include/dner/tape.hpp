#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dner/tensor.hpp"

namespace dner {

template <typename Real>
inline Real stable_sigmoid(Real x) {
  if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

// log(1 + e^x) without overflow.
template <typename Real>
inline Real softplus(Real x) {
  if (x > Real(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Reverse-mode tape over vector values. Nodes are recorded in creation
// order, which is a topological order by construction; backward() walks it
// once in reverse. Parameter tensors live outside the tape and receive
// gradients in their own buffers.
template <typename Real>
class TapeT {
 public:
  struct Var {
    int32_t id = -1;
    int32_t size = 0;
    bool valid() const { return id >= 0; }
  };

  static constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

  void reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
  }
  size_t node_count() const { return nodes_.size(); }

  std::span<const Real> value(Var v) const {
    const Node& n = node(v);
    return {vals_.data() + n.off, static_cast<size_t>(n.size)};
  }
  Real scalar(Var v) const {
    if (v.size != 1) throw std::logic_error("scalar() on non-scalar var");
    return vals_[node(v).off];
  }
  std::span<const Real> grad(Var v) const {
    const Node& n = node(v);
    return {grads_.data() + n.off, static_cast<size_t>(n.size)};
  }

  Var input(std::vector<Real> v) {
    Var out = make(Op::Input, static_cast<int>(v.size()));
    std::copy(v.begin(), v.end(), val(out));
    return out;
  }
  Var zeros(int size) { return make_var(Op::Input, size); }

  // Whole tensor as a var (flat row-major).
  Var param(TensorT<Real>& p) {
    Var out = make(Op::Param, p.size());
    nodes_.back().pa = &p;
    std::copy(p.value.begin(), p.value.end(), val(out));
    return out;
  }

  Var lookup(TensorT<Real>& table, int row) {
    if (row < 0 || row >= table.rows) throw std::out_of_range("lookup: row out of range");
    Var out = make(Op::Lookup, table.cols);
    Node& n = nodes_.back();
    n.pa = &table;
    n.i0 = row;
    std::copy(table.value.begin() + static_cast<size_t>(row) * table.cols,
              table.value.begin() + static_cast<size_t>(row + 1) * table.cols, val(out));
    return out;
  }

  // y = W x + b. W is rows x cols, x has size cols, b has size rows.
  Var affine(TensorT<Real>& W, TensorT<Real>& b, Var x) {
    if (x.size != W.cols || b.size() != W.rows)
      throw std::logic_error("affine: dimension mismatch for " + W.name);
    Var out = make(Op::Affine, W.rows);
    Node& n = nodes_.back();
    n.a = x.id;
    n.pa = &W;
    n.pb = &b;
    const Real* xv = cval(x);
    Real* y = val(out);
    for (int r = 0; r < W.rows; ++r) {
      Real acc = b.value[r];
      const Real* wr = W.value.data() + static_cast<size_t>(r) * W.cols;
      for (int c = 0; c < W.cols; ++c) acc += wr[c] * xv[c];
      y[r] = acc;
    }
    return out;
  }

  // Single tensor entry as a scalar var.
  Var param_entry(TensorT<Real>& p, int r, int c) {
    if (r < 0 || r >= p.rows || c < 0 || c >= p.cols)
      throw std::out_of_range("param_entry: index out of range");
    Var out = make(Op::ParamEntry, 1);
    Node& n = nodes_.back();
    n.pa = &p;
    n.i0 = r * p.cols + c;
    *val(out) = p.value[n.i0];
    return out;
  }

  Var add(Var a, Var b) { return binary(Op::Add, a, b); }
  Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }

  Var concat(std::span<const Var> parts) {
    int total = 0;
    for (Var p : parts) total += p.size;
    Var out = make(Op::Concat, total);
    Node& n = nodes_.back();
    Real* y = val(out);
    for (Var p : parts) {
      n.args.push_back(p.id);
      const Real* pv = cval(p);
      y = std::copy(pv, pv + p.size, y);
    }
    return out;
  }
  Var concat2(Var a, Var b) {
    Var parts[2] = {a, b};
    return concat(parts);
  }

  Var slice(Var x, int off, int len) {
    if (off < 0 || len < 1 || off + len > x.size) throw std::out_of_range("slice: bad range");
    Var out = make(Op::Slice, len);
    Node& n = nodes_.back();
    n.a = x.id;
    n.i0 = off;
    const Real* xv = cval(x);
    std::copy(xv + off, xv + off + len, val(out));
    return out;
  }
  Var pick(Var x, int i) { return slice(x, i, 1); }

  Var sigmoid(Var x) {
    Var out = unary(Op::Sigmoid, x);
    const Real* xv = cval(x);
    Real* y = val(out);
    for (int i = 0; i < x.size; ++i) y[i] = stable_sigmoid(xv[i]);
    return out;
  }
  Var tanh(Var x) {
    Var out = unary(Op::Tanh, x);
    const Real* xv = cval(x);
    Real* y = val(out);
    for (int i = 0; i < x.size; ++i) y[i] = std::tanh(xv[i]);
    return out;
  }
  Var relu(Var x) {
    Var out = unary(Op::Relu, x);
    const Real* xv = cval(x);
    Real* y = val(out);
    for (int i = 0; i < x.size; ++i) y[i] = xv[i] > Real(0) ? xv[i] : Real(0);
    return out;
  }

  // Elementwise product with a constant vector (dropout masks etc).
  Var mul_const(Var x, std::vector<Real> k) {
    if (static_cast<int>(k.size()) != x.size) throw std::logic_error("mul_const: size mismatch");
    Var out = unary(Op::MulConst, x);
    Node& n = nodes_.back();
    n.cdata = std::move(k);
    const Real* xv = cval(x);
    Real* y = val(out);
    for (int i = 0; i < x.size; ++i) y[i] = xv[i] * n.cdata[i];
    return out;
  }

  // Elementwise sum with a constant vector (score masks; -inf allowed).
  Var add_const(Var x, std::vector<Real> k) {
    if (static_cast<int>(k.size()) != x.size) throw std::logic_error("add_const: size mismatch");
    Var out = unary(Op::AddConst, x);
    Node& n = nodes_.back();
    n.cdata = std::move(k);
    const Real* xv = cval(x);
    Real* y = val(out);
    for (int i = 0; i < x.size; ++i) y[i] = xv[i] + n.cdata[i];
    return out;
  }

  // Sum of scalar vars.
  Var sum(std::span<const Var> xs) {
    if (xs.empty()) return input({Real(0)});
    if (xs.size() == 1) return xs[0];
    Var out = make(Op::SumScalars, 1);
    Node& n = nodes_.back();
    Real acc = 0;
    for (Var x : xs) {
      if (x.size != 1) throw std::logic_error("sum: non-scalar term");
      n.args.push_back(x.id);
      acc += *cval(x);
    }
    *val(out) = acc;
    return out;
  }

  // log sum exp of scalar vars.
  Var logsumexp(std::span<const Var> xs) {
    if (xs.empty()) return input({kNegInf});
    if (xs.size() == 1) return xs[0];
    Var out = make(Op::LseScalars, 1);
    Node& n = nodes_.back();
    Real m = kNegInf;
    for (Var x : xs) {
      if (x.size != 1) throw std::logic_error("logsumexp: non-scalar term");
      n.args.push_back(x.id);
      m = std::max(m, *cval(x));
    }
    Real acc = 0;
    if (std::isinf(m) && m < 0) {
      *val(out) = kNegInf;
    } else {
      for (Var x : xs) acc += std::exp(*cval(x) - m);
      *val(out) = m + std::log(acc);
    }
    return out;
  }

  // log sum exp over the components of one var.
  Var logsumexp_vec(Var x) {
    Var out = make(Op::LseVec, 1);
    nodes_.back().a = x.id;
    const Real* xv = cval(x);
    Real m = kNegInf;
    for (int i = 0; i < x.size; ++i) m = std::max(m, xv[i]);
    if (std::isinf(m) && m < 0) {
      *val(out) = kNegInf;
    } else {
      Real acc = 0;
      for (int i = 0; i < x.size; ++i) acc += std::exp(xv[i] - m);
      *val(out) = m + std::log(acc);
    }
    return out;
  }

  // Binary cross entropy on a logit: -label*log(s(z)) - (1-label)*log(1-s(z)).
  Var bce_with_logit(Var z, Real label) {
    if (z.size != 1) throw std::logic_error("bce_with_logit: logit must be scalar");
    Var out = make(Op::BceLogit, 1);
    Node& n = nodes_.back();
    n.a = z.id;
    n.x0 = label;
    Real zv = *cval(z);
    *val(out) = softplus(zv) - label * zv;
    return out;
  }

  // One linear-chain forward step: out[j] = lse_i(prev[i] + trans[i,j] + mask[i*T+j]).
  Var crf_step(Var prev, TensorT<Real>& trans, const std::vector<Real>& mask) {
    const int T = prev.size;
    if (trans.rows != T || trans.cols != T || static_cast<int>(mask.size()) != T * T)
      throw std::logic_error("crf_step: dimension mismatch");
    Var out = make(Op::CrfStep, T);
    Node& n = nodes_.back();
    n.a = prev.id;
    n.pa = &trans;
    n.cdata = mask;
    const Real* pv = cval(prev);
    Real* y = val(out);
    for (int j = 0; j < T; ++j) {
      Real m = kNegInf;
      for (int i = 0; i < T; ++i)
        m = std::max(m, pv[i] + trans.value[i * T + j] + mask[i * T + j]);
      if (std::isinf(m) && m < 0) {
        y[j] = kNegInf;
        continue;
      }
      Real acc = 0;
      for (int i = 0; i < T; ++i)
        acc += std::exp(pv[i] + trans.value[i * T + j] + mask[i * T + j] - m);
      y[j] = m + std::log(acc);
    }
    return out;
  }

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every upstream
  // node and parameter tensor. Visits each node exactly once, newest first.
  void backward(Var root) {
    if (root.size != 1) throw std::logic_error("backward: root must be scalar");
    grads_.assign(vals_.size(), Real(0));
    grads_[node(root).off] = Real(1);
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      const Node& n = nodes_[id];
      const Real* g = grads_.data() + n.off;
      bool any = false;
      for (int i = 0; i < n.size && !any; ++i) any = g[i] != Real(0);
      if (!any) continue;
      backward_node(n, g);
    }
  }

 private:
  enum class Op : uint8_t {
    Input, Param, Lookup, Affine, ParamEntry, Add, Sub, Mul, Concat, Slice,
    Sigmoid, Tanh, Relu, MulConst, AddConst, SumScalars, LseScalars, LseVec,
    BceLogit, CrfStep,
  };

  struct Node {
    Op op;
    int32_t size = 0;
    size_t off = 0;
    int32_t a = -1;
    int32_t b = -1;
    int32_t i0 = 0;
    Real x0 = 0;
    TensorT<Real>* pa = nullptr;
    TensorT<Real>* pb = nullptr;
    std::vector<int32_t> args;
    std::vector<Real> cdata;
  };

  std::vector<Node> nodes_;
  std::vector<Real> vals_;
  std::vector<Real> grads_;

  const Node& node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
      throw std::logic_error("stale or invalid var");
    return nodes_[v.id];
  }
  Real* val(Var v) { return vals_.data() + nodes_[v.id].off; }
  const Real* cval(Var v) const { return vals_.data() + nodes_[v.id].off; }

  Var make(Op op, int size) { return make_var(op, size); }
  Var make_var(Op op, int size) {
    Node n;
    n.op = op;
    n.size = size;
    n.off = vals_.size();
    vals_.resize(vals_.size() + size, Real(0));
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1), size};
  }

  Var unary(Op op, Var x) {
    Var out = make(op, x.size);
    nodes_.back().a = x.id;
    return out;
  }
  Var binary(Op op, Var a, Var b) {
    if (a.size != b.size) throw std::logic_error("elementwise op: size mismatch");
    Var out = make(op, a.size);
    Node& n = nodes_.back();
    n.a = a.id;
    n.b = b.id;
    const Real* av = cval(a);
    const Real* bv = cval(b);
    Real* y = val(out);
    switch (op) {
      case Op::Add: for (int i = 0; i < a.size; ++i) y[i] = av[i] + bv[i]; break;
      case Op::Sub: for (int i = 0; i < a.size; ++i) y[i] = av[i] - bv[i]; break;
      case Op::Mul: for (int i = 0; i < a.size; ++i) y[i] = av[i] * bv[i]; break;
      default: throw std::logic_error("not a binary op");
    }
    return out;
  }

  Real* ngrad(int32_t id) { return grads_.data() + nodes_[id].off; }
  const Real* nval(int32_t id) const { return vals_.data() + nodes_[id].off; }

  void backward_node(const Node& n, const Real* g) {
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Param: {
        for (int i = 0; i < n.size; ++i) n.pa->grad[i] += g[i];
        break;
      }
      case Op::Lookup: {
        Real* tg = n.pa->grad.data() + static_cast<size_t>(n.i0) * n.pa->cols;
        for (int i = 0; i < n.size; ++i) tg[i] += g[i];
        break;
      }
      case Op::Affine: {
        TensorT<Real>& W = *n.pa;
        TensorT<Real>& b = *n.pb;
        const Real* xv = nval(n.a);
        Real* xg = ngrad(n.a);
        for (int r = 0; r < W.rows; ++r) {
          Real gr = g[r];
          if (gr == Real(0)) continue;
          b.grad[r] += gr;
          Real* wgr = W.grad.data() + static_cast<size_t>(r) * W.cols;
          const Real* wvr = W.value.data() + static_cast<size_t>(r) * W.cols;
          for (int c = 0; c < W.cols; ++c) {
            wgr[c] += gr * xv[c];
            xg[c] += gr * wvr[c];
          }
        }
        break;
      }
      case Op::ParamEntry:
        n.pa->grad[n.i0] += g[0];
        break;
      case Op::Add: {
        Real* ag = ngrad(n.a);
        Real* bg = ngrad(n.b);
        for (int i = 0; i < n.size; ++i) {
          ag[i] += g[i];
          bg[i] += g[i];
        }
        break;
      }
      case Op::Sub: {
        Real* ag = ngrad(n.a);
        Real* bg = ngrad(n.b);
        for (int i = 0; i < n.size; ++i) {
          ag[i] += g[i];
          bg[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const Real* av = nval(n.a);
        const Real* bv = nval(n.b);
        Real* ag = ngrad(n.a);
        Real* bg = ngrad(n.b);
        for (int i = 0; i < n.size; ++i) {
          ag[i] += g[i] * bv[i];
          bg[i] += g[i] * av[i];
        }
        break;
      }
      case Op::Concat: {
        int off = 0;
        for (int32_t id : n.args) {
          Real* pg = ngrad(id);
          int sz = nodes_[id].size;
          for (int i = 0; i < sz; ++i) pg[i] += g[off + i];
          off += sz;
        }
        break;
      }
      case Op::Slice: {
        Real* xg = ngrad(n.a) + n.i0;
        for (int i = 0; i < n.size; ++i) xg[i] += g[i];
        break;
      }
      case Op::Sigmoid: {
        const Real* y = vals_.data() + n.off;
        Real* xg = ngrad(n.a);
        for (int i = 0; i < n.size; ++i) xg[i] += g[i] * y[i] * (Real(1) - y[i]);
        break;
      }
      case Op::Tanh: {
        const Real* y = vals_.data() + n.off;
        Real* xg = ngrad(n.a);
        for (int i = 0; i < n.size; ++i) xg[i] += g[i] * (Real(1) - y[i] * y[i]);
        break;
      }
      case Op::Relu: {
        const Real* xv = nval(n.a);
        Real* xg = ngrad(n.a);
        for (int i = 0; i < n.size; ++i)
          if (xv[i] > Real(0)) xg[i] += g[i];
        break;
      }
      case Op::MulConst: {
        Real* xg = ngrad(n.a);
        for (int i = 0; i < n.size; ++i) xg[i] += g[i] * n.cdata[i];
        break;
      }
      case Op::AddConst: {
        Real* xg = ngrad(n.a);
        for (int i = 0; i < n.size; ++i) xg[i] += g[i];
        break;
      }
      case Op::SumScalars: {
        for (int32_t id : n.args) *ngrad(id) += g[0];
        break;
      }
      case Op::LseScalars: {
        Real out = vals_[n.off];
        if (std::isinf(out)) break;
        for (int32_t id : n.args) *ngrad(id) += g[0] * std::exp(*nval(id) - out);
        break;
      }
      case Op::LseVec: {
        Real out = vals_[n.off];
        if (std::isinf(out)) break;
        const Real* xv = nval(n.a);
        Real* xg = ngrad(n.a);
        int sz = nodes_[n.a].size;
        for (int i = 0; i < sz; ++i) xg[i] += g[0] * std::exp(xv[i] - out);
        break;
      }
      case Op::BceLogit: {
        Real zv = *nval(n.a);
        *ngrad(n.a) += g[0] * (stable_sigmoid(zv) - n.x0);
        break;
      }
      case Op::CrfStep: {
        const int T = n.size;
        const Real* pv = nval(n.a);
        Real* pg = ngrad(n.a);
        const Real* y = vals_.data() + n.off;
        TensorT<Real>& trans = *n.pa;
        for (int j = 0; j < T; ++j) {
          if (g[j] == Real(0) || std::isinf(y[j])) continue;
          for (int i = 0; i < T; ++i) {
            Real term = pv[i] + trans.value[i * T + j] + n.cdata[i * T + j];
            if (std::isinf(term)) continue;
            Real w = std::exp(term - y[j]) * g[j];
            pg[i] += w;
            trans.grad[i * T + j] += w;
          }
        }
        break;
      }
    }
  }
};

}  // namespace dner
