#pragma once

#include <cmath>
#include <vector>

#include "dner/tensor.hpp"

namespace dner {

// Adam with bias correction. l2 is applied as a coupled gradient term
// l2 * theta on every parameter at each step.
template <typename Real>
class AdamT {
 public:
  AdamT(ParamStoreT<Real>& params, Real lr = Real(0.001), Real l2 = Real(0),
        Real beta1 = Real(0.9), Real beta2 = Real(0.999), Real eps = Real(1e-8))
      : params_(params), lr_(lr), l2_(l2), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params.count());
    v_.resize(params.count());
    for (size_t i = 0; i < params.count(); ++i) {
      m_[i].assign(params[i].size(), Real(0));
      v_[i].assign(params[i].size(), Real(0));
    }
  }

  void step() {
    ++t_;
    Real bc1 = Real(1) - std::pow(beta1_, Real(t_));
    Real bc2 = Real(1) - std::pow(beta2_, Real(t_));
    for (size_t i = 0; i < params_.count(); ++i) {
      TensorT<Real>& p = params_[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (int k = 0; k < p.size(); ++k) {
        Real g = p.grad[k] + l2_ * p.value[k];
        m[k] = beta1_ * m[k] + (Real(1) - beta1_) * g;
        v[k] = beta2_ * v[k] + (Real(1) - beta2_) * g * g;
        Real mhat = m[k] / bc1;
        Real vhat = v[k] / bc2;
        p.value[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  int64_t steps() const { return t_; }
  Real lr() const { return lr_; }
  void set_lr(Real lr) { lr_ = lr; }

 private:
  ParamStoreT<Real>& params_;
  Real lr_;
  Real l2_;
  Real beta1_;
  Real beta2_;
  Real eps_;
  int64_t t_ = 0;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
};

}  // namespace dner
