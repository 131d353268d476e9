#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dner {

// A named parameter: flat row-major values with a matrix shape and a
// gradient buffer of the same size. Vectors use cols == 1.
template <typename Real>
struct TensorT {
  std::string name;
  int rows = 0;
  int cols = 1;
  std::vector<Real> value;
  std::vector<Real> grad;

  int size() const { return rows * cols; }
  Real& at(int r, int c) { return value[r * cols + c]; }
  Real at(int r, int c) const { return value[r * cols + c]; }
  void zero_grad() { std::fill(grad.begin(), grad.end(), Real(0)); }
};

// Owns every learnable tensor of a model, in stable registration order.
// Pointers into the store stay valid for its lifetime.
template <typename Real>
class ParamStoreT {
 public:
  TensorT<Real>& add(const std::string& name, int rows, int cols = 1) {
    if (index_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    auto t = std::make_unique<TensorT<Real>>();
    t->name = name;
    t->rows = rows;
    t->cols = cols;
    t->value.assign(static_cast<size_t>(rows) * cols, Real(0));
    t->grad.assign(static_cast<size_t>(rows) * cols, Real(0));
    index_[name] = items_.size();
    items_.push_back(std::move(t));
    return *items_.back();
  }

  TensorT<Real>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("no such parameter: " + name);
    return *items_[it->second];
  }
  const TensorT<Real>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("no such parameter: " + name);
    return *items_[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  size_t count() const { return items_.size(); }
  TensorT<Real>& operator[](size_t i) { return *items_[i]; }
  const TensorT<Real>& operator[](size_t i) const { return *items_[i]; }

  void zero_grad() {
    for (auto& t : items_) t->zero_grad();
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& t : items_) n += t->value.size();
    return n;
  }

  // Copies values (not grads) from another store with identical layout.
  void load_values(const ParamStoreT& other) {
    if (other.count() != count()) throw std::runtime_error("param store layout mismatch");
    for (size_t i = 0; i < items_.size(); ++i) {
      if (other[i].name != items_[i]->name || other[i].value.size() != items_[i]->value.size())
        throw std::runtime_error("param store layout mismatch at " + items_[i]->name);
      items_[i]->value = other[i].value;
    }
  }

 private:
  std::vector<std::unique_ptr<TensorT<Real>>> items_;
  std::unordered_map<std::string, size_t> index_;
};

// Uniform init in [-scale, scale]; the draw order is the tensor's flat order.
template <typename Real>
void init_uniform(TensorT<Real>& t, std::mt19937_64& rng, double scale = 0.1) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Real& v : t.value) v = static_cast<Real>(dist(rng));
}

}  // namespace dner
