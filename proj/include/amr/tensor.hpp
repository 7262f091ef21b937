#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "amr/common.hpp"

namespace amr {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized on demand, same length as value
  bool requires_grad = false;
};

// Shared-ownership handle over a flat row-major buffer with an optional
// gradient slot. float is the runtime type; double instantiations back the
// finite-difference shadow mode running the same graph code.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = std::move(shape);
    for (int64_t d : t.impl_->shape)
      if (d <= 0) throw DimensionError("tensor extents must be positive");
    t.impl_->value.assign(amr::numel(t.impl_->shape), T(0));
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (static_cast<int64_t>(data.size()) != t.numel())
      throw DimensionError("data length does not match shape");
    t.impl_->value = std::move(data);
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t numel() const { return static_cast<int64_t>(impl_->value.size()); }
  int64_t dim(int i) const { return impl_->shape[i]; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }

  std::vector<T>& value() { return impl_->value; }
  const std::vector<T>& value() const { return impl_->value; }
  T item() const { return impl_->value.at(0); }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  void ensure_grad() {
    if (impl_->grad.size() != impl_->value.size())
      impl_->grad.assign(impl_->value.size(), T(0));
  }
  bool has_grad() const { return impl_->grad.size() == impl_->value.size(); }
  std::vector<T>& grad() {
    ensure_grad();
    return impl_->grad;
  }
  const std::vector<T>& grad() const { return impl_->grad; }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), T(0));
  }

  bool finite() const {
    for (T v : impl_->value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_impl(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Ordered record of executed operations. Each op appends one adjoint step at
// forward time; backward replays the record in exact reverse order. A graph
// is single-shot: backward consumes it until clear() starts a new forward.
template <class T>
class Graph {
 public:
  void record(std::function<void()> adjoint_step) {
    steps_.push_back(std::move(adjoint_step));
  }

  void backward(Tensor<T> loss) {
    if (consumed_) throw StateError("backward called twice without a new forward");
    if (loss.numel() != 1) throw DimensionError("backward expects a scalar loss");
    if (!loss.requires_grad()) throw StateError("loss does not require grad");
    loss.ensure_grad();
    loss.grad()[0] = T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    consumed_ = true;
  }

  void clear() {
    steps_.clear();
    consumed_ = false;
  }

  std::size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
};

// Deterministic 64-bit mix used to derive independent RNG streams.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace amr
