#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dvbf/errors.hpp"

namespace dvbf::diff {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape);

// Reference-counted dense row-major array. Copies share storage, the way
// framework tensors do; use clone() for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : s_(std::make_shared<Storage>()) {
    check_shape(shape);
    s_->value.assign(diff::numel(shape), T{0});
    s_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> values) : s_(std::make_shared<Storage>()) {
    check_shape(shape);
    if (values.size() != diff::numel(shape)) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + to_string(shape));
    }
    s_->shape = std::move(shape);
    s_->value = std::move(values);
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  static Tensor filled(Shape shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.s_->value.begin(), t.s_->value.end(), v);
    return t;
  }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t i) const { return s_->shape.at(i); }
  std::size_t numel() const { return s_->value.size(); }

  std::span<T> values() { return s_->value; }
  std::span<const T> values() const { return s_->value; }
  T* data() { return s_->value.data(); }
  const T* data() const { return s_->value.data(); }

  T& operator[](std::size_t i) { return s_->value[i]; }
  const T& operator[](std::size_t i) const { return s_->value[i]; }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
    return s_->value[0];
  }

  bool requires_grad() const { return s_ && s_->requires_grad; }

  // Enabling allocates a zeroed accumulator of identical shape.
  Tensor& set_requires_grad(bool on) {
    s_->requires_grad = on;
    if (on && s_->grad.size() != s_->value.size()) s_->grad.assign(s_->value.size(), T{0});
    return *this;
  }

  bool has_grad() const { return s_ && !s_->grad.empty(); }
  // Gradient accumulators are shared with every handle to the same storage,
  // so they stay writable through const handles (backward closures hold
  // const copies of their inputs).
  std::span<T> grads() const { return s_->grad; }

  void zero_grad() const { std::fill(s_->grad.begin(), s_->grad.end(), T{0}); }

  Tensor clone() const {
    Tensor out;
    out.s_ = std::make_shared<Storage>();
    out.s_->shape = s_->shape;
    out.s_->value = s_->value;
    return out;
  }

  // Same storage identity.
  bool same(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
    for (auto e : shape) {
      if (e == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    }
  }

  std::shared_ptr<Storage> s_;
};

}  // namespace dvbf::diff
