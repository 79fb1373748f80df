#pragma once

#include "dvbf/diff/ops.hpp"

namespace dvbf::model {

using diff::Tensor;

// Diagonal Gaussian, rows are independent batch entries.
template <typename T>
struct DiagGaussian {
  Tensor<T> mean;
  Tensor<T> variance;
};

template <typename T>
DiagGaussian<T> standard_normal(diff::Shape shape) {
  return {Tensor<T>(shape), Tensor<T>::filled(shape, T{1})};
}

// softplus(raw) + floor
template <typename T>
Tensor<T> positive_variance(const Tensor<T>& raw, T floor) {
  return diff::add_scalar(diff::softplus(raw), floor);
}

// Renormalized product of two Gaussian densities:
// var = (1/v_e + 1/v_t)^-1, mean = var * (m_e/v_e + m_t/v_t).
// Throws DomainError on non-positive variances.
template <typename T>
DiagGaussian<T> fuse(const DiagGaussian<T>& a, const DiagGaussian<T>& b);

}  // namespace dvbf::model
