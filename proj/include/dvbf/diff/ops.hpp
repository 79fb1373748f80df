#pragma once

// Differentiable primitives. Each op computes its value eagerly and, when a
// tape is active and some input requires a gradient, records the matching
// vector-Jacobian product. Broadcasting is limited to scalar-with-tensor in
// the binary elementwise ops, plus the explicit add_bias.

#include <cstddef>
#include <vector>

#include "dvbf/diff/tape.hpp"
#include "dvbf/diff/tensor.hpp"

namespace dvbf::diff {

// [m x k] * [k x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[N x C x ...] + b[C], bias broadcast over the leading and trailing axes.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b);

// Cross-correlation with 3x3 (or any odd) kernels and zero same-padding.
// input [c_in x h x w] or [N x c_in x h x w]; kernels [c_out x c_in x kh x kw].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride);

// Adjoint of conv2d with the same kernels: input [.. x c_out x h' x w'] maps to
// [.. x c_in x h'*stride x w'*stride].
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& kernels,
                           std::size_t stride);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

// Multiplication / addition by a constant that is not differentiated.
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);

template <typename T> Tensor<T> neg(const Tensor<T>& a);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> tanh(const Tensor<T>& a);
// max(x, 0) + log1p(exp(-|x|))
template <typename T> Tensor<T> softplus(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
// Throws DomainError on non-positive entries.
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> sqrt(const Tensor<T>& a);

// Sum of all entries, shape [1].
template <typename T> Tensor<T> sum(const Tensor<T>& a);

// Row-wise softmax of [N x K].
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& a);

// Per-row matrix-vector product: m[N x (r*c)] holds one row-major r x c
// matrix per row, v[N x c]; result [N x r].
template <typename T> Tensor<T> batched_matvec(const Tensor<T>& m, const Tensor<T>& v);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// Slices / concatenation along axis 0 (rows) and along axis 1 of a matrix.
template <typename T> Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

// mean + sqrt(variance) * noise. Gradients reach mean and variance only.
// Zero variance is accepted when nothing is being differentiated.
template <typename T>
Tensor<T> sample_reparam(const Tensor<T>& mean, const Tensor<T>& variance, const Tensor<T>& noise);

template <typename T> bool all_finite(const Tensor<T>& a);

}  // namespace dvbf::diff
