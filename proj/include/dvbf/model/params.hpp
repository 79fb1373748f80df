#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dvbf/diff/ops.hpp"

namespace dvbf::model {

using diff::Shape;
using diff::Tensor;

// Ordered, named trainable tensors. Every tensor added here requires grad.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  // Throws ContractError on a duplicate name.
  Tensor<T> add(const std::string& name, Tensor<T> tensor);
  bool has(const std::string& name) const;
  const Tensor<T>& get(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  // Entries whose name starts with prefix.
  std::vector<Entry> group(const std::string& prefix) const;

  void zero_grad() const;

 private:
  std::vector<Entry> entries_;
};

template <typename T>
struct Dense {
  Tensor<T> w;  // [in x out]
  Tensor<T> b;  // [out]
  Tensor<T> operator()(const Tensor<T>& x) const { return diff::add_bias(diff::matmul(x, w), b); }
  std::size_t in() const { return w.dim(0); }
  std::size_t out() const { return w.dim(1); }
};

// 3x3 same-padded convolution with bias, stride 2.
template <typename T>
struct Conv {
  Tensor<T> kernels;  // [out x in x 3 x 3]
  Tensor<T> b;
  std::size_t stride = 2;
  Tensor<T> operator()(const Tensor<T>& x) const {
    return diff::add_bias(diff::conv2d(x, kernels, stride), b);
  }
};

// Transposed counterpart, upsampling by stride.
template <typename T>
struct ConvT {
  Tensor<T> kernels;  // [in x out x 3 x 3]
  Tensor<T> b;
  std::size_t stride = 2;
  Tensor<T> operator()(const Tensor<T>& x) const {
    return diff::add_bias(diff::conv2d_transpose(x, kernels, stride), b);
  }
};

// Glorot-uniform weights, zero bias.
template <typename T>
Dense<T> make_dense(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                    std::mt19937_64& rng, double gain = 1.0);
// He-uniform kernels, zero bias.
template <typename T>
Conv<T> make_conv(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                  std::size_t stride, std::mt19937_64& rng);
template <typename T>
ConvT<T> make_conv_transpose(ParamSet<T>& params, const std::string& name, std::size_t in,
                             std::size_t out, std::size_t stride, std::mt19937_64& rng);

}  // namespace dvbf::model
