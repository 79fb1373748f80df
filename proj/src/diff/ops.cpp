#include "dvbf/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <sstream>

#include "dvbf/diff/kernels.hpp"

namespace dvbf::diff {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

template <typename T>
bool tracking(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void record(Tensor<T>& out, std::function<void()> fn) {
  out.set_requires_grad(true);
  Tape<T>::active()->record(std::move(fn));
}

template <typename T, typename F, typename DF>
Tensor<T> unary(const Tensor<T>& a, F f, DF df) {
  Tensor<T> out(a.shape());
  const std::size_t n = a.numel();
  const T* x = a.data();
  T* y = out.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
  if (tracking({&a})) {
    record(out, [a, out, df]() mutable {
      auto gx = a.grads();
      auto gy = out.grads();
      const T* xv = a.data();
      const T* yv = out.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
    });
  }
  return out;
}

enum class Broadcast { kNone, kScalarA, kScalarB };

template <typename T>
Broadcast broadcast_kind(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.numel() == 1) return Broadcast::kScalarB;
  if (a.numel() == 1) return Broadcast::kScalarA;
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                       to_string(b.shape()));
}

// Elementwise binary op with scalar broadcasting. da/db return the partials
// at (x, y) given output z.
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* name, F f, DA da, DB db) {
  const Broadcast kind = broadcast_kind(a, b, name);
  const Shape& shape = kind == Broadcast::kScalarA ? b.shape() : a.shape();
  Tensor<T> out(shape);
  const std::size_t n = out.numel();
  const std::size_t sa = kind == Broadcast::kScalarA ? 0 : 1;
  const std::size_t sb = kind == Broadcast::kScalarB ? 0 : 1;
  const T* x = a.data();
  const T* y = b.data();
  T* z = out.data();
  for (std::size_t i = 0; i < n; ++i) z[i] = f(x[i * sa], y[i * sb]);
  if (tracking({&a, &b})) {
    record(out, [a, b, out, sa, sb, da, db]() mutable {
      const T* xv = a.data();
      const T* yv = b.data();
      const T* zv = out.data();
      auto g = out.grads();
      if (a.requires_grad()) {
        auto ga = a.grads();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i * sa] += g[i] * da(xv[i * sa], yv[i * sb], zv[i]);
      }
      if (b.requires_grad()) {
        auto gb = b.grads();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i * sb] += g[i] * db(xv[i * sa], yv[i * sb], zv[i]);
      }
    });
  }
  return out;
}

std::size_t row_size(const Shape& shape) { return numel(shape) / shape[0]; }

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out(Shape{m, n});
  kernels::active::gemm_nn(a.data(), b.data(), out.data(), m, k, n, false);
  if (tracking({&a, &b})) {
    record(out, [a, b, out, m, k, n]() mutable {
      const T* g = out.grads().data();
      if (a.requires_grad()) kernels::active::gemm_nt(g, b.data(), a.grads().data(), m, n, k);
      if (b.requires_grad()) kernels::active::gemm_tn(a.data(), g, b.grads().data(), m, k, n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.rank() < 2 || b.rank() != 1 || b.dim(0) != x.dim(1)) {
    throw DimensionError("add_bias: bias " + to_string(b.shape()) + " does not match axis 1 of " +
                         to_string(x.shape()));
  }
  const std::size_t outer = x.dim(0), channels = x.dim(1);
  const std::size_t inner = x.numel() / (outer * channels);
  Tensor<T> out(x.shape());
  const T* xv = x.data();
  const T* bv = b.data();
  T* y = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (o * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) y[base + i] = xv[base + i] + bv[c];
    }
  if (tracking({&x, &b})) {
    record(out, [x, b, out, outer, channels, inner]() mutable {
      auto g = out.grads();
      if (x.requires_grad()) {
        auto gx = x.grads();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grads();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (o * channels + c) * inner;
            T acc{0};
            for (std::size_t i = 0; i < inner; ++i) acc += g[base + i];
            gb[c] += acc;
          }
      }
    });
  }
  return out;
}

namespace {

struct ConvShapes {
  bool batched;
  kernels::ConvGeometry geom;
};

template <typename T>
ConvShapes conv_shapes(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride,
                       bool transpose) {
  const char* name = transpose ? "conv2d_transpose" : "conv2d";
  if (stride == 0) throw DimensionError(std::string(name) + ": stride must be positive");
  if (input.rank() != 3 && input.rank() != 4) {
    throw DimensionError(std::string(name) + ": input must be [c x h x w] or [n x c x h x w], got " +
                         to_string(input.shape()));
  }
  if (kernels.rank() != 4 || kernels.dim(2) % 2 == 0 || kernels.dim(3) % 2 == 0) {
    throw DimensionError(std::string(name) + ": kernels must be [c_out x c_in x k x k] with odd k, got " +
                         to_string(kernels.shape()));
  }
  const bool batched = input.rank() == 4;
  const std::size_t off = batched ? 1 : 0;
  const std::size_t n = batched ? input.dim(0) : 1;
  const std::size_t c = input.dim(off), h = input.dim(off + 1), w = input.dim(off + 2);
  const std::size_t expected = transpose ? kernels.dim(0) : kernels.dim(1);
  if (c != expected) {
    throw DimensionError(std::string(name) + ": input " + to_string(input.shape()) +
                         " has channel count incompatible with kernels " + to_string(kernels.shape()));
  }
  if (!transpose) {
    return {batched, kernels::same_padding(n, c, h, w, kernels.dim(0), kernels.dim(2), kernels.dim(3), stride)};
  }
  // Forward conv that this op is the adjoint of: [c_in x h*s x w*s] -> [c_out x h x w].
  return {batched, kernels::same_padding(n, kernels.dim(1), h * stride, w * stride, kernels.dim(0),
                                         kernels.dim(2), kernels.dim(3), stride)};
}

Shape conv_shape(bool batched, std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return batched ? Shape{n, c, h, w} : Shape{c, h, w};
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride) {
  const auto [batched, g] = conv_shapes(input, kernels, stride, false);
  Tensor<T> out(conv_shape(batched, g.batch, g.out_channels, g.out_h, g.out_w));
  kernels::active::conv2d_forward(g, input.data(), kernels.data(), out.data());
  if (tracking({&input, &kernels})) {
    record(out, [input, kernels, out, g = g]() mutable {
      const T* gy = out.grads().data();
      if (input.requires_grad()) kernels::active::conv2d_backward_input(g, gy, kernels.data(), input.grads().data());
      if (kernels.requires_grad()) kernels::active::conv2d_backward_kernel(g, input.data(), gy, kernels.grads().data());
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride) {
  const auto [batched, g] = conv_shapes(input, kernels, stride, true);
  Tensor<T> out(conv_shape(batched, g.batch, g.in_channels, g.in_h, g.in_w));
  kernels::active::conv2d_backward_input(g, input.data(), kernels.data(), out.data());
  if (tracking({&input, &kernels})) {
    record(out, [input, kernels, out, g = g]() mutable {
      const T* gy = out.grads().data();
      if (input.requires_grad()) {
        std::vector<T> tmp(input.numel());
        kernels::active::conv2d_forward(g, gy, kernels.data(), tmp.data());
        auto gx = input.grads();
        for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
      }
      if (kernels.requires_grad()) kernels::active::conv2d_backward_kernel(g, gy, input.data(), kernels.grads().data());
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T) { return T{1}; },
                [](T, T, T) { return T{1}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T) { return T{1}; },
                [](T, T, T) { return T{-1}; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
                [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, "div", [](T x, T y) { return x / y; }, [](T, T y, T) { return T{1} / y; },
                [](T, T y, T z) { return -z / y; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary(a, [offset](T x) { return x + offset; }, [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T{-1});
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary(a, [](T x) { return x > T{0} ? x : T{0}; }, [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      a,
      [](T x) {
        if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
        const T e = std::exp(x);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x))); },
      [](T x, T) {
        if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
        const T e = std::exp(x);
        return e / (T{1} + e);
      });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  for (T v : a.values()) {
    if (!(v > T{0})) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T{2} * x; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  for (T v : a.values()) {
    if (v < T{0}) throw DomainError("sqrt of negative value " + std::to_string(v));
  }
  return unary(a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T{0.5} / y; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc{0};
  for (T v : a.values()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (tracking({&a})) {
    record(out, [a, out]() mutable {
      const T g = out.grads()[0];
      for (T& ga : a.grads()) ga += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  if (a.rank() != 2) throw DimensionError("softmax_rows: expected a matrix, got " + to_string(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor<T> out(a.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.data() + r * cols;
    T* y = out.data() + r * cols;
    const T mx = *std::max_element(x, x + cols);
    T total{0};
    for (std::size_t c = 0; c < cols; ++c) total += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
  }
  if (tracking({&a})) {
    record(out, [a, out, rows, cols]() mutable {
      auto g = out.grads();
      auto gx = a.grads();
      const T* y = out.data();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot{0};
        for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batched_matvec(const Tensor<T>& m, const Tensor<T>& v) {
  if (m.rank() != 2 || v.rank() != 2 || m.dim(0) != v.dim(0) || m.dim(1) % v.dim(1) != 0) {
    throw DimensionError("batched_matvec: incompatible shapes " + to_string(m.shape()) + " and " +
                         to_string(v.shape()));
  }
  const std::size_t n = m.dim(0), cols = v.dim(1), rows = m.dim(1) / cols;
  Tensor<T> out(Shape{n, rows});
  for (std::size_t b = 0; b < n; ++b) {
    const T* mb = m.data() + b * rows * cols;
    const T* vb = v.data() + b * cols;
    T* y = out.data() + b * rows;
    for (std::size_t r = 0; r < rows; ++r) {
      T acc{0};
      for (std::size_t c = 0; c < cols; ++c) acc += mb[r * cols + c] * vb[c];
      y[r] = acc;
    }
  }
  if (tracking({&m, &v})) {
    record(out, [m, v, out, n, rows, cols]() mutable {
      const T* g = out.grads().data();
      for (std::size_t b = 0; b < n; ++b) {
        const T* gb = g + b * rows;
        if (m.requires_grad()) {
          T* gm = m.grads().data() + b * rows * cols;
          const T* vb = v.data() + b * cols;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += gb[r] * vb[c];
        }
        if (v.requires_grad()) {
          T* gv = v.grads().data() + b * cols;
          const T* mb = m.data() + b * rows * cols;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gv[c] += gb[r] * mb[r * cols + c];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(a.values().begin(), a.values().end()));
  if (tracking({&a})) {
    record(out, [a, out]() mutable {
      auto g = out.grads();
      auto ga = a.grads();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + to_string(a.shape()));
  }
  Shape shape = a.shape();
  shape[0] = end - begin;
  const std::size_t rs = row_size(a.shape());
  Tensor<T> out(shape, std::vector<T>(a.data() + begin * rs, a.data() + end * rs));
  if (tracking({&a})) {
    record(out, [a, out, begin, rs]() mutable {
      auto g = out.grads();
      T* ga = a.grads().data() + begin * rs;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Shape shape = parts[0].shape();
  const std::size_t rs = row_size(shape);
  std::size_t rows = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || row_size(p.shape()) != rs ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw DimensionError("concat_rows: part " + to_string(p.shape()) + " incompatible with " +
                           to_string(shape));
    }
    rows += p.dim(0);
    any_grad = any_grad || p.requires_grad();
  }
  shape[0] = rows;
  Tensor<T> out(shape);
  T* y = out.data();
  for (const auto& p : parts) y = std::copy(p.values().begin(), p.values().end(), y);
  if (any_grad && Tape<T>::active() != nullptr) {
    record(out, [parts, out]() mutable {
      const T* g = out.grads().data();
      for (auto& p : parts) {
        if (p.requires_grad()) {
          auto gp = p.grads();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[i];
        }
        g += p.numel();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  if (a.rank() != 2 || begin >= end || end > a.dim(1)) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + to_string(a.shape()));
  }
  const std::size_t rows = a.dim(0), cols = a.dim(1), width = end - begin;
  Tensor<T> out(Shape{rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(a.data() + r * cols + begin, width, out.data() + r * width);
  if (tracking({&a})) {
    record(out, [a, out, rows, cols, begin, width]() mutable {
      const T* g = out.grads().data();
      T* ga = a.grads().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c) ga[r * cols + begin + c] += g[r * width + c];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts[0].dim(0);
  std::size_t cols = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) {
      throw DimensionError("concat_cols: part " + to_string(p.shape()) + " has wrong row count, expected " +
                           std::to_string(rows));
    }
    cols += p.dim(1);
    any_grad = any_grad || p.requires_grad();
  }
  Tensor<T> out(Shape{rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(p.data() + r * w, w, out.data() + r * cols + offset);
    offset += w;
  }
  if (any_grad && Tape<T>::active() != nullptr) {
    record(out, [parts, out, rows, cols]() mutable {
      const T* g = out.grads().data();
      std::size_t off = 0;
      for (auto& p : parts) {
        const std::size_t w = p.dim(1);
        if (p.requires_grad()) {
          T* gp = p.grads().data();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * cols + off + c];
        }
        off += w;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sample_reparam(const Tensor<T>& mean, const Tensor<T>& variance, const Tensor<T>& noise) {
  if (mean.shape() != variance.shape() || mean.shape() != noise.shape()) {
    throw DimensionError("sample_reparam: mean " + to_string(mean.shape()) + ", variance " +
                         to_string(variance.shape()) + " and noise " + to_string(noise.shape()) +
                         " must agree");
  }
  const bool differentiating = tracking({&mean, &variance});
  for (T v : variance.values()) {
    if (v < T{0} || (differentiating && v == T{0})) {
      throw DomainError("sample_reparam: variance must be positive, got " + std::to_string(v));
    }
  }
  Tensor<T> out(mean.shape());
  const std::size_t n = out.numel();
  std::vector<T> sd(n);
  for (std::size_t i = 0; i < n; ++i) {
    sd[i] = std::sqrt(variance[i]);
    out[i] = mean[i] + sd[i] * noise[i];
  }
  if (differentiating) {
    record(out, [mean, variance, noise, out, sd = std::move(sd)]() mutable {
      auto g = out.grads();
      if (mean.requires_grad()) {
        auto gm = mean.grads();
        for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
      }
      if (variance.requires_grad()) {
        auto gv = variance.grads();
        for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i] * noise[i] / (T{2} * sd[i]);
      }
    });
  }
  return out;
}

template <typename T>
bool all_finite(const Tensor<T>& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](T v) { return std::isfinite(v); });
}

#define DVBF_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t);                    \
  template Tensor<T> conv2d_transpose(const Tensor<T>&, const Tensor<T>&, std::size_t);          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> neg(const Tensor<T>&);                                                      \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                     \
  template Tensor<T> softplus(const Tensor<T>&);                                                 \
  template Tensor<T> exp(const Tensor<T>&);                                                      \
  template Tensor<T> log(const Tensor<T>&);                                                      \
  template Tensor<T> square(const Tensor<T>&);                                                   \
  template Tensor<T> sqrt(const Tensor<T>&);                                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                             \
  template Tensor<T> batched_matvec(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> sample_reparam(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template bool all_finite(const Tensor<T>&);

DVBF_INSTANTIATE_OPS(float)
DVBF_INSTANTIATE_OPS(double)

#undef DVBF_INSTANTIATE_OPS

}  // namespace dvbf::diff
