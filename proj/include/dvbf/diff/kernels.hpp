#pragma once

// Dense compute kernels behind the differentiable primitives. Each kernel has
// a plain serial reference and an OpenMP variant with the same signature;
// tests hold the two against each other and bench/ times them. Every OpenMP
// loop partitions output elements across threads, so results do not depend
// on the thread count.

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dvbf::kernels {

struct ConvGeometry {
  std::size_t batch;
  std::size_t in_channels, in_h, in_w;
  std::size_t out_channels, out_h, out_w;
  std::size_t kernel_h, kernel_w;
  std::size_t stride;
  std::size_t pad_top, pad_left;
};

// Same-padding geometry: out = ceil(in / stride), surplus padding goes to the
// bottom/right edge.
ConvGeometry same_padding(std::size_t batch, std::size_t in_channels, std::size_t in_h,
                          std::size_t in_w, std::size_t out_channels, std::size_t kernel_h,
                          std::size_t kernel_w, std::size_t stride);

namespace serial {

inline constexpr std::size_t kGemmRows = 4;
inline constexpr std::size_t kGemmCols = 32;

// Rows [row_begin, row_end) of C (+)= A[m x k] * B[k x n]. Full tiles of
// kGemmRows x kGemmCols accumulate in registers; each element sums over p in
// order, so any split on tile boundaries gives identical bits.
template <typename T>
void gemm_nn_rows(const T* a, const T* b, T* c, std::size_t k, std::size_t n, bool accumulate,
                  std::size_t row_begin, std::size_t row_end) {
  constexpr std::size_t MR = kGemmRows, NR = kGemmCols;
  std::size_t i = row_begin;
  for (; i + MR <= row_end; i += MR) {
    std::size_t j = 0;
    for (; j + NR <= n; j += NR) {
      T acc[MR][NR];
      for (std::size_t r = 0; r < MR; ++r)
        for (std::size_t q = 0; q < NR; ++q) acc[r][q] = accumulate ? c[(i + r) * n + j + q] : T{0};
      for (std::size_t p = 0; p < k; ++p) {
        const T* brow = b + p * n + j;
        for (std::size_t r = 0; r < MR; ++r) {
          const T av = a[(i + r) * k + p];
          for (std::size_t q = 0; q < NR; ++q) acc[r][q] += av * brow[q];
        }
      }
      for (std::size_t r = 0; r < MR; ++r)
        for (std::size_t q = 0; q < NR; ++q) c[(i + r) * n + j + q] = acc[r][q];
    }
    if (j < n) {
      for (std::size_t r = 0; r < MR; ++r) {
        T* crow = c + (i + r) * n;
        if (!accumulate) std::fill(crow + j, crow + n, T{0});
        for (std::size_t p = 0; p < k; ++p) {
          const T av = a[(i + r) * k + p];
          const T* brow = b + p * n;
          for (std::size_t q = j; q < n; ++q) crow[q] += av * brow[q];
        }
      }
    }
  }
  for (; i < row_end; ++i) {
    T* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, T{0});
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t q = 0; q < n; ++q) crow[q] += av * brow[q];
    }
  }
}

template <typename T>
std::vector<T> transposed(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t q = 0; q < cols; ++q) t[q * rows + r] = a[r * cols + q];
  return t;
}

// C (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  gemm_nn_rows(a, b, c, k, n, accumulate, 0, m);
}

// C[m x n] += A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t k, std::size_t m, std::size_t n) {
  const auto at = transposed(a, k, m);
  gemm_nn(at.data(), b, c, m, k, n, true);
}

// C[m x k] += A[m x n] * B[k x n]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  const auto bt = transposed(b, k, n);
  gemm_nn(a, bt.data(), c, m, n, k, true);
}

// Patch matrix [c_in*kh*kw x batch*out_plane]; padding reads as zero.
template <typename T>
void im2col_rows(const ConvGeometry& g, const T* x, T* col, std::size_t row_begin, std::size_t row_end) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t ksize = g.kernel_h * g.kernel_w;
  const std::size_t width = g.batch * out_plane;
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const std::size_t ci = r / ksize;
    const std::size_t ky = (r % ksize) / g.kernel_w;
    const std::size_t kx = r % g.kernel_w;
    T* crow = col + r * width;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* xp = x + (n * g.in_channels + ci) * in_plane;
      T* cp = crow + n * out_plane;
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad_top);
        T* cq = cp + oy * g.out_w;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
          std::fill(cq, cq + g.out_w, T{0});
          continue;
        }
        const T* xr = xp + static_cast<std::size_t>(iy) * g.in_w;
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad_left);
          cq[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) ? T{0} : xr[ix];
        }
      }
    }
  }
}

// gx += fold of the patch gradient; planes (n, ci) in [plane_begin, plane_end).
template <typename T>
void col2im_planes(const ConvGeometry& g, const T* col, T* gx, std::size_t plane_begin, std::size_t plane_end) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t ksize = g.kernel_h * g.kernel_w;
  const std::size_t width = g.batch * out_plane;
  for (std::size_t pl = plane_begin; pl < plane_end; ++pl) {
    const std::size_t n = pl / g.in_channels;
    const std::size_t ci = pl % g.in_channels;
    T* xp = gx + pl * in_plane;
    for (std::size_t kk = 0; kk < ksize; ++kk) {
      const std::size_t ky = kk / g.kernel_w, kx = kk % g.kernel_w;
      const T* cp = col + (ci * ksize + kk) * width + n * out_plane;
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        T* xr = xp + static_cast<std::size_t>(iy) * g.in_w;
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          xr[ix] += cp[oy * g.out_w + ox];
        }
      }
    }
  }
}

// [batch x ch x plane] <-> [ch x batch*plane]
template <typename T>
void to_channel_major(const T* src, T* dst, std::size_t batch, std::size_t ch, std::size_t plane) {
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c)
      std::copy(src + (n * ch + c) * plane, src + (n * ch + c + 1) * plane, dst + (c * batch + n) * plane);
}

template <typename T>
void from_channel_major(const T* src, T* dst, std::size_t batch, std::size_t ch, std::size_t plane) {
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c)
      std::copy(src + (c * batch + n) * plane, src + (c * batch + n + 1) * plane, dst + (n * ch + c) * plane);
}

inline std::size_t patch_rows(const ConvGeometry& g) { return g.in_channels * g.kernel_h * g.kernel_w; }
inline std::size_t patch_cols(const ConvGeometry& g) { return g.batch * g.out_h * g.out_w; }

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* kernel, T* y) {
  const std::size_t rows = patch_rows(g), cols = patch_cols(g);
  std::vector<T> col(rows * cols), out(g.out_channels * cols);
  im2col_rows(g, x, col.data(), 0, rows);
  gemm_nn(kernel, col.data(), out.data(), g.out_channels, rows, cols, false);
  from_channel_major(out.data(), y, g.batch, g.out_channels, g.out_h * g.out_w);
}

// gx += adjoint of conv2d_forward applied to gy.
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* gy, const T* kernel, T* gx) {
  const std::size_t rows = patch_rows(g), cols = patch_cols(g);
  std::vector<T> gyc(g.out_channels * cols), col(rows * cols, T{0});
  to_channel_major(gy, gyc.data(), g.batch, g.out_channels, g.out_h * g.out_w);
  gemm_tn(kernel, gyc.data(), col.data(), g.out_channels, rows, cols);
  col2im_planes(g, col.data(), gx, 0, g.batch * g.in_channels);
}

// gk += d<y, gy>/dk for y = conv2d_forward(x, k).
template <typename T>
void conv2d_backward_kernel(const ConvGeometry& g, const T* x, const T* gy, T* gk) {
  const std::size_t rows = patch_rows(g), cols = patch_cols(g);
  std::vector<T> gyc(g.out_channels * cols), col(rows * cols);
  to_channel_major(gy, gyc.data(), g.batch, g.out_channels, g.out_h * g.out_w);
  im2col_rows(g, x, col.data(), 0, rows);
  gemm_nt(gyc.data(), col.data(), gk, g.out_channels, cols, rows);
}

}  // namespace serial

namespace omp {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  const std::size_t tiles = (m + serial::kGemmRows - 1) / serial::kGemmRows;
  const auto jobs = static_cast<std::ptrdiff_t>(tiles);
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (std::ptrdiff_t t = 0; t < jobs; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * serial::kGemmRows;
    serial::gemm_nn_rows(a, b, c, k, n, accumulate, begin, std::min(m, begin + serial::kGemmRows));
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t k, std::size_t m, std::size_t n) {
  const auto at = serial::transposed(a, k, m);
  gemm_nn(at.data(), b, c, m, k, n, true);
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  const auto bt = serial::transposed(b, k, n);
  gemm_nn(a, bt.data(), c, m, n, k, true);
}

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const auto rows = static_cast<std::ptrdiff_t>(serial::patch_rows(g));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    serial::im2col_rows(g, x, col, static_cast<std::size_t>(r), static_cast<std::size_t>(r) + 1);
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* kernel, T* y) {
  const std::size_t rows = serial::patch_rows(g), cols = serial::patch_cols(g);
  std::vector<T> col(rows * cols), out(g.out_channels * cols);
  im2col(g, x, col.data());
  gemm_nn(kernel, col.data(), out.data(), g.out_channels, rows, cols, false);
  serial::from_channel_major(out.data(), y, g.batch, g.out_channels, g.out_h * g.out_w);
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* gy, const T* kernel, T* gx) {
  const std::size_t rows = serial::patch_rows(g), cols = serial::patch_cols(g);
  std::vector<T> gyc(g.out_channels * cols), col(rows * cols, T{0});
  serial::to_channel_major(gy, gyc.data(), g.batch, g.out_channels, g.out_h * g.out_w);
  gemm_tn(kernel, gyc.data(), col.data(), g.out_channels, rows, cols);
  const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.in_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pl = 0; pl < planes; ++pl) {
    serial::col2im_planes(g, col.data(), gx, static_cast<std::size_t>(pl), static_cast<std::size_t>(pl) + 1);
  }
}

template <typename T>
void conv2d_backward_kernel(const ConvGeometry& g, const T* x, const T* gy, T* gk) {
  const std::size_t rows = serial::patch_rows(g), cols = serial::patch_cols(g);
  std::vector<T> gyc(g.out_channels * cols), col(rows * cols);
  serial::to_channel_major(gy, gyc.data(), g.batch, g.out_channels, g.out_h * g.out_w);
  im2col(g, x, col.data());
  gemm_nt(gyc.data(), col.data(), gk, g.out_channels, cols, rows);
}

}  // namespace omp

// The variant used by the differentiable ops.
#ifdef _OPENMP
namespace active = omp;
#else
namespace active = serial;
#endif

}  // namespace dvbf::kernels
