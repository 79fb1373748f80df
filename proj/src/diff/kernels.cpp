#include "dvbf/diff/kernels.hpp"

namespace dvbf::kernels {

ConvGeometry same_padding(std::size_t batch, std::size_t in_channels, std::size_t in_h,
                          std::size_t in_w, std::size_t out_channels, std::size_t kernel_h,
                          std::size_t kernel_w, std::size_t stride) {
  ConvGeometry g{};
  g.batch = batch;
  g.in_channels = in_channels;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_channels = out_channels;
  g.kernel_h = kernel_h;
  g.kernel_w = kernel_w;
  g.stride = stride;
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const auto total = [stride](std::size_t out, std::size_t k, std::size_t in) -> std::size_t {
    const std::size_t need = (out - 1) * stride + k;
    return need > in ? need - in : 0;
  };
  g.pad_top = total(g.out_h, kernel_h, in_h) / 2;
  g.pad_left = total(g.out_w, kernel_w, in_w) / 2;
  return g;
}

}  // namespace dvbf::kernels
