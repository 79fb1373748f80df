// Serial reference vs OpenMP kernels on the shapes that dominate training.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dvbf/diff/kernels.hpp"

namespace k = dvbf::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto kk = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_vec(m * kk, 1), b = random_vec(kk * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::gemm_nn(a.data(), b.data(), c.data(), m, kk, n, false);
    else k::serial::gemm_nn(a.data(), b.data(), c.data(), m, kk, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(2 * m * kk * n));
}

// Encoder layers of the 16x16 pendulum model at batch 16 x 40 frames.
template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto cout = static_cast<std::size_t>(state.range(1));
  const auto size = static_cast<std::size_t>(state.range(2));
  const auto g = k::same_padding(640, cin, size, size, cout, 3, 3, 2);
  const auto x = random_vec(g.batch * cin * size * size, 3);
  const auto w = random_vec(cout * cin * 9, 4);
  std::vector<float> y(g.batch * cout * g.out_h * g.out_w);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::conv2d_forward(g, x.data(), w.data(), y.data());
    else k::serial::conv2d_forward(g, x.data(), w.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto cout = static_cast<std::size_t>(state.range(1));
  const auto size = static_cast<std::size_t>(state.range(2));
  const auto g = k::same_padding(640, cin, size, size, cout, 3, 3, 2);
  const auto x = random_vec(g.batch * cin * size * size, 5);
  const auto w = random_vec(cout * cin * 9, 6);
  const auto gy = random_vec(g.batch * cout * g.out_h * g.out_w, 7);
  std::vector<float> gx(x.size()), gw(w.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::omp::conv2d_backward_input(g, gy.data(), w.data(), gx.data());
      k::omp::conv2d_backward_kernel(g, x.data(), gy.data(), gw.data());
    } else {
      k::serial::conv2d_backward_input(g, gy.data(), w.data(), gx.data());
      k::serial::conv2d_backward_kernel(g, x.data(), gy.data(), gw.data());
    }
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({640, 256, 256})->Args({640, 1024, 256})->Args({16, 256, 16512})->Args({640, 64, 256});
}

void conv_shapes(benchmark::internal::Benchmark* b) { b->Args({1, 4, 16})->Args({4, 8, 8})->Args({8, 16, 4}); }

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Apply(gemm_shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Gemm<true>)->Name("gemm/omp")->Apply(gemm_shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvForward<false>)->Name("conv_fwd/serial")->Apply(conv_shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvForward<true>)->Name("conv_fwd/omp")->Apply(conv_shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_bwd/serial")->Apply(conv_shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_bwd/omp")->Apply(conv_shapes)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
