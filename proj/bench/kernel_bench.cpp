// Serial reference kernels against the OpenMP kernels at network-like sizes.

#include <benchmark/benchmark.h>

#include <random>

#include "hdrv/kernels.hpp"
#include "hdrv/reference_kernels.hpp"

using namespace hdrv;

namespace {

Tensor random(int c, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(c, h, w);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

struct ConvCase {
  Tensor input, offsets, weight, bias, grad_out;
  kernels::ConvGeometry g{3, 1, 1};

  explicit ConvCase(benchmark::State& state) {
    const int ch = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
    input = random(ch, side, side, 1);
    offsets = random(18, side, side, 2, -2.0, 2.0);
    weight = random(ch, ch * 9, 1, 3, -0.1, 0.1);
    bias = random(ch, 1, 1, 4);
    grad_out = random(ch, side, side, 5);
  }
};

template <auto Fn>
void conv_forward(benchmark::State& state) {
  ConvCase c(state);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(c.input, c.weight, &c.bias, c.g));
}

template <auto Fn>
void conv_backward(benchmark::State& state) {
  ConvCase c(state);
  Tensor gi = Tensor::like(c.input), gw = Tensor::like(c.weight), gb = Tensor::like(c.bias);
  for (auto _ : state) {
    Fn(c.input, c.weight, c.grad_out, c.g, &gi, &gw, &gb);
    benchmark::DoNotOptimize(gw.values().data());
  }
}

template <auto Fn>
void deform_forward(benchmark::State& state) {
  ConvCase c(state);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(c.input, c.offsets, c.weight, &c.bias, c.g));
}

template <auto Fn>
void deform_backward(benchmark::State& state) {
  ConvCase c(state);
  Tensor gi = Tensor::like(c.input), go = Tensor::like(c.offsets), gw = Tensor::like(c.weight),
         gb = Tensor::like(c.bias);
  for (auto _ : state) {
    Fn(c.input, c.offsets, c.weight, c.grad_out, c.g, &gi, &go, &gw, &gb);
    benchmark::DoNotOptimize(gw.values().data());
  }
}

template <auto Fn>
void warp_forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor image = random(3, side, side, 6), flow = random(2, side, side, 7, -4.0, 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(image, flow));
}

template <auto Fn>
void warp_backward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor image = random(3, side, side, 6), flow = random(2, side, side, 7, -4.0, 4.0);
  const Tensor grad = random(3, side, side, 8);
  Tensor gi = Tensor::like(image), gf = Tensor::like(flow);
  for (auto _ : state) {
    Fn(image, flow, grad, &gi, &gf);
    benchmark::DoNotOptimize(gf.values().data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(conv_forward<reference::conv2d_forward>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(conv_forward<kernels::conv2d_forward>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(conv_backward<reference::conv2d_backward>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(conv_backward<kernels::conv2d_backward>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(deform_forward<reference::deform_conv2d_forward>)->Name("deform_forward/reference")->Apply(conv_args);
BENCHMARK(deform_forward<kernels::deform_conv2d_forward>)->Name("deform_forward/parallel")->Apply(conv_args);
BENCHMARK(deform_backward<reference::deform_conv2d_backward>)->Name("deform_backward/reference")->Apply(conv_args);
BENCHMARK(deform_backward<kernels::deform_conv2d_backward>)->Name("deform_backward/parallel")->Apply(conv_args);
BENCHMARK(warp_forward<reference::backward_warp_forward>)->Name("warp_forward/reference")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(warp_forward<kernels::backward_warp_forward>)->Name("warp_forward/parallel")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(warp_backward<reference::backward_warp_backward>)->Name("warp_backward/reference")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(warp_backward<kernels::backward_warp_backward>)->Name("warp_backward/parallel")->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
