#include "hdrv/layers.hpp"

#include <cmath>

#include "hdrv/ops.hpp"

namespace hdrv::nn {

Tensor he_init(int out, int fan_in, int kernel_area, std::mt19937_64& rng) {
  // LeakyReLU(0.1) gain.
  const double stddev = std::sqrt(2.0 / (1.0 + 0.01) / (fan_in * kernel_area));
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor w(out, fan_in * kernel_area, 1);
  for (auto& v : w.values()) v = dist(rng);
  return w;
}

Conv2d::Conv2d(ag::ParameterSet& params, const std::string& name, int in_channels,
               int out_channels, std::mt19937_64& rng, int stride, int kernel, Init init,
               bool trainable)
    : geometry_{kernel, stride, kernel / 2}, in_(in_channels), out_(out_channels) {
  Tensor w = init == Init::kZero ? Tensor(out_channels, in_channels * kernel * kernel, 1)
                                 : he_init(out_channels, in_channels, kernel * kernel, rng);
  weight_ = params.add(name + ".weight", std::move(w), trainable);
  bias_ = params.add(name + ".bias", Tensor(out_channels, 1, 1), trainable);
}

Var Conv2d::operator()(const Var& x) const { return ops::conv2d(x, weight_, bias_, geometry_); }

DeformConv2d::DeformConv2d(ag::ParameterSet& params, const std::string& name, int in_channels,
                           int out_channels, std::mt19937_64& rng) {
  weight_ = params.add(name + ".weight", he_init(out_channels, in_channels, kTaps, rng));
  bias_ = params.add(name + ".bias", Tensor(out_channels, 1, 1));
}

Var DeformConv2d::operator()(const Var& x, const Var& offsets) const {
  return ops::deform_conv2d(x, offsets, weight_, bias_, kernels::ConvGeometry{3, 1, 1});
}

}  // namespace hdrv::nn
