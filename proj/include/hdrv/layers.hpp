#pragma once

#include <random>
#include <string>

#include "hdrv/autograd.hpp"
#include "hdrv/kernels.hpp"

namespace hdrv::nn {

using ag::Var;

enum class Init { kHe, kZero };

// 3x3 (or k x k) convolution with bias; parameters are registered in the
// owning model's ParameterSet under `name`.weight / `name`.bias.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ag::ParameterSet& params, const std::string& name, int in_channels, int out_channels,
         std::mt19937_64& rng, int stride = 1, int kernel = 3, Init init = Init::kHe,
         bool trainable = true);

  Var operator()(const Var& x) const;

  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }
  const kernels::ConvGeometry& geometry() const { return geometry_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  Var weight_;
  Var bias_;
  kernels::ConvGeometry geometry_{};
  int in_ = 0;
  int out_ = 0;
};

// Deformable 3x3 convolution; offsets are supplied per call.
class DeformConv2d {
 public:
  DeformConv2d() = default;
  DeformConv2d(ag::ParameterSet& params, const std::string& name, int in_channels,
               int out_channels, std::mt19937_64& rng);

  Var operator()(const Var& x, const Var& offsets) const;

  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }
  static constexpr int kTaps = 9;

 private:
  Var weight_;
  Var bias_;
};

Tensor he_init(int out, int fan_in, int kernel_area, std::mt19937_64& rng);

}  // namespace hdrv::nn
