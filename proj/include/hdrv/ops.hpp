#pragma once

// Differentiable operations over ag::Var. Each op computes its forward value
// eagerly and records a closure that accumulates gradients into its inputs.

#include <vector>

#include "hdrv/autograd.hpp"
#include "hdrv/kernels.hpp"

namespace hdrv::ops {

using ag::Var;

Var conv2d(const Var& x, const Var& weight, const Var& bias, const kernels::ConvGeometry& g);
Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias,
                  const kernels::ConvGeometry& g);
Var backward_warp(const Var& image, const Var& flow);
Var upsample2x(const Var& x);

Var leaky_relu(const Var& x, double slope = 0.1);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var softplus(const Var& x);
// Gradient is zero where the input was clamped.
Var clamp(const Var& x, double lo, double hi);
// Per-channel symmetric clamp; bounds[c] applies to channel c.
Var clamp_channels(const Var& x, const std::vector<double>& bounds);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double s);

Var concat(const std::vector<Var>& parts);
Var slice_channels(const Var& x, int begin, int count);

// x^gamma / exposure for x >= 0.
Var ldr_to_radiance(const Var& ldr, double exposure, double gamma);
Var mu_law(const Var& radiance, double mu);
Var inverse_mu_law(const Var& tonemapped, double mu);

// Weighted average of `images` (each C x H x W) with per-pixel weights
// (images.size() x H x W): sum_k w_k I_k / (sum_k w_k + eps).
Var blend(const std::vector<Var>& images, const Var& weights, double eps);

// mask * a + (1 - mask) * b with a one-channel constant mask broadcast over channels.
Var mask_merge(const Var& a, const Var& b, const Tensor& mask);

Var mean_abs_diff(const Var& a, const Var& b);
// sum over pixels of the channel-mean |a - b|, divided by `normalizer`.
Var pixel_abs_sum(const Var& a, const Var& b, double normalizer);
Var sum_scalars(const std::vector<Var>& scalars);

}  // namespace hdrv::ops
