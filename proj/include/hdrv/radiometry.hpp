#pragma once

#include "hdrv/frames.hpp"

namespace hdrv::radiometry {

inline constexpr double kLowThreshold = 0.15;
inline constexpr double kHighThreshold = 0.9;

// Scalar forms. These are the definitions the frame-level functions and the
// network ops are checked against.
double ldr_to_radiance(double ldr, double exposure, double gamma = kDefaultGamma);
double radiance_to_ldr(double radiance, double exposure, double gamma = kDefaultGamma);
double mu_tonemap(double radiance, double mu = kDefaultMu);
double inverse_mu_tonemap(double tonemapped, double mu = kDefaultMu);
double well_exposed_weight(double ldr, ExposureRole role);
double reinhard(double radiance);

// L^gamma / t, elementwise.
RadianceFrame ldr_to_radiance(const LdrFrame& frame);
// clip((I * t)^(1/gamma)) into [0, 1]: the exposure re-rendering used to
// exposure-match frames and to synthesize LDR inputs.
LdrFrame radiance_to_ldr(const RadianceFrame& frame, double exposure,
                         double gamma = kDefaultGamma);
// Same re-rendering on a raw linear tensor; values below zero clip to zero.
Tensor render_ldr(const Tensor& radiance, double exposure, double gamma = kDefaultGamma);
TonemappedFrame mu_tonemap(const RadianceFrame& frame, double mu = kDefaultMu);
Tensor mu_tonemap(const Tensor& radiance, double mu = kDefaultMu);

// Per-channel weights reduced to one channel with the channel-wise minimum.
WellExposedMask well_exposed_mask(const LdrFrame& frame, ExposureRole role);

// Preview operator x / (1 + x). With `normalize`, radiance is first scaled so
// its 99th percentile maps to 1 (skipped for all-zero input).
TonemappedFrame display_tonemap(const RadianceFrame& frame, bool normalize = true);

}  // namespace hdrv::radiometry
