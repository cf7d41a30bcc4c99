#include "hdrv/radiometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdrv/errors.hpp"

namespace hdrv::radiometry {
namespace {

void require_positive_exposure(double exposure) {
  if (!(exposure > 0.0) || !std::isfinite(exposure)) {
    throw InvalidArgument("exposure must be positive, got " + std::to_string(exposure));
  }
}

void require_positive_mu(double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("mu must be positive");
}

}  // namespace

double ldr_to_radiance(double ldr, double exposure, double gamma) {
  require_positive_exposure(exposure);
  return std::pow(ldr, gamma) / exposure;
}

double radiance_to_ldr(double radiance, double exposure, double gamma) {
  require_positive_exposure(exposure);
  const double scaled = std::max(radiance * exposure, 0.0);
  return std::clamp(std::pow(scaled, 1.0 / gamma), 0.0, 1.0);
}

double mu_tonemap(double radiance, double mu) {
  require_positive_mu(mu);
  if (radiance < 0.0) throw InvalidArgument("mu_tonemap: negative radiance");
  return std::log1p(mu * radiance) / std::log1p(mu);
}

double inverse_mu_tonemap(double tonemapped, double mu) {
  require_positive_mu(mu);
  return std::expm1(tonemapped * std::log1p(mu)) / mu;
}

double well_exposed_weight(double ldr, ExposureRole role) {
  const auto low_weight = [](double v) {
    if (v >= kLowThreshold) return 1.0;
    const double r = v / kLowThreshold;
    return r * r;
  };
  const auto high_weight = [](double v) {
    if (v <= kHighThreshold) return 1.0;
    const double r = (1.0 - v) / (1.0 - kHighThreshold);
    return r * r;
  };
  switch (role) {
    case ExposureRole::kLow:
      return low_weight(ldr);
    case ExposureRole::kHigh:
      return high_weight(ldr);
    case ExposureRole::kMiddle:
      return std::min(low_weight(ldr), high_weight(ldr));
  }
  throw InvalidArgument("well_exposed_weight: unknown role");
}

double reinhard(double radiance) { return radiance / (1.0 + radiance); }

RadianceFrame ldr_to_radiance(const LdrFrame& frame) {
  frame.validate();
  RadianceFrame out{Tensor::like(frame.pixels)};
  const auto in = frame.pixels.values();
  auto dst = out.pixels.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    dst[i] = std::pow(in[i], frame.gamma) / frame.exposure;
  }
  return out;
}

Tensor render_ldr(const Tensor& radiance, double exposure, double gamma) {
  require_positive_exposure(exposure);
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  Tensor out = Tensor::like(radiance);
  const double inv_gamma = 1.0 / gamma;
  for (std::size_t i = 0; i < radiance.size(); ++i) {
    out[i] = std::clamp(std::pow(std::max(radiance[i] * exposure, 0.0), inv_gamma), 0.0, 1.0);
  }
  return out;
}

LdrFrame radiance_to_ldr(const RadianceFrame& frame, double exposure, double gamma) {
  return LdrFrame{render_ldr(frame.pixels, exposure, gamma), exposure, gamma};
}

Tensor mu_tonemap(const Tensor& radiance, double mu) {
  require_positive_mu(mu);
  const double denom = std::log1p(mu);
  Tensor out = Tensor::like(radiance);
  for (std::size_t i = 0; i < radiance.size(); ++i) {
    if (radiance[i] < 0.0) throw InvalidArgument("mu_tonemap: negative radiance");
    out[i] = std::log1p(mu * radiance[i]) / denom;
  }
  return out;
}

TonemappedFrame mu_tonemap(const RadianceFrame& frame, double mu) {
  return TonemappedFrame{mu_tonemap(frame.pixels, mu), mu};
}

WellExposedMask well_exposed_mask(const LdrFrame& frame, ExposureRole role) {
  frame.validate();
  const Tensor& px = frame.pixels;
  Tensor weights(1, px.height(), px.width(), 1.0);
  for (int c = 0; c < px.channels(); ++c) {
    const double* src = px.channel(c);
    for (int i = 0; i < px.plane(); ++i) {
      weights[i] = std::min(weights[i], well_exposed_weight(src[i], role));
    }
  }
  return WellExposedMask{std::move(weights)};
}

TonemappedFrame display_tonemap(const RadianceFrame& frame, bool normalize) {
  frame.validate();
  double scale = 1.0;
  if (normalize && !frame.pixels.empty()) {
    std::vector<double> sorted(frame.pixels.values().begin(), frame.pixels.values().end());
    const std::size_t k = static_cast<std::size_t>(0.99 * static_cast<double>(sorted.size() - 1));
    std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
    if (sorted[k] > 0.0) scale = 1.0 / sorted[k];
  }
  TonemappedFrame out{Tensor::like(frame.pixels), 0.0};
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    out.pixels[i] = reinhard(frame.pixels[i] * scale);
  }
  return out;
}

}  // namespace hdrv::radiometry
