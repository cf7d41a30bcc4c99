#pragma once

#include <string>
#include <string_view>

#include "hdrv/tensor.hpp"

namespace hdrv {

inline constexpr double kDefaultGamma = 2.2;
inline constexpr double kDefaultMu = 5000.0;

// Position of a reference frame's exposure within its schedule.
enum class ExposureRole { kLow, kMiddle, kHigh };

std::string_view to_string(ExposureRole role);
ExposureRole parse_role(std::string_view name);

// Gamma-encoded image in [0, 1] (3 x H x W) with its relative exposure.
struct LdrFrame {
  Tensor pixels;
  double exposure = 1.0;
  double gamma = kDefaultGamma;

  // Throws InvalidArgument when any invariant is violated.
  void validate() const;
};

// Linear relative radiance, nonnegative and finite.
struct RadianceFrame {
  Tensor pixels;

  void validate() const;
};

struct TonemappedFrame {
  Tensor pixels;
  double mu = kDefaultMu;
};

// One-channel weights in [0, 1].
struct WellExposedMask {
  Tensor weights;
};

// (dx, dy) per target pixel, in pixels.
struct FlowField {
  Tensor displacements;
};

}  // namespace hdrv
