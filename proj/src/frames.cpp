#include "hdrv/frames.hpp"

#include <cmath>

#include "hdrv/errors.hpp"

namespace hdrv {

std::string_view to_string(ExposureRole role) {
  switch (role) {
    case ExposureRole::kLow:
      return "low";
    case ExposureRole::kMiddle:
      return "middle";
    case ExposureRole::kHigh:
      return "high";
  }
  return "unknown";
}

ExposureRole parse_role(std::string_view name) {
  if (name == "low") return ExposureRole::kLow;
  if (name == "middle") return ExposureRole::kMiddle;
  if (name == "high") return ExposureRole::kHigh;
  throw InvalidArgument("unknown exposure role: " + std::string(name));
}

void LdrFrame::validate() const {
  if (!(exposure > 0.0) || !std::isfinite(exposure)) {
    throw InvalidArgument("LDR frame exposure must be positive");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("LDR frame gamma must be positive");
  }
  for (double v : pixels.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("LDR pixel outside [0, 1]");
  }
}

void RadianceFrame::validate() const {
  for (double v : pixels.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("radiance must be finite and nonnegative");
    }
  }
}

}  // namespace hdrv
