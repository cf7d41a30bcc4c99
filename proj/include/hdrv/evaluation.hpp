#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hdrv/frames.hpp"

namespace hdrv::evaluation {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) between mu-law images; MSE == 0 yields `cap`.
double psnr_mu(const Tensor& pred, const Tensor& gt, double mu = kDefaultMu, double cap = kPsnrCap);

struct FrameScore {
  int index = 0;
  std::optional<ExposureRole> role;  // unknown without a schedule
  double psnr_mu = 0.0;
};

struct EvalReport {
  std::vector<FrameScore> frames;
  std::optional<double> low, middle, high, all;
  double runtime_ms_per_frame = 0.0;

  std::string to_json() const;
};

EvalReport evaluate(const std::vector<RadianceFrame>& pred, const std::vector<RadianceFrame>& gt,
                    const std::vector<std::optional<ExposureRole>>& roles,
                    const std::vector<int>& indices = {}, double mu = kDefaultMu,
                    double cap = kPsnrCap);

}  // namespace hdrv::evaluation
