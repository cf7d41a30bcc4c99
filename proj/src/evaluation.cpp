#include "hdrv/evaluation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "hdrv/errors.hpp"
#include "hdrv/radiometry.hpp"

namespace hdrv::evaluation {

double psnr_mu(const Tensor& pred, const Tensor& gt, double mu, double cap) {
  require_same_shape(pred, gt, "psnr_mu");
  if (pred.empty()) throw InvalidArgument("psnr_mu: empty frames");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = radiometry::mu_tonemap(pred[i], mu) - radiometry::mu_tonemap(gt[i], mu);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(pred.size());
  if (mse == 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

EvalReport evaluate(const std::vector<RadianceFrame>& pred, const std::vector<RadianceFrame>& gt,
                    const std::vector<std::optional<ExposureRole>>& roles,
                    const std::vector<int>& indices, double mu, double cap) {
  if (pred.size() != gt.size()) {
    throw InvalidArgument("evaluate: " + std::to_string(pred.size()) + " predictions vs " +
                          std::to_string(gt.size()) + " ground-truth frames");
  }
  if (!roles.empty() && roles.size() != pred.size()) throw InvalidArgument("evaluate: role count mismatch");
  if (!indices.empty() && indices.size() != pred.size()) throw InvalidArgument("evaluate: index count mismatch");

  const auto start = std::chrono::steady_clock::now();
  EvalReport report;
  std::array<double, 3> sums{};
  std::array<int, 3> counts{};
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    FrameScore s;
    s.index = indices.empty() ? static_cast<int>(i) : indices[i];
    s.role = roles.empty() ? std::nullopt : roles[i];
    s.psnr_mu = psnr_mu(pred[i].pixels, gt[i].pixels, mu, cap);
    if (s.role) {
      sums[static_cast<int>(*s.role)] += s.psnr_mu;
      ++counts[static_cast<int>(*s.role)];
    }
    total += s.psnr_mu;
    report.frames.push_back(s);
  }
  const auto mean = [](double sum, int n) -> std::optional<double> {
    return n > 0 ? std::optional<double>(sum / n) : std::nullopt;
  };
  report.low = mean(sums[0], counts[0]);
  report.middle = mean(sums[1], counts[1]);
  report.high = mean(sums[2], counts[2]);
  report.all = mean(total, static_cast<int>(pred.size()));
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  report.runtime_ms_per_frame = pred.empty() ? 0.0 : ms / pred.size();
  return report;
}

std::string EvalReport::to_json() const {
  using nlohmann::json;
  json frames_json = json::array();
  for (const auto& f : frames) {
    frames_json.push_back({{"index", f.index},
                           {"role", f.role ? std::string(to_string(*f.role)) : std::string("unknown")},
                           {"psnr_mu", f.psnr_mu}});
  }
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"frames", frames_json},
         {"aggregates", {{"low", opt(low)}, {"middle", opt(middle)}, {"high", opt(high)}, {"all", opt(all)}}},
         {"runtime_ms_per_frame", runtime_ms_per_frame}};
  return j.dump(2);
}

}  // namespace hdrv::evaluation
