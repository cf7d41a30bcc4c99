#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "hdrv/autograd.hpp"
#include "hdrv/frames.hpp"
#include "hdrv/layers.hpp"

namespace hdrv::coarse {

using ag::Var;

struct CoarseConfig {
  int period = 2;
  std::array<int, 4> flow_channels{16, 32, 64, 96};
  int weight_base = 32;
  double gamma = kDefaultGamma;
  double blend_eps = 1e-8;

  static constexpr int kDownsample = 16;
  // 9 channels [prev, g(ref), next] for two exposures; 12 for three, where
  // the reference is matched to each neighbor separately.
  int flow_input_channels() const { return period == 2 ? 9 : 12; }
  CoarseConfig scaled(double factor) const;
  void validate() const;
};

// Exposure-matched flow-network input for the window (prev, ref, next).
Tensor prepare_flow_input(const LdrFrame& prev, const LdrFrame& ref, const LdrFrame& next,
                          int period);

// Flows from the reference frame into each neighbor (2 x H x W each).
struct FlowPair {
  Var to_prev;
  Var to_next;
};

// Oracle flows replace the flow network when set.
struct CoarseOverrides {
  std::optional<Tensor> flow_to_prev;
  std::optional<Tensor> flow_to_next;
};

struct CoarseOutput {
  Var hdr;       // H^c for the reference frame
  FlowPair flows;
  Var weights;   // 5 x H x W blend weights
};

// Weighted fusion; image order (I_prev, warped I_prev, I_ref, warped I_next, I_next).
Var blend_coarse(const std::array<Var, 5>& images, const Var& weights, double eps = 1e-8);

// Mean |mu(pred) - mu(gt)|; negative radiance is rejected.
Var coarse_loss(const Var& pred, const Tensor& gt, double mu = kDefaultMu);

class CoarseModel {
 public:
  CoarseModel(const CoarseConfig& config, std::uint64_t seed);
  CoarseModel(const CoarseModel&) = delete;
  CoarseModel& operator=(const CoarseModel&) = delete;

  FlowPair predict_flows(const Var& flow_input) const;
  CoarseOutput forward(const LdrFrame& prev, const LdrFrame& ref, const LdrFrame& next,
                       const CoarseOverrides* overrides = nullptr) const;

  const CoarseConfig& config() const { return config_; }
  ag::ParameterSet& params() { return params_; }
  const ag::ParameterSet& params() const { return params_; }

 private:
  Var predict_weights(const Var& stack) const;

  CoarseConfig config_;
  ag::ParameterSet params_;
  // Flow network: 4-level strided encoder, coarse-to-fine refinement heads.
  std::array<nn::Conv2d, 4> flow_down_;
  std::array<nn::Conv2d, 4> flow_conv_;
  std::array<nn::Conv2d, 3> flow_refine_;
  std::array<nn::Conv2d, 4> flow_head_;
  // Weight network: U-Net with three downsamplings.
  std::array<nn::Conv2d, 4> weight_enc_a_;
  std::array<nn::Conv2d, 4> weight_enc_b_;
  std::array<nn::Conv2d, 3> weight_dec_;
  nn::Conv2d weight_head_;
};

}  // namespace hdrv::coarse
