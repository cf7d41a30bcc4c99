#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "hdrv/autograd.hpp"
#include "hdrv/frames.hpp"
#include "hdrv/layers.hpp"

namespace hdrv::refine {

using ag::Var;

enum class PerceptualKind { kRandom, kNone };

struct RefineConfig {
  int features = 64;
  int perceptual_channels = 16;
  PerceptualKind perceptual = PerceptualKind::kRandom;
  std::uint64_t perceptual_seed = 20211;
  double mu = kDefaultMu;
  bool clamp_offsets = true;

  static constexpr int kLevels = 3;
  static constexpr int kDownsample = 4;
  RefineConfig scaled(double factor) const;
  void validate() const;
};

// Levels 0..2 at full, half and quarter resolution.
struct FeaturePyramid {
  std::array<Var, RefineConfig::kLevels> levels;
};

// Deformable 3x3 convolution; offsets hold (dx, dy) for each of the 9 taps.
Var deformable_sample(const Var& feature, const Var& offsets, const Var& weight, const Var& bias);

// Injected offsets replace the predicted ones per level and for the cascade.
struct PcdOverrides {
  std::array<std::optional<Tensor>, RefineConfig::kLevels> level_offsets;
  std::optional<Tensor> cascade_offsets;
};

// Forced constant attention per frame (prev, ref, next).
struct AttentionOverrides {
  std::array<std::optional<double>, 3> forced;
};

struct RefineOverrides {
  PcdOverrides prev;
  PcdOverrides next;
  AttentionOverrides attention;
  std::optional<Tensor> mask;
};

struct RefineOutput {
  Var merged;    // H = M * H^c + (1 - M) * H^r
  Var refined;   // H^r
  Tensor mask;   // M, one channel
};

class RefineModel {
 public:
  RefineModel(const RefineConfig& config, std::uint64_t seed);
  RefineModel(const RefineModel&) = delete;
  RefineModel& operator=(const RefineModel&) = delete;

  // Input is linear radiance; it is mu-law compressed before the first conv.
  FeaturePyramid extract_features(const Var& coarse) const;
  Var pcd_align(const FeaturePyramid& neighbor, const FeaturePyramid& reference,
                const PcdOverrides* overrides = nullptr) const;
  Var temporal_attention_fuse(const std::array<Var, 3>& aligned,
                              const AttentionOverrides* overrides = nullptr) const;
  // Decoder output in mu-law space before the residual is added.
  Var decode(const Var& fused, const FeaturePyramid& reference) const;

  RefineOutput forward(const std::array<Var, 3>& coarse_window, const LdrFrame& reference_ldr,
                       ExposureRole role, const RefineOverrides* overrides = nullptr) const;

  const RefineConfig& config() const { return config_; }
  ag::ParameterSet& params() { return params_; }
  const ag::ParameterSet& params() const { return params_; }

 private:
  struct PcdLevel {
    nn::Conv2d offset_conv;
    nn::Conv2d offset_merge;  // unused at the coarsest level
    nn::Conv2d offset_head;
    nn::DeformConv2d dcn;
    nn::Conv2d feature_merge;  // unused at the coarsest level
  };

  std::vector<double> offset_bounds(int height, int width) const;

  RefineConfig config_;
  ag::ParameterSet params_;
  std::array<nn::Conv2d, 3> extract_a_;
  std::array<nn::Conv2d, 3> extract_b_;
  std::array<PcdLevel, 3> pcd_;
  nn::Conv2d cascade_conv_;
  nn::Conv2d cascade_head_;
  nn::DeformConv2d cascade_dcn_;
  nn::Conv2d attention_a_;
  nn::Conv2d attention_b_;
  nn::Conv2d fusion_;
  std::array<nn::Conv2d, 2> decode_down_;
  std::array<nn::Conv2d, 2> decode_up_;
  nn::Conv2d decode_head_;
};

// Fixed random-weight conv pyramid standing in for a pretrained network;
// exposes three intermediate activations.
class PerceptualExtractor {
 public:
  PerceptualExtractor(int channels, std::uint64_t seed);
  std::array<Var, 3> features(const Var& tonemapped) const;

 private:
  ag::ParameterSet params_;
  nn::Conv2d conv1a_, conv1b_, conv2_, conv3_;
};

struct RefineLoss {
  Var total;
  Var l1;            // undefined when skipped
  Var perceptual;    // undefined without an extractor
  bool l1_skipped = false;
  std::string warning;
};

// L1 on mu-law images normalized by sum(1 - M), plus the perceptual term.
RefineLoss refine_loss(const Var& pred_merged, const Tensor& gt, const Tensor& mask,
                       const PerceptualExtractor* perceptual, double mu = kDefaultMu);

}  // namespace hdrv::refine
