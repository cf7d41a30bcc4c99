#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "hdrv/coarsenet.hpp"
#include "hdrv/refinenet.hpp"

namespace hdrv::pipeline {

using ag::Var;

// Architecture of both stages. `scale` multiplies every channel width.
struct ModelConfig {
  int period = 2;
  double scale = 1.0;
  refine::PerceptualKind perceptual = refine::PerceptualKind::kRandom;

  coarse::CoarseConfig coarse_config() const;
  refine::RefineConfig refine_config() const;
  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

class VideoModel {
 public:
  VideoModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  coarse::CoarseModel& coarse() { return coarse_; }
  const coarse::CoarseModel& coarse() const { return coarse_; }
  refine::RefineModel& refine() { return refine_; }
  const refine::RefineModel& refine() const { return refine_; }
  // Null when the perceptual term is disabled.
  const refine::PerceptualExtractor* perceptual() const { return perceptual_.get(); }

 private:
  ModelConfig config_;
  coarse::CoarseModel coarse_;
  refine::RefineModel refine_;
  std::unique_ptr<refine::PerceptualExtractor> perceptual_;
};

// Coarse results for the reference frame and both neighbors. `frames` holds
// 2 * half + 1 frames centered on the reference, half >= 2.
std::array<Var, 3> coarse_triplet(const VideoModel& model, std::span<const LdrFrame> frames,
                                  const coarse::CoarseOverrides* overrides = nullptr);

struct CheckpointInfo {
  std::string stage;
  long long step = 0;
  int epoch = 0;
  bool has_coarse = false;
  bool has_refine = false;
};

struct Checkpoint {
  std::unique_ptr<VideoModel> model;
  CheckpointInfo info;
};

// Binary layout: 8-byte magic, u64 header length, JSON header, then the raw
// little-endian doubles of every listed parameter in header order.
void save_checkpoint(const std::filesystem::path& path, const VideoModel& model,
                     const CheckpointInfo& info, bool include_coarse = true,
                     bool include_refine = true);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hdrv::pipeline
