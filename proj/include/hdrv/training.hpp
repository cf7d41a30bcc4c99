#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hdrv/datagen.hpp"
#include "hdrv/pipeline.hpp"

namespace hdrv::training {

enum class Stage { kCoarse, kRefine, kFinetune };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct TrainConfig {
  Stage stage = Stage::kCoarse;
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-4;
  int lr_halving_period_epochs = 5;
  std::uint64_t seed = 0;
  pipeline::ModelConfig model;
  bool augment = true;
  datagen::AugmentOptions augmentation;
  int checkpoint_every_epochs = 1;
  long long max_steps = 0;  // 0 means no limit

  static TrainConfig defaults(Stage stage);
  void validate() const;
  std::string to_json() const;
  // Missing fields take the defaults of the stated stage.
  static TrainConfig from_json(const std::string& text);
};

// Learning rate for a zero-based epoch: halved every lr_halving_period_epochs.
double learning_rate_at(const TrainConfig& config, int epoch);

class Adam {
 public:
  explicit Adam(std::vector<ag::Var> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  // Applies one update from the accumulated gradients, then clears them.
  void step(double learning_rate, double grad_scale = 1.0);
  long long steps() const { return t_; }

 private:
  std::vector<ag::Var> params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

// Trainable parameters for a stage: coarse, refine, or both.
std::vector<ag::Var> stage_parameters(pipeline::VideoModel& model, Stage stage);

struct SampleLoss {
  ag::Var loss;
  bool l1_skipped = false;
};

// Loss of one pair under a stage. Coarse results feeding the refine stage
// are computed without gradients; `cached_coarse` replaces them when non-null.
SampleLoss stage_loss(const pipeline::VideoModel& model, Stage stage, const datagen::LdrsHdrPair& pair,
                      const std::array<ag::Var, 3>* cached_coarse = nullptr);

struct TrainProgress {
  int epoch = 0;
  long long step = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainHooks {
  std::function<void(const TrainProgress&)> on_step;
  std::function<void(const TrainProgress&)> on_epoch;  // loss is the epoch mean
  std::function<void(const std::string&)> on_warning;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
  long long steps = 0;
};

// Runs the stage on in-memory pairs. Deterministic for a fixed seed.
TrainResult train_pairs(pipeline::VideoModel& model, const TrainConfig& config,
                        const std::vector<datagen::LdrsHdrPair>& pairs, const TrainHooks& hooks = {});

// Loads every pair of the manifest, trains, and writes checkpoints plus a
// CSV training curve under `output_dir`. Returns the final checkpoint path.
// The refine stage needs a checkpoint with coarse parameters, finetune one
// with both groups; otherwise ConfigError.
std::filesystem::path train_stage(const TrainConfig& config, const std::filesystem::path& manifest,
                                  const std::filesystem::path& output_dir,
                                  const std::optional<std::filesystem::path>& init_checkpoint,
                                  const TrainHooks& hooks = {});

}  // namespace hdrv::training
