#include "hdrv/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "hdrv/errors.hpp"
#include "hdrv/manifest.hpp"
#include "hdrv/ops.hpp"

namespace hdrv::training {

using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void set_stage_gradients(pipeline::VideoModel& model, Stage stage) {
  model.coarse().params().set_requires_grad(stage != Stage::kRefine);
  model.refine().params().set_requires_grad(stage != Stage::kCoarse);
}

void restore_gradients(pipeline::VideoModel& model) {
  model.coarse().params().set_requires_grad(true);
  model.refine().params().set_requires_grad(true);
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kCoarse: return "coarse";
    case Stage::kRefine: return "refine";
    case Stage::kFinetune: return "finetune";
  }
  return "coarse";
}

Stage parse_stage(std::string_view name) {
  if (name == "coarse") return Stage::kCoarse;
  if (name == "refine") return Stage::kRefine;
  if (name == "finetune") return Stage::kFinetune;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

TrainConfig TrainConfig::defaults(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  switch (stage) {
    case Stage::kCoarse:
      c.epochs = 10;
      c.batch_size = 16;
      c.learning_rate = 1e-4;
      break;
    case Stage::kRefine:
      c.epochs = 15;
      c.batch_size = 8;
      c.learning_rate = 1e-4;
      break;
    case Stage::kFinetune:
      c.epochs = 2;
      c.batch_size = 8;
      c.learning_rate = 2e-5;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("train: epochs must be positive");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (lr_halving_period_epochs <= 0) throw ConfigError("train: lr_halving_period_epochs must be positive");
  if (checkpoint_every_epochs <= 0) throw ConfigError("train: checkpoint_every_epochs must be positive");
  if (max_steps < 0) throw ConfigError("train: max_steps must be nonnegative");
  if (augmentation.noise_sigma < 0.0 || augmentation.tone_range < 0.0 || augmentation.crop < 0) {
    throw ConfigError("train: augmentation parameters must be nonnegative");
  }
  model.validate();
}

std::string TrainConfig::to_json() const {
  json j{{"stage", to_string(stage)},
         {"epochs", epochs},
         {"batch_size", batch_size},
         {"learning_rate", learning_rate},
         {"lr_halving_period_epochs", lr_halving_period_epochs},
         {"seed", seed},
         {"model", json::parse(model.to_json())},
         {"augment", augment},
         {"augmentation",
          {{"noise_sigma", augmentation.noise_sigma},
           {"tone_range", augmentation.tone_range},
           {"flips", augmentation.flips},
           {"rotations", augmentation.rotations},
           {"crop", augmentation.crop}}},
         {"checkpoint_every_epochs", checkpoint_every_epochs},
         {"max_steps", max_steps}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    TrainConfig c = defaults(parse_stage(j.value("stage", std::string("coarse"))));
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_halving_period_epochs = j.value("lr_halving_period_epochs", c.lr_halving_period_epochs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) c.model = pipeline::ModelConfig::from_json(j["model"].dump());
    c.augment = j.value("augment", c.augment);
    if (j.contains("augmentation")) {
      const json& a = j["augmentation"];
      c.augmentation.noise_sigma = a.value("noise_sigma", c.augmentation.noise_sigma);
      c.augmentation.tone_range = a.value("tone_range", c.augmentation.tone_range);
      c.augmentation.flips = a.value("flips", c.augmentation.flips);
      c.augmentation.rotations = a.value("rotations", c.augmentation.rotations);
      c.augmentation.crop = a.value("crop", c.augmentation.crop);
    }
    c.checkpoint_every_epochs = j.value("checkpoint_every_epochs", c.checkpoint_every_epochs);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

double learning_rate_at(const TrainConfig& config, int epoch) {
  return config.learning_rate * std::ldexp(1.0, -(epoch / config.lr_halving_period_epochs));
}

Adam::Adam(std::vector<ag::Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Tensor::like(p.value()));
    v_.push_back(Tensor::like(p.value()));
  }
}

void Adam::step(double learning_rate, double grad_scale) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ag::Node& node = *params_[k].node();
    const bool has = node.has_grad();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = has ? node.grad[i] * grad_scale : 0.0;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      node.value[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
    node.grad = Tensor();
  }
}

std::vector<ag::Var> stage_parameters(pipeline::VideoModel& model, Stage stage) {
  std::vector<ag::Var> out;
  if (stage != Stage::kRefine) {
    for (const auto& p : model.coarse().params().items()) out.push_back(p.var);
  }
  if (stage != Stage::kCoarse) {
    for (const auto& p : model.refine().params().items()) out.push_back(p.var);
  }
  return out;
}

SampleLoss stage_loss(const pipeline::VideoModel& model, Stage stage, const datagen::LdrsHdrPair& pair,
                      const std::array<ag::Var, 3>* cached_coarse) {
  const int c = pair.center_index();
  if (pair.inputs.size() < 5) throw DataError("training pair has fewer than 5 frames");
  const double mu = model.refine().config().mu;
  if (stage == Stage::kCoarse) {
    const auto out = model.coarse().forward(pair.inputs[c - 1], pair.inputs[c], pair.inputs[c + 1]);
    return {coarse::coarse_loss(out.hdr, pair.target.pixels, mu), false};
  }
  const std::array<ag::Var, 3> window = cached_coarse ? *cached_coarse : pipeline::coarse_triplet(model, pair.inputs);
  const auto out = model.refine().forward(window, pair.reference(), pair.reference_role);
  auto loss = refine::refine_loss(out.merged, pair.target.pixels, out.mask, model.perceptual(), mu);
  return {loss.total, loss.l1_skipped};
}

TrainResult train_pairs(pipeline::VideoModel& model, const TrainConfig& config,
                        const std::vector<datagen::LdrsHdrPair>& pairs, const TrainHooks& hooks) {
  config.validate();
  if (pairs.empty()) throw DataError("train: no training pairs");
  for (const auto& p : pairs) {
    if (static_cast<int>(p.inputs.size()) < 2 * 2 + 1) throw DataError("train: pair window too small");
  }

  const Stage stage = config.stage;
  const std::vector<ag::Var> params = stage_parameters(model, stage);
  Adam optimizer(params);
  TrainResult result;

  // Frozen coarse outputs are reusable when the inputs never change.
  std::vector<std::optional<std::array<ag::Var, 3>>> cache(pairs.size());
  const bool use_cache = stage == Stage::kRefine && !config.augment;

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  bool done = false;
  try {
    set_stage_gradients(model, stage);
    for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
      const double lr = learning_rate_at(config, epoch);
      std::mt19937_64 shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double epoch_sum = 0.0;
      int epoch_batches = 0;
      for (std::size_t start = 0; start < order.size() && !done; start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        double batch_sum = 0.0;
        for (std::size_t k = start; k < end; ++k) {
          const std::size_t idx = order[k];
          datagen::LdrsHdrPair sample;
          const datagen::LdrsHdrPair* pair = &pairs[idx];
          if (config.augment) {
            sample = datagen::augment(pairs[idx], mix_seed(mix_seed(config.seed, epoch), idx), config.augmentation);
            pair = &sample;
          }
          const std::array<ag::Var, 3>* cached = nullptr;
          if (use_cache) {
            if (!cache[idx]) cache[idx] = pipeline::coarse_triplet(model, pair->inputs);
            cached = &*cache[idx];
          }
          const SampleLoss sl = stage_loss(model, stage, *pair, cached);
          if (!std::isfinite(sl.loss.value()[0])) {
            throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
          }
          if (sl.l1_skipped && hooks.on_warning) {
            hooks.on_warning("pair " + std::to_string(idx) + ": reference fully well-exposed, L1 term skipped");
          }
          ag::backward(sl.loss);
          batch_sum += sl.loss.value()[0];
        }
        const double n = static_cast<double>(end - start);
        optimizer.step(lr, 1.0 / n);
        for (const auto& p : params) {
          if (!p.value().all_finite()) {
            throw NumericalError("train: parameters became non-finite after step " +
                                 std::to_string(result.steps + 1));
          }
        }
        const double batch_loss = batch_sum / n;
        result.step_losses.push_back(batch_loss);
        ++result.steps;
        epoch_sum += batch_loss;
        ++epoch_batches;
        if (hooks.on_step) hooks.on_step({epoch, result.steps, batch_loss, lr});
        if (config.max_steps > 0 && result.steps >= config.max_steps) done = true;
      }
      const double mean = epoch_sum / std::max(1, epoch_batches);
      result.epoch_losses.push_back(mean);
      if (hooks.on_epoch) hooks.on_epoch({epoch, result.steps, mean, lr});
    }
  } catch (...) {
    restore_gradients(model);
    throw;
  }
  restore_gradients(model);
  return result;
}

std::filesystem::path train_stage(const TrainConfig& config, const std::filesystem::path& manifest_path,
                                  const std::filesystem::path& output_dir,
                                  const std::optional<std::filesystem::path>& init_checkpoint,
                                  const TrainHooks& hooks) {
  config.validate();
  std::unique_ptr<pipeline::VideoModel> model;
  if (init_checkpoint) {
    if (!std::filesystem::exists(*init_checkpoint)) {
      throw ConfigError("prerequisite checkpoint not found: " + init_checkpoint->string());
    }
    auto ckpt = pipeline::load_checkpoint(*init_checkpoint);
    if (config.stage != Stage::kCoarse && !ckpt.info.has_coarse) {
      throw ConfigError("checkpoint " + init_checkpoint->string() + " has no coarse parameters");
    }
    if (config.stage == Stage::kFinetune && !ckpt.info.has_refine) {
      throw ConfigError("checkpoint " + init_checkpoint->string() + " has no refine parameters");
    }
    model = std::move(ckpt.model);
  } else if (config.stage != Stage::kCoarse) {
    throw ConfigError(std::string(to_string(config.stage)) + " stage requires a prerequisite checkpoint");
  } else {
    model = std::make_unique<pipeline::VideoModel>(config.model, config.seed);
  }

  const auto manifest = manifest::load(manifest_path);
  std::vector<datagen::LdrsHdrPair> pairs;
  for (const auto& seq : manifest.sequences) {
    if (seq.period != model->config().period) {
      throw DataError("sequence '" + seq.name + "' has period " + std::to_string(seq.period) +
                      " but the model expects " + std::to_string(model->config().period));
    }
    for (const auto& pair : seq.pairs) pairs.push_back(manifest::load_pair(manifest, seq, pair));
  }
  if (pairs.empty()) throw DataError("manifest lists no training pairs: " + manifest_path.string());

  std::filesystem::create_directories(output_dir);
  const std::string stage = std::string(to_string(config.stage));
  const bool save_refine = config.stage != Stage::kCoarse;
  std::ofstream curve(output_dir / (stage + "_curve.csv"));
  if (!curve) throw IoError("cannot write training curve in " + output_dir.string());
  curve << "step,epoch,learning_rate,loss\n";

  TrainHooks wrapped = hooks;
  wrapped.on_step = [&](const TrainProgress& p) {
    curve << p.step << ',' << p.epoch << ',' << p.learning_rate << ',' << p.loss << '\n';
    if (hooks.on_step) hooks.on_step(p);
  };
  wrapped.on_epoch = [&](const TrainProgress& p) {
    if ((p.epoch + 1) % config.checkpoint_every_epochs == 0) {
      const auto path = output_dir / (stage + "_epoch" + std::to_string(p.epoch + 1) + ".ckpt");
      pipeline::save_checkpoint(path, *model, {stage, p.step, p.epoch + 1}, true, save_refine);
    }
    if (hooks.on_epoch) hooks.on_epoch(p);
  };
  const TrainResult result = train_pairs(*model, config, pairs, wrapped);
  const auto final_path = output_dir / (stage + "_final.ckpt");
  pipeline::save_checkpoint(final_path, *model, {stage, result.steps, config.epochs}, true, save_refine);
  return final_path;
}

}  // namespace hdrv::training
