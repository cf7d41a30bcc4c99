#include "hdrv/pipeline.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hdrv/errors.hpp"

namespace hdrv::pipeline {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'D', 'R', 'V', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

std::string_view perceptual_name(refine::PerceptualKind kind) {
  return kind == refine::PerceptualKind::kNone ? "none" : "random";
}

refine::PerceptualKind parse_perceptual(const std::string& name) {
  if (name == "random") return refine::PerceptualKind::kRandom;
  if (name == "none") return refine::PerceptualKind::kNone;
  throw ConfigError("unknown perceptual extractor '" + name + "'");
}

json group_json(const ag::ParameterSet& params) {
  json out = json::array();
  for (const auto& p : params.items()) {
    const Tensor& t = p.var.value();
    out.push_back({{"name", p.name}, {"shape", {t.channels(), t.height(), t.width()}}});
  }
  return out;
}

void write_group(std::ofstream& out, const ag::ParameterSet& params) {
  static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian hosts");
  for (const auto& p : params.items()) {
    const Tensor& t = p.var.value();
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

void read_group(std::ifstream& in, const json& entries, ag::ParameterSet& params,
                const std::filesystem::path& path) {
  if (entries.size() != params.items().size()) {
    throw DataError("checkpoint " + path.string() + ": parameter count does not match the architecture");
  }
  std::size_t k = 0;
  for (auto& p : params.items()) {
    const json& e = entries[k++];
    Tensor& t = p.var.mutable_value();
    const auto shape = e.at("shape").get<std::vector<int>>();
    if (e.at("name").get<std::string>() != p.name || shape.size() != 3 || shape[0] != t.channels() ||
        shape[1] != t.height() || shape[2] != t.width()) {
      throw DataError("checkpoint " + path.string() + ": parameter '" + p.name + "' does not match");
    }
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint " + path.string() + ": truncated parameter data");
  }
}

}  // namespace

coarse::CoarseConfig ModelConfig::coarse_config() const {
  coarse::CoarseConfig c;
  c.period = period;
  return c.scaled(scale);
}

refine::RefineConfig ModelConfig::refine_config() const {
  refine::RefineConfig r;
  r.perceptual = perceptual;
  return r.scaled(scale);
}

void ModelConfig::validate() const {
  if (period != 2 && period != 3) throw ConfigError("model: period must be 2 or 3");
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("model: scale must lie in (0, 1]");
}

std::string ModelConfig::to_json() const {
  return json{{"period", period}, {"scale", scale}, {"perceptual", perceptual_name(perceptual)}}.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ModelConfig c;
    c.period = j.value("period", c.period);
    c.scale = j.value("scale", c.scale);
    c.perceptual = parse_perceptual(j.value("perceptual", std::string("random")));
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

VideoModel::VideoModel(const ModelConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)),
      coarse_(config.coarse_config(), seed),
      refine_(config.refine_config(), seed + 1) {
  const auto rc = refine_.config();
  if (rc.perceptual == refine::PerceptualKind::kRandom) {
    perceptual_ = std::make_unique<refine::PerceptualExtractor>(rc.perceptual_channels, rc.perceptual_seed);
  }
}

std::array<Var, 3> coarse_triplet(const VideoModel& model, std::span<const LdrFrame> frames,
                                  const coarse::CoarseOverrides* overrides) {
  if (frames.size() < 5 || frames.size() % 2 == 0) {
    throw InvalidArgument("coarse_triplet: need an odd window of at least 5 frames");
  }
  const std::size_t c = frames.size() / 2;
  std::array<Var, 3> out;
  for (int k = -1; k <= 1; ++k) {
    const std::size_t i = c + k;
    out[k + 1] = model.coarse().forward(frames[i - 1], frames[i], frames[i + 1], overrides).hdr;
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const VideoModel& model,
                     const CheckpointInfo& info, bool include_coarse, bool include_refine) {
  json header{{"format", kFormatVersion},
              {"model", json::parse(model.config().to_json())},
              {"period", model.config().period},
              {"stage", info.stage},
              {"step", info.step},
              {"epoch", info.epoch},
              {"groups", json::object()}};
  if (include_coarse) header["groups"]["coarse"] = group_json(model.coarse().params());
  if (include_refine) header["groups"]["refine"] = group_json(model.refine().params());
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (include_coarse) write_group(out, model.coarse().params());
  if (include_refine) write_group(out, model.refine().params());
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kMagic)];
  std::uint64_t length = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 || length > (1u << 26)) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw DataError("checkpoint " + path.string() + ": truncated header");

  Checkpoint out;
  try {
    const json header = json::parse(text);
    if (header.at("format").get<int>() != kFormatVersion) {
      throw DataError("checkpoint " + path.string() + ": unsupported format version");
    }
    const ModelConfig config = ModelConfig::from_json(header.at("model").dump());
    // Parameters are overwritten below; the seed only affects groups absent from the file.
    out.model = std::make_unique<VideoModel>(config, 0);
    out.info.stage = header.value("stage", std::string());
    out.info.step = header.value("step", 0LL);
    out.info.epoch = header.value("epoch", 0);
    const json& groups = header.at("groups");
    if (groups.contains("coarse")) {
      read_group(in, groups["coarse"], out.model->coarse().params(), path);
      out.info.has_coarse = true;
    }
    if (groups.contains("refine")) {
      read_group(in, groups["refine"], out.model->refine().params(), path);
      out.info.has_refine = true;
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": bad header: " + e.what());
  }
  return out;
}

}  // namespace hdrv::pipeline
