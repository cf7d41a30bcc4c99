#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hdrv/datagen.hpp"
#include "hdrv/errors.hpp"
#include "hdrv/evaluation.hpp"
#include "hdrv/image_io.hpp"
#include "hdrv/manifest.hpp"
#include "hdrv/radiometry.hpp"
#include "hdrv/reconstruction.hpp"
#include "hdrv/training.hpp"

namespace fs = std::filesystem;
using namespace hdrv;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output = ".";
  std::string device = "cpu";
};

std::string frame_name(const std::string& prefix, int i, const std::string& ext) {
  std::ostringstream s;
  s << prefix << std::setw(4) << std::setfill('0') << i << ext;
  return s.str();
}

std::vector<fs::path> hdr_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && io::is_hdr_path(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const manifest::SequenceEntry& pick_sequence(const manifest::Manifest& m, const std::string& name) {
  if (!name.empty()) return m.sequence(name);
  if (m.sequences.empty()) throw DataError("manifest has no sequences");
  return m.sequences.front();
}

// synth: HDR sources + exposure schedule -> LDR frames, GT copies and a manifest.
struct SynthArgs {
  std::string input;
  int procedural = 0;
  int width = 64, height = 64;
  double motion = 1.0;
  std::string schedule = "2exp";
  std::vector<double> ev;
  double gamma = kDefaultGamma;
  std::string name = "synth";
};

int run_synth(const Globals& g, const SynthArgs& a) {
  const int period = a.schedule == "2exp" ? 2 : 3;
  std::vector<double> evs = a.ev;
  if (evs.empty()) evs = period == 2 ? std::vector<double>{-2, 2} : std::vector<double>{-2, 0, 2};
  if (static_cast<int>(evs.size()) != period) {
    throw ConfigError("--ev needs " + std::to_string(period) + " values for schedule " + a.schedule);
  }
  const auto schedule = datagen::ExposureSchedule::from_ev(evs);

  std::vector<RadianceFrame> hdr;
  if (!a.input.empty()) {
    for (const auto& p : hdr_files(a.input)) hdr.push_back({io::read_frame(p)});
  } else if (a.procedural > 0) {
    datagen::SceneSpec spec;
    spec.width = a.width;
    spec.height = a.height;
    spec.seed = g.seed.value_or(0);
    spec.motion_x = a.motion;
    spec.object_motion = 2.0 * a.motion;
    for (int i = 0; i < a.procedural; ++i) hdr.push_back(datagen::render_scene(spec, i));
  } else {
    throw ConfigError("synth needs --input DIR or --procedural K");
  }
  if (hdr.empty()) throw DataError("no HDR frames found in " + a.input);

  const auto sequence = datagen::synthesize_sequence(hdr, schedule, a.gamma);
  const fs::path out = g.output;
  fs::create_directories(out);
  manifest::Manifest m;
  manifest::SequenceEntry seq;
  seq.name = a.name;
  seq.period = period;
  seq.exposures = schedule.exposures;
  seq.gamma = a.gamma;
  for (int i = 0; i < sequence.size(); ++i) {
    const std::string ldr = frame_name("ldr_", i, ".png");
    const std::string gt = frame_name("hdr_", i, ".exr");
    io::write_frame(out / ldr, sequence.frames[i].pixels);
    io::write_frame(out / gt, hdr[i].pixels);
    seq.frames.push_back({i, ldr, sequence.frames[i].exposure, gt});
  }
  const int half = schedule.pair_half_width();
  for (int c = half; c + half < sequence.size(); ++c) seq.pairs.push_back({c, 1});
  m.sequences.push_back(seq);
  manifest::save(m, out / "manifest.json");
  std::cout << "wrote " << sequence.size() << " frames and " << seq.pairs.size() << " pairs to "
            << (out / "manifest.json").string() << "\n";
  return kOk;
}

struct TrainArgs {
  std::string manifest;
  std::string init;
  std::string stage;
};

int run_train(const Globals& g, const TrainArgs& a) {
  // Fields absent from the config file take the defaults of the chosen stage.
  nlohmann::json doc = nlohmann::json::object();
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw ConfigError("cannot read config " + g.config);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + g.config + ": " + e.what());
    }
  }
  if (!a.stage.empty()) doc["stage"] = a.stage;
  auto config = training::TrainConfig::from_json(doc.dump());
  if (g.seed) config.seed = *g.seed;
  std::optional<fs::path> init;
  if (!a.init.empty()) init = a.init;
  training::TrainHooks hooks;
  hooks.on_epoch = [](const training::TrainProgress& p) {
    std::cout << "epoch " << p.epoch + 1 << " step " << p.step << " lr " << p.learning_rate
              << " loss " << p.loss << "\n";
  };
  hooks.on_warning = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
  const auto path = training::train_stage(config, a.manifest, g.output, init, hooks);
  std::cout << "checkpoint " << path.string() << "\n";
  return kOk;
}

struct ReconstructArgs {
  std::string checkpoint;
  std::string manifest;
  std::string sequence;
  bool align = false;
};

int run_reconstruct(const Globals& g, const ReconstructArgs& a) {
  const auto m = manifest::load(a.manifest);
  const auto& entry = pick_sequence(m, a.sequence);
  const auto sequence = manifest::load_sequence(m, entry);
  const int needed = reconstruction::minimum_length(entry.period);
  if (sequence.size() < needed) {
    throw DataError("sequence too short: " + std::to_string(sequence.size()) + " frames, need " +
                    std::to_string(needed));
  }
  const auto ckpt = pipeline::load_checkpoint(a.checkpoint);
  if (!ckpt.info.has_coarse) throw ConfigError("checkpoint has no coarse parameters");

  reconstruction::ReconstructOptions options;
  options.global_alignment = a.align;
  const auto start = std::chrono::steady_clock::now();
  const auto frames = reconstruction::reconstruct_video(*ckpt.model, sequence, options);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const fs::path out = g.output;
  fs::create_directories(out);
  nlohmann::json meta{{"sequence", entry.name},
                      {"runtime_ms_per_frame", ms / frames.size()},
                      {"refined", ckpt.info.has_refine},
                      {"frames", nlohmann::json::array()}};
  for (const auto& f : frames) {
    const std::string hdr = frame_name("pred_", f.index, ".exr");
    const std::string preview = frame_name("preview_", f.index, ".png");
    io::write_exr(out / hdr, f.hdr.pixels);
    io::write_png(out / preview, radiometry::display_tonemap(f.hdr).pixels);
    meta["frames"].push_back({{"index", f.index},
                              {"role", to_string(f.role)},
                              {"hdr", hdr},
                              {"preview", preview},
                              {"coarse_only", f.coarse_only}});
  }
  std::ofstream(out / "reconstruction.json") << meta.dump(2) << "\n";
  std::cout << "reconstructed " << frames.size() << " frames into " << out.string() << "\n";
  return kOk;
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string manifest;
  std::string sequence;
  bool plot = false;
};

void write_plot(const fs::path& path, const evaluation::EvalReport& report) {
  const int bar = 12, height = 200;
  const int width = std::max<int>(1, report.frames.size()) * bar + 40;
  std::ofstream svg(path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height + 20
      << "\">\n";
  for (std::size_t i = 0; i < report.frames.size(); ++i) {
    const double h = std::clamp(report.frames[i].psnr_mu / evaluation::kPsnrCap, 0.0, 1.0) * height;
    svg << "  <rect x=\"" << 20 + i * bar << "\" y=\"" << height - h << "\" width=\"" << bar - 2
        << "\" height=\"" << h << "\" fill=\"steelblue\"><title>frame " << report.frames[i].index
        << ": " << report.frames[i].psnr_mu << " dB</title></rect>\n";
  }
  svg << "</svg>\n";
}

int run_eval(const Globals& g, const EvalArgs& a) {
  const auto pred_files = hdr_files(a.pred);
  const auto gt_files = hdr_files(a.gt);
  if (pred_files.size() != gt_files.size()) {
    throw DataError("prediction and ground-truth directories hold " + std::to_string(pred_files.size()) +
                    " and " + std::to_string(gt_files.size()) + " frames");
  }
  std::vector<RadianceFrame> pred, gt;
  for (const auto& p : pred_files) pred.push_back({io::read_frame(p)});
  for (const auto& p : gt_files) gt.push_back({io::read_frame(p)});

  std::vector<std::optional<ExposureRole>> roles(pred.size());
  if (!a.manifest.empty()) {
    const auto m = manifest::load(a.manifest);
    const auto schedule = pick_sequence(m, a.sequence).schedule();
    for (std::size_t i = 0; i < roles.size(); ++i) roles[i] = schedule.role_at(static_cast<int>(i));
  }
  const auto report = evaluation::evaluate(pred, gt, roles);
  const fs::path out = g.output;
  fs::create_directories(out);
  std::ofstream(out / "eval_report.json") << report.to_json() << "\n";
  if (a.plot) write_plot(out / "psnr_mu.svg", report);
  std::cout << "mean mu-law PSNR " << report.all.value_or(0.0) << " dB over " << pred.size() << " frames\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDR video reconstruction from alternating-exposure LDR sequences"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--output", g.output, "Output directory");
  app.add_option("--device", g.device, "Compute device (cpu)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Render an alternating-exposure LDR sequence from HDR frames");
  synth_cmd->add_option("--input", synth.input, "Directory of HDR frames (.exr, .hdr)");
  synth_cmd->add_option("--procedural", synth.procedural, "Render K procedural frames instead");
  synth_cmd->add_option("--width", synth.width);
  synth_cmd->add_option("--height", synth.height);
  synth_cmd->add_option("--motion", synth.motion, "Procedural motion in pixels per frame");
  synth_cmd->add_option("--schedule", synth.schedule)->check(CLI::IsMember({"2exp", "3exp"}));
  synth_cmd->add_option("--ev", synth.ev, "Exposure values, e.g. -2,2")->delimiter(',');
  synth_cmd->add_option("--gamma", synth.gamma);
  synth_cmd->add_option("--name", synth.name, "Sequence name in the manifest");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one stage from a manifest");
  train_cmd->add_option("--manifest", train.manifest)->required();
  train_cmd->add_option("--init", train.init, "Prerequisite or resume checkpoint");
  train_cmd->add_option("--stage", train.stage)->check(CLI::IsMember({"coarse", "refine", "finetune"}));

  ReconstructArgs rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct HDR frames for a sequence");
  rec_cmd->add_option("--checkpoint", rec.checkpoint)->required();
  rec_cmd->add_option("--manifest", rec.manifest)->required();
  rec_cmd->add_option("--sequence", rec.sequence, "Sequence name (default: first)");
  rec_cmd->add_flag("--align", rec.align, "Similarity-align window frames first");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--pred", ev.pred)->required();
  eval_cmd->add_option("--gt", ev.gt)->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Manifest supplying exposure roles");
  eval_cmd->add_option("--sequence", ev.sequence);
  eval_cmd->add_flag("--plot", ev.plot, "Also write an SVG of per-frame PSNR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (g.device != "cpu") throw ConfigError("unsupported device '" + g.device + "' (only cpu)");
    if (*synth_cmd) return run_synth(g, synth);
    if (*train_cmd) return run_train(g, train);
    if (*rec_cmd) return run_reconstruct(g, rec);
    if (*eval_cmd) return run_eval(g, ev);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
