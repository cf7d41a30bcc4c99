#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hdrv/datagen.hpp"
#include "hdrv/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run_cli(const std::string& args, const fs::path& workdir) {
  const fs::path log = workdir / "cli.log";
  const std::string cmd = std::string("\"") + HDRV_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hdrv_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

json tiny_train_config(const std::string& stage) {
  return {{"stage", stage},     {"epochs", 1},       {"batch_size", 2},
          {"augment", false},   {"max_steps", 2},    {"model", {{"period", 2}, {"scale", 0.125}}}};
}

}  // namespace

TEST(Cli, SynthMapsEvToExposures) {
  const auto dir = fresh_dir("synth");
  const auto r = run_cli("--output " + (dir / "seq").string() +
                          " synth --procedural 3 --width 16 --height 16 --schedule 2exp --ev -2,2",
                      dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto m = json::parse(slurp(dir / "seq" / "manifest.json"));
  const auto& seq = m["sequences"][0];
  EXPECT_EQ(seq["exposures"], json::array({0.25, 4.0}));
  ASSERT_EQ(seq["frames"].size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(fs::exists(dir / "seq" / seq["frames"][i]["ldr"].get<std::string>()));
    EXPECT_DOUBLE_EQ(seq["frames"][i]["exposure"].get<double>(), i % 2 == 0 ? 0.25 : 4.0);
  }
}

TEST(Cli, SynthFromHdrDirectory) {
  const auto dir = fresh_dir("synth_input");
  fs::create_directories(dir / "hdr");
  hdrv::datagen::SceneSpec spec;
  spec.width = spec.height = 8;
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "f%02d.exr", i);
    hdrv::io::write_exr(dir / "hdr" / name, hdrv::datagen::render_scene(spec, i).pixels);
  }
  const auto r = run_cli("--output " + (dir / "out").string() + " synth --input " + (dir / "hdr").string() +
                          " --schedule 3exp --ev -3,0,3",
                      dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto m = json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(m["sequences"][0]["frames"].size(), 4u);
  EXPECT_EQ(m["sequences"][0]["period"], 3);
}

TEST(Cli, UsageErrorsExitOne) {
  const auto dir = fresh_dir("usage");
  EXPECT_EQ(run_cli("", dir).code, 1);
  EXPECT_EQ(run_cli("synth --bogus", dir).code, 1);
  EXPECT_EQ(run_cli("--device cuda:0 synth --procedural 2", dir).code, 1);
  EXPECT_EQ(run_cli("--output " + dir.string() + " synth --procedural 2 --ev -2,0,2", dir).code, 1);
}

TEST(Cli, ReconstructShortSequenceExitsTwo) {
  const auto dir = fresh_dir("short");
  ASSERT_EQ(run_cli("--output " + (dir / "seq").string() + " synth --procedural 4 --width 16 --height 16", dir).code, 0);
  write_json(dir / "train.json", tiny_train_config("coarse"));
  // A 5-frame sequence to obtain a checkpoint.
  ASSERT_EQ(run_cli("--output " + (dir / "seq5").string() + " synth --procedural 5 --width 16 --height 16", dir).code, 0);
  const auto t = run_cli("--config " + (dir / "train.json").string() + " --output " + (dir / "ckpt").string() +
                          " train --manifest " + (dir / "seq5" / "manifest.json").string(),
                      dir);
  ASSERT_EQ(t.code, 0) << t.output;
  const auto r = run_cli("--output " + (dir / "rec").string() + " reconstruct --checkpoint " +
                          (dir / "ckpt" / "coarse_final.ckpt").string() + " --manifest " +
                          (dir / "seq" / "manifest.json").string(),
                      dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("sequence too short"), std::string::npos) << r.output;
}

TEST(Cli, TrainReconstructEvalRoundTrip) {
  const auto dir = fresh_dir("flow");
  ASSERT_EQ(run_cli("--output " + (dir / "seq").string() + " synth --procedural 6 --width 16 --height 16 --motion 0.5",
                 dir).code, 0);
  const std::string manifest = (dir / "seq" / "manifest.json").string();
  write_json(dir / "coarse.json", tiny_train_config("coarse"));
  write_json(dir / "refine.json", tiny_train_config("refine"));

  const auto missing = run_cli("--config " + (dir / "refine.json").string() + " --output " + (dir / "r").string() +
                                " train --manifest " + manifest,
                            dir);
  EXPECT_EQ(missing.code, 1) << missing.output;

  ASSERT_EQ(run_cli("--config " + (dir / "coarse.json").string() + " --output " + (dir / "c").string() +
                     " train --manifest " + manifest,
                 dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "c" / "coarse_curve.csv"));
  const auto refine = run_cli("--config " + (dir / "refine.json").string() + " --output " + (dir / "r").string() +
                               " train --manifest " + manifest + " --init " + (dir / "c" / "coarse_final.ckpt").string(),
                           dir);
  ASSERT_EQ(refine.code, 0) << refine.output;

  const auto rec = run_cli("--output " + (dir / "pred").string() + " reconstruct --checkpoint " +
                            (dir / "r" / "refine_final.ckpt").string() + " --manifest " + manifest,
                        dir);
  ASSERT_EQ(rec.code, 0) << rec.output;
  EXPECT_TRUE(fs::exists(dir / "pred" / "preview_0000.png"));
  const auto meta = json::parse(slurp(dir / "pred" / "reconstruction.json"));
  ASSERT_EQ(meta["frames"].size(), 6u);

  const auto ev = run_cli("--output " + (dir / "eval").string() + " eval --plot --pred " + (dir / "pred").string() +
                           " --gt " + (dir / "seq").string() + " --manifest " + manifest,
                       dir);
  ASSERT_EQ(ev.code, 0) << ev.output;
  const auto report = json::parse(slurp(dir / "eval" / "eval_report.json"));
  EXPECT_EQ(report["frames"].size(), 6u);
  EXPECT_FALSE(report["aggregates"]["low"].is_null());
  EXPECT_TRUE(report["aggregates"]["middle"].is_null());
  EXPECT_TRUE(fs::exists(dir / "eval" / "psnr_mu.svg"));
}

TEST(Cli, EvalOnIdenticalDirectoriesIsCapped) {
  const auto dir = fresh_dir("eval_same");
  ASSERT_EQ(run_cli("--output " + (dir / "seq").string() + " synth --procedural 3 --width 8 --height 8", dir).code, 0);
  const auto r = run_cli("--output " + (dir / "eval").string() + " eval --pred " + (dir / "seq").string() + " --gt " +
                          (dir / "seq").string(),
                      dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = json::parse(slurp(dir / "eval" / "eval_report.json"));
  EXPECT_DOUBLE_EQ(report["aggregates"]["all"].get<double>(), 99.0);
  EXPECT_EQ(report["frames"][0]["role"], "unknown");
}

TEST(Cli, DivergentTrainingExitsThree) {
  const auto dir = fresh_dir("diverge");
  ASSERT_EQ(run_cli("--output " + (dir / "seq").string() + " synth --procedural 5 --width 16 --height 16", dir).code, 0);
  auto cfg = tiny_train_config("coarse");
  cfg["learning_rate"] = 1e300;
  cfg["max_steps"] = 4;
  cfg["epochs"] = 4;
  cfg["batch_size"] = 1;
  write_json(dir / "bad.json", cfg);
  const auto r = run_cli("--config " + (dir / "bad.json").string() + " --output " + (dir / "c").string() +
                          " train --manifest " + (dir / "seq" / "manifest.json").string(),
                      dir);
  EXPECT_EQ(r.code, 3) << r.output;
}
