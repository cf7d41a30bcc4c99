#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdrv/frames.hpp"

namespace hdrv::datagen {

// Cyclic exposure sequence; frame i uses exposures[i % period].
struct ExposureSchedule {
  int period = 2;
  std::vector<double> exposures;

  // EV +-k maps to 2^(+-k) relative to a base exposure of 1.
  static ExposureSchedule from_ev(const std::vector<double>& evs);
  void validate() const;
  double exposure_at(int frame_index) const;
  // low = smallest exposure of the schedule, high = largest, else middle.
  ExposureRole role_at(int frame_index) const;
  // Frames a reconstruction window needs on each side of the reference.
  int pair_half_width() const { return period == 2 ? 2 : 3; }
};

struct LdrSequence {
  std::vector<LdrFrame> frames;
  ExposureSchedule schedule;

  void validate() const;
  int size() const { return static_cast<int>(frames.size()); }
};

// A window of LDR inputs with ground truth for its center frame. Strided
// windows keep each frame's own exposure, so a pair carries exposures
// per frame rather than a schedule.
struct LdrsHdrPair {
  std::vector<LdrFrame> inputs;
  RadianceFrame target;
  ExposureRole reference_role = ExposureRole::kLow;
  int period = 2;
  int stride = 1;
  std::vector<int> source_indices;

  int center_index() const { return static_cast<int>(inputs.size()) / 2; }
  const LdrFrame& reference() const { return inputs[center_index()]; }
};

LdrSequence synthesize_sequence(const std::vector<RadianceFrame>& hdr_frames,
                                const ExposureSchedule& schedule, double gamma = kDefaultGamma);

struct AugmentOptions {
  double noise_sigma = 1e-3;   // std-dev in the linear (pre-division) domain
  double tone_range = 0.7;     // reference gamma exp(d), d ~ U[-range, range]
  bool flips = true;
  bool rotations = true;
  int crop = 256;              // 0 disables cropping

  static AugmentOptions identity() { return {0.0, 0.0, false, false, 0}; }
};

LdrsHdrPair augment(const LdrsHdrPair& pair, std::uint64_t seed,
                    const AugmentOptions& options = {});

struct ExposureStack {
  double exposure = 1.0;
  std::vector<LdrFrame> frames;
};

// Averages each stack, converts to radiance, and merges with the triangle
// weight 1 - |2L - 1| per channel. Pixels with zero total weight take the
// radiance of the exposure whose LDR value is nearest 0.5.
RadianceFrame merge_static_gt(const std::vector<ExposureStack>& stacks);

struct PairBuildResult {
  std::vector<LdrsHdrPair> pairs;
  std::vector<std::string> warnings;
};

// Stride-1 and stride-2 windows centered on `static_center_index`. Windows
// that leave the sequence are skipped with a warning.
PairBuildResult build_dynamic_pairs(const LdrSequence& sequence, int static_center_index,
                                    const RadianceFrame& gt);

// Window indices for `center` at `stride` with `half` frames on each side.
std::vector<int> window_indices(int center, int stride, int half);

// Procedural HDR content for tests and demos: smooth blobs, stripes and
// soft-edged rectangles over a radiance range, translated by `motion` pixels per frame, with an
// independently moving bright disk.
struct SceneSpec {
  int width = 64;
  int height = 64;
  std::uint64_t seed = 0;
  double min_radiance = 0.01;
  double max_radiance = 1.0;
  double motion_x = 0.0;
  double motion_y = 0.0;
  double object_motion = 0.0;
  int blobs = 6;
  int tiles = 12;
};

RadianceFrame render_scene(const SceneSpec& spec, int frame_index);

}  // namespace hdrv::datagen
