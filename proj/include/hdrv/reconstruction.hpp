#pragma once

#include <vector>

#include "hdrv/datagen.hpp"
#include "hdrv/pipeline.hpp"

namespace hdrv::reconstruction {

struct ReconstructOptions {
  // Similarity-align every window frame to its reference before the networks.
  bool global_alignment = false;
  // Replace predicted flows and offsets with zeros (static-scene oracle).
  bool oracle_zero_motion = false;
};

struct ReconstructedFrame {
  int index = 0;
  ExposureRole role = ExposureRole::kLow;
  RadianceFrame hdr;     // final output
  RadianceFrame coarse;  // H^c
  bool coarse_only = false;
};

// Minimum sequence length: 2 * half + 1 where half is 2 (two exposures) or 3.
int minimum_length(int period);

// The frames frame `index` depends on: [index - half, index + half] clipped
// to the sequence, plus same-exposure substitutes at the boundaries.
std::vector<int> dependency_window(int index, int length, int period);

// One output per input frame. Frames without a full window emit H^c only.
// Throws DataError("sequence too short ...") below minimum_length.
std::vector<ReconstructedFrame> reconstruct_video(const pipeline::VideoModel& model,
                                                  const datagen::LdrSequence& sequence,
                                                  const ReconstructOptions& options = {});

}  // namespace hdrv::reconstruction
