#include "hdrv/reconstruction.hpp"

#include <algorithm>
#include <set>

#include "hdrv/errors.hpp"
#include "hdrv/geometry.hpp"

namespace hdrv::reconstruction {

namespace {

int half_width(int period) { return period == 2 ? 2 : 3; }

// Nearest in-range frame with the same exposure as the missing index.
int substitute(int j, int length, int period) {
  while (j < 0) j += period;
  while (j >= length) j -= period;
  return j;
}

refine::PcdOverrides zero_offsets(int height, int width) {
  refine::PcdOverrides o;
  for (int l = 0; l < refine::RefineConfig::kLevels; ++l) {
    o.level_offsets[l] = Tensor(2 * nn::DeformConv2d::kTaps, height >> l, width >> l);
  }
  o.cascade_offsets = Tensor(2 * nn::DeformConv2d::kTaps, height, width);
  return o;
}

}  // namespace

int minimum_length(int period) { return 2 * half_width(period) + 1; }

std::vector<int> dependency_window(int index, int length, int period) {
  const int half = half_width(period);
  std::set<int> deps;
  if (index - half >= 0 && index + half < length) {
    for (int j = index - half; j <= index + half; ++j) deps.insert(j);
  } else {
    for (int j = index - 1; j <= index + 1; ++j) deps.insert(substitute(j, length, period));
  }
  return {deps.begin(), deps.end()};
}

std::vector<ReconstructedFrame> reconstruct_video(const pipeline::VideoModel& model,
                                                  const datagen::LdrSequence& sequence,
                                                  const ReconstructOptions& options) {
  sequence.validate();
  const int period = sequence.schedule.period;
  if (period != model.config().period) {
    throw DataError("sequence period " + std::to_string(period) + " does not match the model period " +
                    std::to_string(model.config().period));
  }
  const int n = sequence.size();
  if (n < minimum_length(period)) {
    throw DataError("sequence too short: " + std::to_string(n) + " frames, period " +
                    std::to_string(period) + " needs at least " + std::to_string(minimum_length(period)));
  }
  const int height = sequence.frames.front().pixels.height();
  const int width = sequence.frames.front().pixels.width();

  coarse::CoarseOverrides flow_oracle;
  refine::RefineOverrides offset_oracle;
  if (options.oracle_zero_motion) {
    flow_oracle.flow_to_prev = Tensor(2, height, width);
    flow_oracle.flow_to_next = Tensor(2, height, width);
    offset_oracle.prev = zero_offsets(height, width);
    offset_oracle.next = zero_offsets(height, width);
  }
  const coarse::CoarseOverrides* flows = options.oracle_zero_motion ? &flow_oracle : nullptr;
  const refine::RefineOverrides* offsets = options.oracle_zero_motion ? &offset_oracle : nullptr;

  const ag::NoGradGuard no_grad;
  const int half = half_width(period);
  std::vector<ReconstructedFrame> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    ReconstructedFrame frame;
    frame.index = i;
    frame.role = sequence.schedule.role_at(i);
    const LdrFrame& ref = sequence.frames[i];
    const auto gather = [&](int first, int last) {
      std::vector<LdrFrame> window;
      for (int j = first; j <= last; ++j) {
        const LdrFrame& f = sequence.frames[substitute(j, n, period)];
        if (options.global_alignment && j != i) {
          geometry::SimilarityOptions so;
          so.seed = static_cast<std::uint64_t>(i) * 131 + static_cast<std::uint64_t>(j - first);
          const auto est = geometry::estimate_similarity(f, ref, so);
          window.push_back(geometry::warp_similarity(f, est.transform));
        } else {
          window.push_back(f);
        }
      }
      return window;
    };

    if (i - half >= 0 && i + half < n) {
      const auto window = gather(i - 2, i + 2);
      const auto triplet = pipeline::coarse_triplet(model, window, flows);
      const auto refined = model.refine().forward(triplet, ref, frame.role, offsets);
      frame.coarse.pixels = triplet[1].value();
      frame.hdr.pixels = refined.merged.value();
    } else {
      const auto window = gather(i - 1, i + 1);
      frame.coarse.pixels = model.coarse().forward(window[0], window[1], window[2], flows).hdr.value();
      frame.hdr = frame.coarse;
      frame.coarse_only = true;
    }
    if (!frame.hdr.pixels.all_finite()) {
      throw NumericalError("reconstruction produced non-finite values at frame " + std::to_string(i));
    }
    out.push_back(std::move(frame));
  }
  return out;
}

}  // namespace hdrv::reconstruction
