#include "hdrv/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hdrv/errors.hpp"
#include "hdrv/radiometry.hpp"

namespace hdrv::datagen {

ExposureSchedule ExposureSchedule::from_ev(const std::vector<double>& evs) {
  ExposureSchedule s{static_cast<int>(evs.size()), {}};
  for (double ev : evs) s.exposures.push_back(std::exp2(ev));
  s.validate();
  return s;
}

void ExposureSchedule::validate() const {
  if (period != 2 && period != 3) throw InvalidArgument("exposure period must be 2 or 3");
  if (static_cast<int>(exposures.size()) != period) {
    throw InvalidArgument("exposure count does not match the period");
  }
  for (double t : exposures) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("exposures must be positive");
  }
}

double ExposureSchedule::exposure_at(int frame_index) const {
  const int p = ((frame_index % period) + period) % period;
  return exposures[p];
}

ExposureRole ExposureSchedule::role_at(int frame_index) const {
  const double t = exposure_at(frame_index);
  const auto [lo, hi] = std::minmax_element(exposures.begin(), exposures.end());
  if (t == *lo) return ExposureRole::kLow;
  if (t == *hi) return ExposureRole::kHigh;
  return ExposureRole::kMiddle;
}

void LdrSequence::validate() const {
  schedule.validate();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].exposure != schedule.exposure_at(static_cast<int>(i))) {
      throw InvalidArgument("frame " + std::to_string(i) + " exposure does not match schedule");
    }
    require_same_shape(frames.front().pixels, frames[i].pixels, "LdrSequence");
  }
}

LdrSequence synthesize_sequence(const std::vector<RadianceFrame>& hdr_frames,
                                const ExposureSchedule& schedule, double gamma) {
  if (hdr_frames.empty()) throw InvalidArgument("synthesize_sequence: no HDR frames");
  schedule.validate();
  LdrSequence seq{{}, schedule};
  for (std::size_t i = 0; i < hdr_frames.size(); ++i) {
    hdr_frames[i].validate();
    require_same_shape(hdr_frames.front().pixels, hdr_frames[i].pixels, "synthesize_sequence");
    seq.frames.push_back(radiometry::radiance_to_ldr(
        hdr_frames[i], schedule.exposure_at(static_cast<int>(i)), gamma));
  }
  return seq;
}

namespace {

// Geometric transform applied identically to every frame of a pair.
struct Orientation {
  bool flip_x = false;
  bool flip_y = false;
  int quarter_turns = 0;
  int crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;
};

Tensor reorient(const Tensor& in, const Orientation& o) {
  Tensor t = in;
  if (o.flip_x || o.flip_y) {
    Tensor f = Tensor::like(t);
    for (int c = 0; c < t.channels(); ++c)
      for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x)
          f.at(c, y, x) = t.at(c, o.flip_y ? t.height() - 1 - y : y,
                               o.flip_x ? t.width() - 1 - x : x);
    t = std::move(f);
  }
  for (int k = 0; k < o.quarter_turns; ++k) {
    Tensor r(t.channels(), t.width(), t.height());
    for (int c = 0; c < t.channels(); ++c)
      for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x) r.at(c, y, x) = t.at(c, x, t.width() - 1 - y);
    t = std::move(r);
  }
  if (o.crop_w > 0 && (o.crop_w != t.width() || o.crop_h != t.height())) {
    Tensor c(t.channels(), o.crop_h, o.crop_w);
    for (int ch = 0; ch < t.channels(); ++ch)
      for (int y = 0; y < o.crop_h; ++y)
        for (int x = 0; x < o.crop_w; ++x) c.at(ch, y, x) = t.at(ch, y + o.crop_y, x + o.crop_x);
    t = std::move(c);
  }
  return t;
}

}  // namespace

LdrsHdrPair augment(const LdrsHdrPair& pair, std::uint64_t seed, const AugmentOptions& options) {
  if (pair.inputs.empty()) throw InvalidArgument("augment: empty pair");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  Orientation o;
  o.flip_x = options.flips && coin(rng);
  o.flip_y = options.flips && coin(rng);
  o.quarter_turns = options.rotations ? std::uniform_int_distribution<int>(0, 3)(rng) : 0;
  const int h = (o.quarter_turns % 2) ? pair.target.pixels.width() : pair.target.pixels.height();
  const int w = (o.quarter_turns % 2) ? pair.target.pixels.height() : pair.target.pixels.width();
  if (options.crop > 0) {
    o.crop_w = std::min(options.crop, w);
    o.crop_h = std::min(options.crop, h);
    o.crop_x = std::uniform_int_distribution<int>(0, w - o.crop_w)(rng);
    o.crop_y = std::uniform_int_distribution<int>(0, h - o.crop_h)(rng);
  }
  std::uniform_real_distribution<double> tone(-options.tone_range, options.tone_range);
  const double tone_gamma = options.tone_range > 0.0 ? std::exp(tone(rng)) : 1.0;

  LdrsHdrPair out = pair;
  out.target.pixels = reorient(pair.target.pixels, o);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < pair.inputs.size(); ++i) {
    LdrFrame& f = out.inputs[i];
    f.pixels = reorient(pair.inputs[i].pixels, o);
    if (options.noise_sigma > 0.0) {
      // Sensor-domain noise: sigma / t in radiance, so short exposures get noisier.
      for (auto& v : f.pixels.values()) {
        const double linear = std::pow(v, f.gamma) + options.noise_sigma * noise(rng);
        v = std::clamp(std::pow(std::max(linear, 0.0), 1.0 / f.gamma), 0.0, 1.0);
      }
    }
    if (static_cast<int>(i) == pair.center_index() && tone_gamma != 1.0) {
      for (auto& v : f.pixels.values()) v = std::pow(v, tone_gamma);
    }
  }
  return out;
}

RadianceFrame merge_static_gt(const std::vector<ExposureStack>& stacks) {
  std::vector<double> distinct;
  for (const auto& s : stacks) {
    if (s.frames.empty()) throw InvalidArgument("merge_static_gt: empty exposure stack");
    if (std::find(distinct.begin(), distinct.end(), s.exposure) == distinct.end()) {
      distinct.push_back(s.exposure);
    }
  }
  if (distinct.size() < 2) throw InvalidArgument("merge_static_gt: need at least two exposures");

  const Tensor& shape = stacks.front().frames.front().pixels;
  std::vector<Tensor> means;
  for (const auto& s : stacks) {
    Tensor mean = Tensor::like(shape);
    for (const auto& f : s.frames) {
      f.validate();
      require_same_shape(shape, f.pixels, "merge_static_gt");
      mean += f.pixels;
    }
    for (auto& v : mean.values()) v /= static_cast<double>(s.frames.size());
    means.push_back(std::move(mean));
  }

  RadianceFrame out{Tensor::like(shape)};
  for (std::size_t i = 0; i < shape.size(); ++i) {
    double num = 0.0, den = 0.0;
    double fallback = 0.0, best_distance = 2.0;
    for (std::size_t k = 0; k < stacks.size(); ++k) {
      const double l = means[k][i];
      const double gamma = stacks[k].frames.front().gamma;
      const double radiance = std::pow(l, gamma) / stacks[k].exposure;
      const double w = 1.0 - std::abs(2.0 * l - 1.0);
      num += w * radiance;
      den += w;
      if (std::abs(l - 0.5) < best_distance) {
        best_distance = std::abs(l - 0.5);
        fallback = radiance;
      }
    }
    out.pixels[i] = den > 0.0 ? num / den : fallback;
  }
  return out;
}

std::vector<int> window_indices(int center, int stride, int half) {
  std::vector<int> idx;
  for (int k = -half; k <= half; ++k) idx.push_back(center + k * stride);
  return idx;
}

PairBuildResult build_dynamic_pairs(const LdrSequence& sequence, int static_center_index,
                                    const RadianceFrame& gt) {
  sequence.validate();
  PairBuildResult result;
  const int half = sequence.schedule.pair_half_width();
  if (static_center_index < 0 || static_center_index >= sequence.size()) {
    result.warnings.push_back("center index " + std::to_string(static_center_index) +
                              " outside the sequence; no pairs");
    return result;
  }
  require_same_shape(sequence.frames[static_center_index].pixels, gt.pixels,
                     "build_dynamic_pairs");
  for (int stride : {1, 2}) {
    const auto idx = window_indices(static_center_index, stride, half);
    if (idx.front() < 0 || idx.back() >= sequence.size()) {
      result.warnings.push_back("stride-" + std::to_string(stride) + " window around frame " +
                                std::to_string(static_center_index) +
                                " exceeds the sequence; skipped");
      continue;
    }
    LdrsHdrPair pair;
    for (int i : idx) pair.inputs.push_back(sequence.frames[i]);
    pair.target = gt;
    pair.reference_role = sequence.schedule.role_at(static_center_index);
    pair.period = sequence.schedule.period;
    pair.stride = stride;
    pair.source_indices = idx;
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

RadianceFrame render_scene(const SceneSpec& spec, int frame_index) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Blob {
    double x, y, sigma, amp;
    double color[3];
  };
  std::vector<Blob> blobs;
  for (int b = 0; b < spec.blobs; ++b) {
    Blob blob{u(rng) * spec.width, u(rng) * spec.height,
              (0.08 + 0.2 * u(rng)) * std::min(spec.width, spec.height), u(rng), {}};
    for (double& c : blob.color) c = 0.5 + 0.5 * u(rng);
    blobs.push_back(blob);
  }
  const double freq_x = 2.0 * std::numbers::pi * (1.0 + 2.0 * u(rng)) / spec.width;
  const double freq_y = 2.0 * std::numbers::pi * (1.0 + 2.0 * u(rng)) / spec.height;
  const double phase = 2.0 * std::numbers::pi * u(rng);
  const double disk_x0 = u(rng) * spec.width, disk_y0 = u(rng) * spec.height;
  const double disk_r = 0.12 * std::min(spec.width, spec.height);
  struct Tile {
    double x0, y0, x1, y1, amp;
  };
  std::vector<Tile> tiles;
  for (int t = 0; t < spec.tiles; ++t) {
    const double w = (0.06 + 0.14 * u(rng)) * spec.width, h = (0.06 + 0.14 * u(rng)) * spec.height;
    const double x0 = u(rng) * spec.width, y0 = u(rng) * spec.height;
    tiles.push_back({x0, y0, x0 + w, y0 + h, 0.5 * (u(rng) - 0.5)});
  }
  const auto edge = [](double d) { return 1.0 / (1.0 + std::exp(-d / 0.6)); };

  const double shift_x = spec.motion_x * frame_index, shift_y = spec.motion_y * frame_index;
  const double disk_x = disk_x0 + spec.object_motion * frame_index;
  RadianceFrame out{Tensor(3, spec.height, spec.width)};
  const double lo = std::log(spec.min_radiance), hi = std::log(spec.max_radiance);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double sx = x - shift_x, sy = y - shift_y;
      for (int c = 0; c < 3; ++c) {
        double v = 0.3 + 0.15 * std::sin(freq_x * sx + phase + 0.7 * c) * std::cos(freq_y * sy);
        for (const auto& b : blobs) {
          const double d2 = (sx - b.x) * (sx - b.x) + (sy - b.y) * (sy - b.y);
          v += b.amp * b.color[c] * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
        }
        for (const auto& t : tiles) {
          v += t.amp * edge(sx - t.x0) * edge(t.x1 - sx) * edge(sy - t.y0) * edge(t.y1 - sy);
        }
        const double dd = std::hypot(x - disk_x, y - disk_y0);
        const double disk = 1.0 / (1.0 + std::exp((dd - disk_r) / 1.5));
        v = std::clamp(v / 2.0, 0.0, 1.0);
        v = std::max(v, disk);
        out.pixels.at(c, y, x) = std::exp(lo + (hi - lo) * v);
      }
    }
  }
  return out;
}

}  // namespace hdrv::datagen
