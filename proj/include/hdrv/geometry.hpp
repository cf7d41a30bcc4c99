#pragma once

#include <cstdint>

#include "hdrv/frames.hpp"

namespace hdrv::geometry {

// Maps a source pixel position p to s * R(rotation) * p + translation, in
// pixel coordinates with x along columns and y along rows.
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;

  static SimilarityTransform identity() { return {}; }
  // Rotation about `(cx, cy)` followed by a translation.
  static SimilarityTransform about_point(double scale, double rotation, double cx, double cy,
                                         double tx = 0.0, double ty = 0.0);

  void apply(double x, double y, double& out_x, double& out_y) const;
  SimilarityTransform inverse() const;
  // (*this) after `first`.
  SimilarityTransform compose(const SimilarityTransform& first) const;
};

struct SimilarityOptions {
  std::uint64_t seed = 0;
  int iterations = 200;            // consensus iterations, at least 100
  double inlier_threshold = 2.0;   // pixels
  int max_keypoints = 400;
  double max_displacement = 48.0;  // match search radius in pixels
  int refine_iterations = 30;      // photometric Gauss-Newton steps
};

struct SimilarityEstimate {
  SimilarityTransform transform;
  bool degenerate = false;  // identity returned; no matchable structure
  int inliers = 0;
};

// Estimates T such that warp_similarity(src, T) approximates dst. Both frames
// are first re-rendered at the smaller of the two exposures.
SimilarityEstimate estimate_similarity(const LdrFrame& src, const LdrFrame& dst,
                                       const SimilarityOptions& options = {});

// output(q) = bilinear(frame, T^-1(q)), clamped to the edge.
Tensor warp_similarity(const Tensor& frame, const SimilarityTransform& transform);
LdrFrame warp_similarity(const LdrFrame& frame, const SimilarityTransform& transform);

// output(p) = bilinear(frame, p + flow(p)), clamped to the edge.
Tensor backward_warp(const Tensor& frame, const FlowField& flow);

}  // namespace hdrv::geometry
