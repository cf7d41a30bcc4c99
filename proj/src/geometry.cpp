#include "hdrv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hdrv/errors.hpp"
#include "hdrv/kernels.hpp"
#include "hdrv/radiometry.hpp"
#include "hdrv/reference_kernels.hpp"

namespace hdrv::geometry {

SimilarityTransform SimilarityTransform::about_point(double scale, double rotation, double cx,
                                                     double cy, double tx, double ty) {
  SimilarityTransform t{scale, rotation, 0.0, 0.0};
  double rx, ry;
  t.apply(cx, cy, rx, ry);
  t.tx = cx - rx + tx;
  t.ty = cy - ry + ty;
  return t;
}

void SimilarityTransform::apply(double x, double y, double& out_x, double& out_y) const {
  const double c = scale * std::cos(rotation), s = scale * std::sin(rotation);
  out_x = c * x - s * y + tx;
  out_y = s * x + c * y + ty;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv{1.0 / scale, -rotation, 0.0, 0.0};
  double x, y;
  inv.apply(tx, ty, x, y);
  inv.tx = -x;
  inv.ty = -y;
  return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& first) const {
  SimilarityTransform out{scale * first.scale, rotation + first.rotation, 0.0, 0.0};
  apply(first.tx, first.ty, out.tx, out.ty);
  return out;
}

Tensor warp_similarity(const Tensor& frame, const SimilarityTransform& transform) {
  if (!(transform.scale > 0.0)) throw InvalidArgument("similarity scale must be positive");
  const auto inv = transform.inverse();
  Tensor out = Tensor::like(frame);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      double sx, sy;
      inv.apply(x, y, sx, sy);
      for (int c = 0; c < frame.channels(); ++c) {
        out.at(c, y, x) = reference::bilinear_clamp(frame, c, sy, sx);
      }
    }
  }
  return out;
}

LdrFrame warp_similarity(const LdrFrame& frame, const SimilarityTransform& transform) {
  LdrFrame out = frame;
  out.pixels = warp_similarity(frame.pixels, transform);
  return out;
}

Tensor backward_warp(const Tensor& frame, const FlowField& flow) {
  return kernels::backward_warp_forward(frame, flow.displacements);
}

namespace {

constexpr int kPatchRadius = 4;

struct Keypoint {
  int x, y;
  double response;
  std::vector<double> descriptor;
};

struct Match {
  double sx, sy, dx, dy;
};

Tensor grayscale(const Tensor& rgb) {
  Tensor g(1, rgb.height(), rgb.width());
  for (int c = 0; c < rgb.channels(); ++c) {
    for (int i = 0; i < rgb.plane(); ++i) g[i] += rgb.channel(c)[i] / rgb.channels();
  }
  return g;
}

double at_clamped(const Tensor& g, int x, int y) {
  return g.at(0, std::clamp(y, 0, g.height() - 1), std::clamp(x, 0, g.width() - 1));
}

void gradients(const Tensor& g, Tensor& gx, Tensor& gy) {
  gx = Tensor::like(g);
  gy = Tensor::like(g);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      gx.at(0, y, x) = 0.5 * (at_clamped(g, x + 1, y) - at_clamped(g, x - 1, y));
      gy.at(0, y, x) = 0.5 * (at_clamped(g, x, y + 1) - at_clamped(g, x, y - 1));
    }
  }
}

Tensor box_blur(const Tensor& in, int radius) {
  Tensor tmp = Tensor::like(in), out = Tensor::like(in);
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) s += at_clamped(in, x + d, y);
      tmp.at(0, y, x) = s;
    }
  }
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) s += at_clamped(tmp, x, y + d);
      out.at(0, y, x) = s;
    }
  }
  return out;
}

std::vector<Keypoint> detect_corners(const Tensor& gray, int max_keypoints) {
  Tensor gx, gy;
  gradients(gray, gx, gy);
  Tensor xx = Tensor::like(gray), yy = Tensor::like(gray), xy = Tensor::like(gray);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    xx[i] = gx[i] * gx[i];
    yy[i] = gy[i] * gy[i];
    xy[i] = gx[i] * gy[i];
  }
  xx = box_blur(xx, 1);
  yy = box_blur(yy, 1);
  xy = box_blur(xy, 1);
  Tensor response = Tensor::like(gray);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double det = xx[i] * yy[i] - xy[i] * xy[i];
    const double tr = xx[i] + yy[i];
    response[i] = det - 0.04 * tr * tr;
  }
  // Peak over the detectable region only; clamped borders can create strong
  // spurious corners.
  const int margin = kPatchRadius + 2;
  double peak = 0.0;
  for (int y = margin; y < gray.height() - margin; ++y) {
    for (int x = margin; x < gray.width() - margin; ++x) peak = std::max(peak, response.at(0, y, x));
  }
  std::vector<Keypoint> kps;
  if (peak < 1e-12) return kps;
  for (int y = margin; y < gray.height() - margin; ++y) {
    for (int x = margin; x < gray.width() - margin; ++x) {
      const double r = response.at(0, y, x);
      if (r < 0.01 * peak) continue;
      bool is_max = true;
      for (int dy = -2; dy <= 2 && is_max; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          if ((dx || dy) && response.at(0, y + dy, x + dx) >= r &&
              !(response.at(0, y + dy, x + dx) == r && (dy > 0 || (dy == 0 && dx > 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) kps.push_back({x, y, r, {}});
    }
  }
  std::stable_sort(kps.begin(), kps.end(),
                   [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
  if (static_cast<int>(kps.size()) > max_keypoints) kps.resize(max_keypoints);
  for (auto& kp : kps) {
    auto& d = kp.descriptor;
    for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy) {
      for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
        d.push_back(gray.at(0, kp.y + dy, kp.x + dx));
      }
    }
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(d.size());
    double norm = 0.0;
    for (double& v : d) {
      v -= mean;
      norm += v * v;
    }
    norm = std::sqrt(norm) + 1e-12;
    for (double& v : d) v /= norm;
  }
  return kps;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<Match> match_keypoints(const std::vector<Keypoint>& src,
                                   const std::vector<Keypoint>& dst, double radius) {
  const auto best_for = [radius](const Keypoint& kp, const std::vector<Keypoint>& pool) {
    int best = -1;
    double best_score = 0.8;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const double ddx = pool[j].x - kp.x, ddy = pool[j].y - kp.y;
      if (ddx * ddx + ddy * ddy > radius * radius) continue;
      const double s = correlation(kp.descriptor, pool[j].descriptor);
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(j);
      }
    }
    return best;
  };
  std::vector<Match> matches;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const int j = best_for(src[i], dst);
    if (j < 0) continue;
    if (best_for(dst[j], src) != static_cast<int>(i)) continue;  // mutual
    matches.push_back({static_cast<double>(src[i].x), static_cast<double>(src[i].y),
                       static_cast<double>(dst[j].x), static_cast<double>(dst[j].y)});
  }
  return matches;
}

// Least-squares fit of q = [[a, -b], [b, a]] p + t over the given matches.
bool fit_similarity(const std::vector<Match>& m, SimilarityTransform& out) {
  if (m.size() < 2) return false;
  Eigen::MatrixXd A(2 * m.size(), 4);
  Eigen::VectorXd rhs(2 * m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    A.row(2 * i) << m[i].sx, -m[i].sy, 1.0, 0.0;
    A.row(2 * i + 1) << m[i].sy, m[i].sx, 0.0, 1.0;
    rhs(2 * i) = m[i].dx;
    rhs(2 * i + 1) = m[i].dy;
  }
  const Eigen::Vector4d p = A.colPivHouseholderQr().solve(rhs);
  const double scale = std::hypot(p(0), p(1));
  if (!(scale > 1e-6) || !p.allFinite()) return false;
  out = {scale, std::atan2(p(1), p(0)), p(2), p(3)};
  return true;
}

double residual(const SimilarityTransform& t, const Match& m) {
  double x, y;
  t.apply(m.sx, m.sy, x, y);
  return std::hypot(x - m.dx, y - m.dy);
}

// Gauss-Newton on the photometric error between src sampled through T^-1 and
// dst, over pixels whose source position stays inside the image.
SimilarityTransform refine_photometric(const Tensor& src, const Tensor& dst,
                                       const SimilarityTransform& init, int iterations) {
  Tensor sgx, sgy;
  gradients(src, sgx, sgy);
  const int h = src.height(), w = src.width();
  const auto cost_of = [&](const SimilarityTransform& inv, Eigen::Matrix4d* jtj,
                           Eigen::Vector4d* jtr) {
    const double a = inv.scale * std::cos(inv.rotation), b = inv.scale * std::sin(inv.rotation);
    double cost = 0.0;
    int count = 0;
    if (jtj) jtj->setZero();
    if (jtr) jtr->setZero();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double px = a * x - b * y + inv.tx, py = b * x + a * y + inv.ty;
        if (px < 1 || py < 1 || px > w - 2 || py > h - 2) continue;
        const double r = reference::bilinear_clamp(src, 0, py, px) - dst.at(0, y, x);
        cost += r * r;
        ++count;
        if (jtj) {
          const double ix = reference::bilinear_clamp(sgx, 0, py, px);
          const double iy = reference::bilinear_clamp(sgy, 0, py, px);
          const Eigen::Vector4d j(ix * x + iy * y, -ix * y + iy * x, ix, iy);
          *jtj += j * j.transpose();
          *jtr += j * r;
        }
      }
    }
    return count > 0 ? cost / count : 1e300;
  };
  SimilarityTransform inv = init.inverse();
  double cost = cost_of(inv, nullptr, nullptr);
  for (int it = 0; it < iterations; ++it) {
    Eigen::Matrix4d jtj;
    Eigen::Vector4d jtr;
    cost_of(inv, &jtj, &jtr);
    const Eigen::Vector4d step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    const double a = inv.scale * std::cos(inv.rotation) + step(0);
    const double b = inv.scale * std::sin(inv.rotation) + step(1);
    SimilarityTransform next{std::hypot(a, b), std::atan2(b, a), inv.tx + step(2),
                             inv.ty + step(3)};
    const double next_cost = cost_of(next, nullptr, nullptr);
    if (!(next_cost < cost)) break;
    const bool converged = step.cwiseAbs().maxCoeff() < 1e-7;
    inv = next;
    cost = next_cost;
    if (converged) break;
  }
  return inv.inverse();
}

}  // namespace

SimilarityEstimate estimate_similarity(const LdrFrame& src, const LdrFrame& dst,
                                       const SimilarityOptions& options) {
  require_same_shape(src.pixels, dst.pixels, "estimate_similarity");
  src.validate();
  dst.validate();
  const double common = std::min(src.exposure, dst.exposure);
  const Tensor src_gray = grayscale(radiometry::render_ldr(
      radiometry::ldr_to_radiance(src).pixels, common, src.gamma));
  const Tensor dst_gray = grayscale(radiometry::render_ldr(
      radiometry::ldr_to_radiance(dst).pixels, common, dst.gamma));

  SimilarityEstimate result;
  const auto src_kp = detect_corners(src_gray, options.max_keypoints);
  const auto dst_kp = detect_corners(dst_gray, options.max_keypoints);
  const auto matches = match_keypoints(src_kp, dst_kp, options.max_displacement);
  if (matches.size() < 3) {
    result.degenerate = true;
    return result;
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);
  const int iterations = std::max(100, options.iterations);
  std::vector<Match> best_inliers;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i == j) continue;
    SimilarityTransform candidate;
    if (!fit_similarity({matches[i], matches[j]}, candidate)) continue;
    std::vector<Match> inliers;
    for (const auto& m : matches) {
      if (residual(candidate, m) < options.inlier_threshold) inliers.push_back(m);
    }
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
  }
  SimilarityTransform fitted;
  if (best_inliers.size() < 3 || !fit_similarity(best_inliers, fitted)) {
    result.degenerate = true;
    return result;
  }
  result.inliers = static_cast<int>(best_inliers.size());
  result.transform = refine_photometric(src_gray, dst_gray, fitted, options.refine_iterations);
  return result;
}

}  // namespace hdrv::geometry
