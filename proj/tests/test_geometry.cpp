#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hdrv/datagen.hpp"
#include "hdrv/errors.hpp"
#include "hdrv/geometry.hpp"
#include "hdrv/radiometry.hpp"
#include "support.hpp"

using namespace hdrv;
namespace geo = hdrv::geometry;
using hdrv::testing::max_abs_diff;
using hdrv::testing::random_tensor;

namespace {

LdrFrame textured_frame(double exposure, int size = 96) {
  datagen::SceneSpec spec;
  spec.width = size;
  spec.height = size;
  spec.seed = 5;
  spec.blobs = 10;
  spec.max_radiance = 2.0;
  return radiometry::radiance_to_ldr(datagen::render_scene(spec, 0), exposure, kDefaultGamma);
}

// Integer-shift gather with clamped borders.
Tensor shift_gather(const Tensor& src, int dx, int dy) {
  Tensor out = Tensor::like(src);
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x)
        out.at(c, y, x) = src.at(c, std::clamp(y + dy, 0, src.height() - 1), std::clamp(x + dx, 0, src.width() - 1));
  return out;
}

TEST(SimilarityTransform, InverseComposesToIdentity) {
  const auto t = geo::SimilarityTransform::about_point(1.1, 0.3, 10.0, 5.0, 2.0, -1.0);
  const auto id = t.compose(t.inverse());
  EXPECT_NEAR(id.scale, 1.0, 1e-12);
  EXPECT_NEAR(id.rotation, 0.0, 1e-12);
  EXPECT_NEAR(id.tx, 0.0, 1e-9);
  EXPECT_NEAR(id.ty, 0.0, 1e-9);
}

TEST(WarpSimilarity, IdentityAndIntegerShift) {
  std::mt19937_64 rng(1);
  const Tensor img = random_tensor(3, 7, 9, rng, 0.0, 1.0);
  EXPECT_EQ(max_abs_diff(geo::warp_similarity(img, geo::SimilarityTransform::identity()), img), 0.0);
  // Content moves one column right: out(x) = src(x - 1), left edge duplicated.
  const Tensor shifted = geo::warp_similarity(img, {1.0, 0.0, 1.0, 0.0});
  EXPECT_EQ(max_abs_diff(shifted, shift_gather(img, -1, 0)), 0.0);
}

TEST(WarpSimilarity, HalfPixelIsMidpoint) {
  Tensor img(1, 1, 2);
  img.at(0, 0, 0) = 0.2;
  img.at(0, 0, 1) = 0.8;
  const Tensor out = geo::warp_similarity(img, {1.0, 0.0, -0.5, 0.0});
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0), 0.5);
}

TEST(BackwardWarp, ZeroFlowIdentityAndIntegerShift) {
  std::mt19937_64 rng(2);
  const Tensor img = random_tensor(3, 8, 10, rng, 0.0, 1.0);
  EXPECT_LE(max_abs_diff(geo::backward_warp(img, {Tensor(2, 8, 10)}), img), 1e-7);
  FlowField flow{Tensor(2, 8, 10)};
  for (int i = 0; i < flow.displacements.plane(); ++i) flow.displacements[i] = 2.0;
  EXPECT_EQ(max_abs_diff(geo::backward_warp(img, flow), shift_gather(img, 2, 0)), 0.0);
  EXPECT_THROW(geo::backward_warp(img, {Tensor(2, 8, 9)}), InvalidArgument);
}

TEST(BackwardWarp, LinearInImage) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(2, 6, 6, rng), y = random_tensor(2, 6, 6, rng);
  const FlowField f{random_tensor(2, 6, 6, rng, -3.0, 3.0)};
  Tensor combo = Tensor::like(x);
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = 0.3 * x[i] - 1.7 * y[i];
  const Tensor wx = geo::backward_warp(x, f), wy = geo::backward_warp(y, f);
  Tensor expected = Tensor::like(x);
  for (std::size_t i = 0; i < x.size(); ++i) expected[i] = 0.3 * wx[i] - 1.7 * wy[i];
  EXPECT_LT(max_abs_diff(geo::backward_warp(combo, f), expected), 1e-6);
}

TEST(EstimateSimilarity, SameFrameGivesIdentity) {
  const LdrFrame f = textured_frame(1.0);
  const auto est = geo::estimate_similarity(f, f);
  EXPECT_FALSE(est.degenerate);
  EXPECT_NEAR(est.transform.tx, 0.0, 0.05);
  EXPECT_NEAR(est.transform.ty, 0.0, 0.05);
  EXPECT_NEAR(est.transform.rotation, 0.0, 1e-3);
  EXPECT_NEAR(est.transform.scale, 1.0, 1e-3);
}

TEST(EstimateSimilarity, RecoversTranslationAcrossExposures) {
  const LdrFrame src = textured_frame(0.5);
  LdrFrame dst = geo::warp_similarity(textured_frame(2.0), {1.0, 0.0, 3.0, 0.0});
  const auto est = geo::estimate_similarity(src, dst);
  ASSERT_FALSE(est.degenerate);
  EXPECT_NEAR(est.transform.tx, 3.0, 0.2);
  EXPECT_NEAR(est.transform.ty, 0.0, 0.2);
}

TEST(EstimateSimilarity, RecoversTranslationsUpToFivePixels) {
  const LdrFrame src = textured_frame(1.0);
  for (const auto& [tx, ty] : {std::pair{5.0, 0.0}, {-2.5, 4.0}, {1.3, -3.7}}) {
    const LdrFrame dst = geo::warp_similarity(src, {1.0, 0.0, tx, ty});
    const auto est = geo::estimate_similarity(src, dst);
    EXPECT_NEAR(est.transform.tx, tx, 0.2);
    EXPECT_NEAR(est.transform.ty, ty, 0.2);
  }
}

TEST(EstimateSimilarity, RecoversRotationAboutCenter) {
  const LdrFrame src = textured_frame(1.0);
  const double angle = 2.0 * std::numbers::pi / 180.0;
  const double c = (src.pixels.width() - 1) / 2.0;
  const LdrFrame dst = geo::warp_similarity(src, geo::SimilarityTransform::about_point(1.0, angle, c, c));
  const auto est = geo::estimate_similarity(src, dst);
  ASSERT_FALSE(est.degenerate);
  EXPECT_NEAR(est.transform.rotation * 180.0 / std::numbers::pi, 2.0, 0.1);
  double x = 0, y = 0;
  est.transform.apply(c, c, x, y);
  EXPECT_NEAR(x, c, 0.2);
  EXPECT_NEAR(y, c, 0.2);
}

TEST(EstimateSimilarity, ConstantImageIsDegenerate) {
  const LdrFrame flat{Tensor(3, 32, 32, 0.4), 1.0, kDefaultGamma};
  const auto est = geo::estimate_similarity(flat, flat);
  EXPECT_TRUE(est.degenerate);
  EXPECT_EQ(est.transform.tx, 0.0);
  EXPECT_EQ(est.transform.scale, 1.0);
}

TEST(EstimateSimilarity, DeterministicForSeed) {
  const LdrFrame src = textured_frame(1.0);
  const LdrFrame dst = geo::warp_similarity(src, {1.0, 0.01, 2.2, -1.1});
  const auto a = geo::estimate_similarity(src, dst), b = geo::estimate_similarity(src, dst);
  EXPECT_EQ(a.transform.tx, b.transform.tx);
  EXPECT_EQ(a.transform.rotation, b.transform.rotation);
  EXPECT_THROW(geo::estimate_similarity(src, textured_frame(1.0, 64)), InvalidArgument);
}

}  // namespace
