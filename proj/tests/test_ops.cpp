#include <gtest/gtest.h>

#include "hdrv/errors.hpp"
#include "hdrv/ops.hpp"
#include "support.hpp"

using namespace hdrv;
using ag::Var;
using hdrv::testing::gradcheck;
using hdrv::testing::random_tensor;

namespace {

constexpr double kTol = 1e-3;

// Weighted sum with fixed random coefficients turns any output into a scalar
// whose gradient exercises every element.
Var probe(const Var& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const Var coeffs(random_tensor(y.channels(), y.height(), y.width(), rng));
  const Var prod = ops::mul(y, coeffs);
  return ops::pixel_abs_sum(prod, Var(Tensor::like(prod.value(), -10.0)), 1.0);
}

Var leaf(int c, int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return Var(random_tensor(c, h, w, rng, lo, hi), true);
}

TEST(Autograd, SharedInputAccumulatesBothPaths) {
  Var x(Tensor(1, 1, 1, 3.0), true);
  const Var y = ops::mul(x, x);
  ag::backward(ops::sum_scalars({y}));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  Var x(Tensor(1, 1, 1, 2.0), true);
  {
    const ag::NoGradGuard guard;
    EXPECT_FALSE(ops::scale(x, 2.0).requires_grad());
  }
  EXPECT_TRUE(ops::scale(x, 2.0).requires_grad());
}

TEST(Autograd, BackwardRejectsNonScalar) {
  Var x(Tensor(1, 2, 2, 1.0), true);
  EXPECT_THROW(ag::backward(x), InvalidArgument);
}

TEST(ParameterSet, HandlesShareStorageAndCount) {
  ag::ParameterSet params;
  Var a = params.add("a", Tensor(2, 1, 1, 1.0));
  params.add("b", Tensor(3, 1, 1, 1.0), false);
  a.mutable_value()[0] = 5.0;
  EXPECT_DOUBLE_EQ(params.find("a")->var.value()[0], 5.0);
  EXPECT_EQ(params.count_scalars(), 5u);
  EXPECT_EQ(params.find("missing"), nullptr);
  EXPECT_THROW(params.add("a", Tensor(1, 1, 1)), InvalidArgument);
}

TEST(GradCheck, Conv2dStridedAndPlain) {
  std::mt19937_64 rng(1);
  for (int stride : {1, 2}) {
    Var x = leaf(3, 6, 6, rng), w = leaf(4, 27, 1, rng), b = leaf(4, 1, 1, rng);
    const auto r = gradcheck({x, w, b}, [&] { return probe(ops::conv2d(x, w, b, {3, stride, 1})); });
    EXPECT_LT(r.max_rel_error, kTol) << r.worst;
  }
}

TEST(GradCheck, DeformableConvolution) {
  std::mt19937_64 rng(2);
  Var x = leaf(2, 5, 6, rng), w = leaf(3, 18, 1, rng), b = leaf(3, 1, 1, rng);
  Var off = leaf(18, 5, 6, rng, -2.3, 2.3);
  const auto r = gradcheck({x, off, w, b}, [&] { return probe(ops::deform_conv2d(x, off, w, b, {3, 1, 1})); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(GradCheck, BackwardWarp) {
  std::mt19937_64 rng(3);
  Var img = leaf(3, 6, 7, rng), flow = leaf(2, 6, 7, rng, -2.7, 2.7);
  const auto r = gradcheck({img, flow}, [&] { return probe(ops::backward_warp(img, flow)); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(GradCheck, Upsample) {
  std::mt19937_64 rng(4);
  Var x = leaf(2, 3, 4, rng);
  const auto r = gradcheck({x}, [&] { return probe(ops::upsample2x(x)); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(GradCheck, Pointwise) {
  std::mt19937_64 rng(5);
  Var x = leaf(2, 4, 4, rng, -2.0, 2.0);
  Var y = leaf(2, 4, 4, rng, -2.0, 2.0);
  Var pos = leaf(2, 4, 4, rng, 0.05, 1.0);
  const std::vector<std::pair<const char*, std::function<Var()>>> cases{
      {"leaky_relu", [&] { return probe(ops::leaky_relu(x)); }},
      {"relu", [&] { return probe(ops::relu(x)); }},
      {"sigmoid", [&] { return probe(ops::sigmoid(x)); }},
      {"softplus", [&] { return probe(ops::softplus(x)); }},
      {"clamp", [&] { return probe(ops::clamp(x, -0.5, 0.5)); }},
      {"clamp_channels", [&] { return probe(ops::clamp_channels(x, {0.4, 1.2})); }},
      {"add", [&] { return probe(ops::add(x, y)); }},
      {"sub", [&] { return probe(ops::sub(x, y)); }},
      {"mul", [&] { return probe(ops::mul(x, y)); }},
      {"scale", [&] { return probe(ops::scale(x, -1.7)); }},
      {"concat", [&] { return probe(ops::concat({x, y, x})); }},
      {"slice", [&] { return probe(ops::slice_channels(ops::concat({x, y}), 1, 2)); }},
      {"ldr_to_radiance", [&] { return probe(ops::ldr_to_radiance(pos, 0.25, 2.2)); }},
      {"mu_law", [&] { return probe(ops::mu_law(pos, 5000.0)); }},
      {"inverse_mu_law", [&] { return probe(ops::inverse_mu_law(pos, 5000.0)); }},
      {"mean_abs_diff", [&] { return ops::mean_abs_diff(x, y); }},
      {"pixel_abs_sum", [&] { return ops::pixel_abs_sum(x, y, 3.5); }},
  };
  for (const auto& [name, f] : cases) {
    const auto r = gradcheck({x, y, pos}, f);
    EXPECT_LT(r.max_rel_error, kTol) << name << ": " << r.worst;
  }
}

TEST(GradCheck, BlendAndMaskMerge) {
  std::mt19937_64 rng(6);
  std::vector<Var> images;
  for (int k = 0; k < 5; ++k) images.push_back(leaf(3, 3, 3, rng, 0.0, 2.0));
  Var weights = leaf(5, 3, 3, rng, 0.01, 1.0);
  std::vector<Var> leaves = images;
  leaves.push_back(weights);
  auto r = gradcheck(leaves, [&] { return probe(ops::blend(images, weights, 1e-8)); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;

  const Tensor mask = random_tensor(1, 3, 3, rng, 0.0, 1.0);
  r = gradcheck({images[0], images[1]}, [&] { return probe(ops::mask_merge(images[0], images[1], mask)); });
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(Ops, ShapeMismatchesThrow) {
  Var a(Tensor(3, 4, 4)), b(Tensor(3, 4, 5));
  EXPECT_THROW(ops::add(a, b), InvalidArgument);
  EXPECT_THROW(ops::backward_warp(a, Var(Tensor(2, 3, 4))), InvalidArgument);
  EXPECT_THROW(ops::slice_channels(a, 2, 2), InvalidArgument);
}

TEST(Ops, BlendIsConvexPerPixel) {
  std::mt19937_64 rng(7);
  std::vector<Var> images;
  for (int k = 0; k < 5; ++k) images.push_back(Var(random_tensor(3, 4, 4, rng, 0.0, 5.0)));
  const Var w(random_tensor(5, 4, 4, rng, 0.0, 1.0));
  const Tensor out = ops::blend(images, w, 1e-8).value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& im : images) {
      lo = std::min(lo, im.value()[i]);
      hi = std::max(hi, im.value()[i]);
    }
    EXPECT_GE(out[i], lo * (1.0 - 1e-6));
    EXPECT_LE(out[i], hi + 1e-12);
  }
}

}  // namespace
