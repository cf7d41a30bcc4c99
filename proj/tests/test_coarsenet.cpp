#include <gtest/gtest.h>

#include <cmath>

#include "hdrv/coarsenet.hpp"
#include "hdrv/errors.hpp"
#include "hdrv/ops.hpp"
#include "hdrv/radiometry.hpp"
#include "support.hpp"

using namespace hdrv;
using ag::Var;
using hdrv::testing::gradcheck;
using hdrv::testing::max_abs_diff;
using hdrv::testing::random_tensor;

namespace {

coarse::CoarseConfig tiny_config(int period = 2) {
  coarse::CoarseConfig c;
  c.period = period;
  c.flow_channels = {3, 4, 4, 5};
  c.weight_base = 2;
  return c;
}

std::size_t conv_count(int in, int out, int k = 3) {
  return static_cast<std::size_t>(out) * in * k * k + out;
}

LdrFrame render(const Tensor& radiance, double exposure) {
  return {radiometry::render_ldr(radiance, exposure), exposure, kDefaultGamma};
}

// Smooth analytic radiance pattern, evaluated at (x - shift_x, y).
Tensor pattern(int h, int w, double shift_x, double phase = 0.0) {
  Tensor t(3, h, w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double u = x - shift_x;
        t.at(c, y, x) = 0.3 + 0.25 * std::sin(0.21 * u + 0.4 * c + phase) * std::cos(0.17 * y - 0.3 * c);
      }
    }
  }
  return t;
}

// Zero-initialized heads give vanishing gradients upstream; randomize them.
void randomize_all(ag::ParameterSet& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params.items()) {
    Tensor& v = p.var.mutable_value();
    for (auto& x : v.values()) x = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  }
}

std::vector<Var> leaves_of(ag::ParameterSet& params) {
  params.set_requires_grad(true);
  std::vector<Var> out;
  for (auto& p : params.items()) out.push_back(p.var);
  return out;
}

}  // namespace

TEST(FlowInput, IdenticalFramesStackThreeCopies) {
  std::mt19937_64 rng(1);
  const Tensor px = random_tensor(3, 4, 5, rng, 0.0, 1.0);
  const LdrFrame f{px, 1.0, kDefaultGamma};
  const Tensor in = coarse::prepare_flow_input(f, f, f, 2);
  ASSERT_EQ(in.channels(), 9);
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < px.size(); ++i) EXPECT_NEAR(in[k * px.size() + i], px[i], 1e-12);
  }
}

TEST(FlowInput, ReferenceClipsWhenBrightened) {
  const Tensor radiance(3, 2, 2, 0.5);
  const LdrFrame ref = render(radiance, 1.0);
  const LdrFrame nbr{Tensor(3, 2, 2, 0.2), 2.0, kDefaultGamma};
  const Tensor in = coarse::prepare_flow_input(nbr, ref, nbr, 2);
  for (int c = 3; c < 6; ++c) {
    for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(in.channel(c)[i], 1.0);
  }
}

TEST(FlowInput, ExposureMatchingScalar) {
  const LdrFrame ref{Tensor(3, 1, 1, 0.5), 1.0, kDefaultGamma};
  const LdrFrame nbr{Tensor(3, 1, 1, 0.1), 4.0, kDefaultGamma};
  const Tensor in = coarse::prepare_flow_input(nbr, ref, nbr, 2);
  const long double expected = std::pow(std::pow(0.5L, 2.2L) * 4.0L, 1.0L / 2.2L);
  EXPECT_NEAR(in.at(3, 0, 0), static_cast<double>(expected), 1e-12);
  EXPECT_NEAR(in.at(3, 0, 0), 0.93893, 1e-5);
}

TEST(FlowInput, ThreeExposuresMatchEachNeighbor) {
  const LdrFrame prev{Tensor(3, 1, 1, 0.1), 0.25, kDefaultGamma};
  const LdrFrame ref{Tensor(3, 1, 1, 0.4), 1.0, kDefaultGamma};
  const LdrFrame next{Tensor(3, 1, 1, 0.1), 2.0, kDefaultGamma};
  const Tensor in = coarse::prepare_flow_input(prev, ref, next, 3);
  ASSERT_EQ(in.channels(), 12);
  const double r = std::pow(0.4, 2.2);
  EXPECT_NEAR(in.at(3, 0, 0), std::pow(r * 0.25, 1.0 / 2.2), 1e-12);
  EXPECT_NEAR(in.at(6, 0, 0), std::pow(r * 2.0, 1.0 / 2.2), 1e-12);
  EXPECT_DOUBLE_EQ(in.at(9, 0, 0), 0.1);
}

TEST(FlowInput, MismatchedSizesThrow) {
  const LdrFrame a{Tensor(3, 4, 4, 0.5), 1.0, kDefaultGamma};
  const LdrFrame b{Tensor(3, 4, 5, 0.5), 4.0, kDefaultGamma};
  EXPECT_THROW(coarse::prepare_flow_input(b, a, b, 2), InvalidArgument);
}

TEST(CoarseModel, ParameterCountFollowsArchitecture) {
  const auto cfg = tiny_config();
  coarse::CoarseModel model(cfg, 3);
  std::size_t expected = 0;
  int in = 9;
  for (int c : cfg.flow_channels) {
    expected += conv_count(in, c) + conv_count(c, c);
    in = c;
  }
  for (int l = 0; l < 3; ++l) expected += conv_count(cfg.flow_channels[l] + 4, cfg.flow_channels[l]);
  for (int c : cfg.flow_channels) expected += conv_count(c, 4);
  const int b = cfg.weight_base;
  const int wc[4] = {b, 2 * b, 4 * b, 8 * b};
  in = 30;
  for (int c : wc) {
    expected += conv_count(in, c) + conv_count(c, c);
    in = c;
  }
  for (int l = 0; l < 3; ++l) expected += conv_count(wc[l + 1] + wc[l], wc[l]);
  expected += conv_count(b, 5);
  EXPECT_EQ(model.params().count_scalars(), expected);
}

TEST(CoarseModel, FlowShapesAndZeroInit) {
  coarse::CoarseModel model(tiny_config(), 4);
  std::mt19937_64 rng(5);
  for (auto [h, w] : {std::pair{16, 16}, std::pair{32, 48}}) {
    const auto flows = model.predict_flows(Var(random_tensor(9, h, w, rng, 0.0, 1.0)));
    for (const auto& f : {flows.to_prev, flows.to_next}) {
      EXPECT_EQ(f.channels(), 2);
      EXPECT_EQ(f.height(), h);
      EXPECT_EQ(f.width(), w);
      EXPECT_EQ(f.value().max_abs(), 0.0);
    }
  }
}

TEST(CoarseModel, RejectsSizesNotDivisibleByDownsampling) {
  coarse::CoarseModel model(tiny_config(), 4);
  EXPECT_THROW(model.predict_flows(Var(Tensor(9, 24, 32, 0.5))), InvalidArgument);
  EXPECT_THROW(model.predict_flows(Var(Tensor(12, 16, 16, 0.5))), InvalidArgument);
}

TEST(CoarseModel, ForwardShapesAndNonnegativeWeights) {
  coarse::CoarseModel model(tiny_config(), 6);
  const Tensor radiance = pattern(16, 32, 0.0);
  const LdrFrame nbr = render(radiance, 4.0), ref = render(radiance, 1.0);
  const auto out = model.forward(nbr, ref, nbr);
  EXPECT_EQ(out.hdr.channels(), 3);
  EXPECT_EQ(out.hdr.height(), 16);
  EXPECT_EQ(out.hdr.width(), 32);
  EXPECT_EQ(out.weights.channels(), 5);
  for (double w : out.weights.value().values()) EXPECT_GT(w, 0.0);
  EXPECT_TRUE(out.hdr.value().all_finite());
}

TEST(CoarseModel, AllBlackInputsGiveFiniteOutput) {
  coarse::CoarseModel model(tiny_config(), 7);
  const LdrFrame nbr{Tensor(3, 16, 16, 0.0), 4.0, kDefaultGamma};
  const LdrFrame ref{Tensor(3, 16, 16, 0.0), 1.0, kDefaultGamma};
  const auto out = model.forward(nbr, ref, nbr);
  EXPECT_TRUE(out.hdr.value().all_finite());
  EXPECT_EQ(out.hdr.value().max_abs(), 0.0);
}

TEST(CoarseModel, DeterministicForSeed) {
  const Tensor radiance = pattern(16, 16, 0.0);
  const LdrFrame nbr = render(radiance, 4.0), ref = render(radiance, 1.0);
  coarse::CoarseModel a(tiny_config(), 11), b(tiny_config(), 11), c(tiny_config(), 12);
  const Tensor ya = a.forward(nbr, ref, nbr).hdr.value();
  const Tensor yb = b.forward(nbr, ref, nbr).hdr.value();
  const Tensor yc = c.forward(nbr, ref, nbr).hdr.value();
  EXPECT_EQ(max_abs_diff(ya, yb), 0.0);
  EXPECT_GT(max_abs_diff(ya, yc), 0.0);
}

TEST(CoarseModel, TranslationEquivariantWithOracleFlows) {
  // Shifts are multiples of the weight network's total stride so every level
  // of the encoder sees the same sampling grid.
  const int h = 16, w = 128, shift = 8, margin = 40;
  coarse::CoarseModel model(tiny_config(), 13);
  randomize_all(model.params(), 14);
  Tensor flow_prev(2, h, w, 0.0), flow_next(2, h, w, 0.0);
  flow_prev.fill(0.0);
  for (int i = 0; i < h * w; ++i) {
    flow_prev.channel(0)[i] = -2.0;
    flow_next.channel(0)[i] = 2.0;
  }
  const coarse::CoarseOverrides oracle{flow_prev, flow_next};
  const auto run = [&](double s) {
    const LdrFrame prev = render(pattern(h, w, s - 2.0), 4.0);
    const LdrFrame ref = render(pattern(h, w, s), 1.0);
    const LdrFrame next = render(pattern(h, w, s + 2.0), 4.0);
    return model.forward(prev, ref, next, &oracle).hdr.value();
  };
  const Tensor base = run(0.0), moved = run(shift);
  double worst = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = margin; x < w - margin - shift; ++x) {
        worst = std::max(worst, std::abs(moved.at(c, y, x + shift) - base.at(c, y, x)));
      }
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(BlendCoarse, OneHotSelectsReference) {
  std::mt19937_64 rng(20);
  std::array<Var, 5> imgs;
  for (auto& v : imgs) v = Var(random_tensor(3, 3, 3, rng, 0.0, 5.0));
  Tensor wts(5, 3, 3, 0.0);
  for (int i = 0; i < 9; ++i) wts.channel(2)[i] = 1.0;
  const Var out = coarse::blend_coarse(imgs, Var(wts));
  EXPECT_LT(max_abs_diff(out.value(), imgs[2].value()), 1e-7);
}

TEST(BlendCoarse, EqualImagesReturnThatValue) {
  std::mt19937_64 rng(21);
  std::array<Var, 5> imgs;
  for (auto& v : imgs) v = Var(Tensor(3, 2, 2, 0.7));
  const Var out = coarse::blend_coarse(imgs, Var(random_tensor(5, 2, 2, rng, 0.1, 3.0)));
  for (double v : out.value().values()) EXPECT_NEAR(v, 0.7, 1e-8);
}

TEST(BlendCoarse, MatchesScalarBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::array<Var, 5> imgs;
    for (auto& v : imgs) v = Var(random_tensor(3, 2, 2, rng, 0.0, 10.0));
    const Tensor wts = random_tensor(5, 2, 2, rng, 0.0, 2.0);
    const Tensor out = coarse::blend_coarse(imgs, Var(wts)).value();
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) {
          long double num = 0.0L, den = 1e-8L;
          double lo = INFINITY, hi = -INFINITY;
          for (int k = 0; k < 5; ++k) {
            const double v = imgs[k].value().at(c, y, x);
            num += static_cast<long double>(wts.at(k, y, x)) * v;
            den += wts.at(k, y, x);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          EXPECT_NEAR(out.at(c, y, x), static_cast<double>(num / den), 1e-6);
          EXPECT_GE(out.at(c, y, x), lo * (1.0 - 1e-6));
          EXPECT_LE(out.at(c, y, x), hi + 1e-9);
        }
      }
    }
  }
}

TEST(BlendCoarse, ZeroWeightsStayFiniteAndNegativeRejected) {
  std::array<Var, 5> imgs;
  for (auto& v : imgs) v = Var(Tensor(3, 2, 2, 1.0));
  const Var out = coarse::blend_coarse(imgs, Var(Tensor(5, 2, 2, 0.0)));
  EXPECT_TRUE(out.value().all_finite());
  EXPECT_THROW(coarse::blend_coarse(imgs, Var(Tensor(5, 2, 2, -0.1))), InvalidArgument);
}

TEST(CoarseLoss, Examples) {
  EXPECT_DOUBLE_EQ(coarse::coarse_loss(Var(Tensor(3, 2, 2, 0.4)), Tensor(3, 2, 2, 0.4)).value()[0], 0.0);
  EXPECT_NEAR(coarse::coarse_loss(Var(Tensor(1, 1, 1, 0.0)), Tensor(1, 1, 1, 1.0)).value()[0], 1.0, 1e-12);
  const long double expected =
      std::abs(std::log(501.0L) - std::log(1001.0L)) / std::log(5001.0L);
  const double got = coarse::coarse_loss(Var(Tensor(1, 1, 1, 0.1)), Tensor(1, 1, 1, 0.2)).value()[0];
  EXPECT_NEAR(got, static_cast<double>(expected), 1e-12);
  EXPECT_NEAR(got, 0.0813, 1e-4);
}

TEST(CoarseLoss, RejectsNegativeAndMismatched) {
  EXPECT_THROW(coarse::coarse_loss(Var(Tensor(1, 1, 1, -0.1)), Tensor(1, 1, 1, 0.2)), InvalidArgument);
  EXPECT_THROW(coarse::coarse_loss(Var(Tensor(1, 1, 2, 0.1)), Tensor(1, 1, 1, 0.2)), InvalidArgument);
}

TEST(CoarseGradients, BlendAndLoss) {
  std::mt19937_64 rng(30);
  std::vector<Var> leaves;
  std::array<Var, 5> imgs;
  for (auto& v : imgs) {
    v = Var(random_tensor(3, 3, 3, rng, 0.1, 4.0), true);
    leaves.push_back(v);
  }
  Var wts(random_tensor(5, 3, 3, rng, 0.1, 2.0), true);
  leaves.push_back(wts);
  const Tensor gt = random_tensor(3, 3, 3, rng, 0.0, 4.0);
  const auto r = gradcheck(leaves, [&] { return coarse::coarse_loss(coarse::blend_coarse(imgs, wts), gt); });
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(CoarseGradients, MeanFlowWrtParameters) {
  coarse::CoarseModel model(tiny_config(), 31);
  randomize_all(model.params(), 32);
  std::mt19937_64 rng(33);
  const Var input(random_tensor(9, 16, 16, rng, 0.0, 1.0));
  const Var offset(Tensor(2, 16, 16, -50.0));
  const auto leaves = leaves_of(model.params());
  const auto r = gradcheck(leaves, [&] {
    const auto f = model.predict_flows(input);
    return ops::sum_scalars({ops::mean_abs_diff(f.to_prev, offset), ops::mean_abs_diff(f.to_next, offset)});
  }, 12);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
  EXPECT_GT(r.checked, 100u);
}

TEST(CoarseGradients, EndToEndToyInstance) {
  coarse::CoarseModel model(tiny_config(), 34);
  randomize_all(model.params(), 35);
  const LdrFrame prev = render(pattern(16, 16, -1.3), 4.0);
  const LdrFrame ref = render(pattern(16, 16, 0.0), 1.0);
  const LdrFrame next = render(pattern(16, 16, 1.7), 4.0);
  const Tensor gt = pattern(16, 16, 0.2, 0.5);
  const auto leaves = leaves_of(model.params());
  const auto r = gradcheck(leaves, [&] { return coarse::coarse_loss(model.forward(prev, ref, next).hdr, gt); }, 8);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(CoarseConfig, ScaledAndValidated) {
  coarse::CoarseConfig c;
  const auto s = c.scaled(0.25);
  EXPECT_EQ(s.flow_channels, (std::array<int, 4>{4, 8, 16, 24}));
  EXPECT_EQ(s.weight_base, 8);
  c.period = 4;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_EQ(tiny_config(3).flow_input_channels(), 12);
}
