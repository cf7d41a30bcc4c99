#include "hdrv/refinenet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hdrv/errors.hpp"
#include "hdrv/ops.hpp"
#include "hdrv/radiometry.hpp"

namespace hdrv::refine {

namespace {

constexpr int kOffsetChannels = 2 * nn::DeformConv2d::kTaps;

Var constant_like(const Var& x, double v) { return Var(Tensor::like(x.value(), v)); }

void check_offsets(const Tensor& offsets, const Var& feature, const char* where) {
  if (offsets.channels() != kOffsetChannels || !offsets.same_spatial(feature.value())) {
    throw InvalidArgument(std::string(where) + ": offsets " + offsets.shape_string() +
                          " do not match feature " + feature.value().shape_string());
  }
}

}  // namespace

RefineConfig RefineConfig::scaled(double factor) const {
  RefineConfig out = *this;
  out.features = std::max(1, static_cast<int>(std::lround(features * factor)));
  out.perceptual_channels = std::max(1, static_cast<int>(std::lround(perceptual_channels * factor)));
  return out;
}

void RefineConfig::validate() const {
  if (features <= 0 || perceptual_channels <= 0) {
    throw InvalidArgument("refine: channel counts must be positive");
  }
  if (!(mu > 0.0)) throw InvalidArgument("refine: mu must be positive");
}

Var deformable_sample(const Var& feature, const Var& offsets, const Var& weight, const Var& bias) {
  if (offsets.channels() != kOffsetChannels || !offsets.value().same_spatial(feature.value())) {
    throw InvalidArgument("deformable_sample: offsets " + offsets.value().shape_string() +
                          " do not match feature " + feature.value().shape_string());
  }
  return ops::deform_conv2d(feature, offsets, weight, bias, kernels::ConvGeometry{3, 1, 1});
}

RefineModel::RefineModel(const RefineConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int f = config_.features;
  for (int l = 0; l < 3; ++l) {
    const std::string p = "refine.extract" + std::to_string(l);
    extract_a_[l] = nn::Conv2d(params_, p + "a", l == 0 ? 3 : f, f, rng, l == 0 ? 1 : 2);
    extract_b_[l] = nn::Conv2d(params_, p + "b", f, f, rng);
  }
  for (int l = 2; l >= 0; --l) {
    const std::string p = "refine.pcd" + std::to_string(l);
    PcdLevel& lvl = pcd_[l];
    lvl.offset_conv = nn::Conv2d(params_, p + ".offset_conv", 2 * f, f, rng);
    if (l < 2) lvl.offset_merge = nn::Conv2d(params_, p + ".offset_merge", f + kOffsetChannels, f, rng);
    lvl.offset_head = nn::Conv2d(params_, p + ".offset_head", f, kOffsetChannels, rng, 1, 3, nn::Init::kZero);
    lvl.dcn = nn::DeformConv2d(params_, p + ".dcn", f, f, rng);
    if (l < 2) lvl.feature_merge = nn::Conv2d(params_, p + ".feature_merge", 2 * f, f, rng);
  }
  cascade_conv_ = nn::Conv2d(params_, "refine.cascade.offset_conv", 2 * f, f, rng);
  cascade_head_ = nn::Conv2d(params_, "refine.cascade.offset_head", f, kOffsetChannels, rng, 1, 3,
                             nn::Init::kZero);
  cascade_dcn_ = nn::DeformConv2d(params_, "refine.cascade.dcn", f, f, rng);
  attention_a_ = nn::Conv2d(params_, "refine.attention.a", 2 * f, f, rng);
  attention_b_ = nn::Conv2d(params_, "refine.attention.b", f, f, rng);
  fusion_ = nn::Conv2d(params_, "refine.fusion", 3 * f, f, rng);
  decode_down_[0] = nn::Conv2d(params_, "refine.decode.down1", f, f, rng, 2);
  decode_down_[1] = nn::Conv2d(params_, "refine.decode.down2", f, f, rng, 2);
  decode_up_[1] = nn::Conv2d(params_, "refine.decode.up1", 2 * f, f, rng);
  decode_up_[0] = nn::Conv2d(params_, "refine.decode.up0", 2 * f, f, rng);
  decode_head_ = nn::Conv2d(params_, "refine.decode.head", f, 3, rng);
  // A small residual at initialization keeps H^r close to H^c.
  Var head = decode_head_.weight();
  for (double& v : head.mutable_value().values()) v *= 0.1;
}

std::vector<double> RefineModel::offset_bounds(int height, int width) const {
  std::vector<double> bounds(kOffsetChannels);
  for (int t = 0; t < nn::DeformConv2d::kTaps; ++t) {
    bounds[2 * t] = width / 2.0;
    bounds[2 * t + 1] = height / 2.0;
  }
  return bounds;
}

FeaturePyramid RefineModel::extract_features(const Var& coarse) const {
  if (coarse.channels() != 3) throw InvalidArgument("extract_features: expected 3 channels");
  if (coarse.height() % RefineConfig::kDownsample != 0 || coarse.width() % RefineConfig::kDownsample != 0) {
    throw InvalidArgument("extract_features: size " + coarse.value().shape_string() +
                          " must be divisible by " + std::to_string(RefineConfig::kDownsample));
  }
  FeaturePyramid out;
  Var x = ops::mu_law(coarse, config_.mu);
  for (int l = 0; l < 3; ++l) {
    x = ops::leaky_relu(extract_a_[l](x));
    x = ops::leaky_relu(extract_b_[l](x));
    out.levels[l] = x;
  }
  return out;
}

Var RefineModel::pcd_align(const FeaturePyramid& neighbor, const FeaturePyramid& reference,
                           const PcdOverrides* overrides) const {
  for (int l = 0; l < 3; ++l) {
    require_same_shape(neighbor.levels[l].value(), reference.levels[l].value(), "pcd_align");
  }
  Var offsets, aligned;
  for (int l = 2; l >= 0; --l) {
    const PcdLevel& lvl = pcd_[l];
    const Var& nbr = neighbor.levels[l];
    Var level_offsets;
    if (overrides && overrides->level_offsets[l]) {
      check_offsets(*overrides->level_offsets[l], nbr, "pcd_align");
      level_offsets = Var(*overrides->level_offsets[l]);
    } else {
      Var feat = ops::leaky_relu(lvl.offset_conv(ops::concat({nbr, reference.levels[l]})));
      if (l < 2) {
        const Var up = ops::scale(ops::upsample2x(offsets), 2.0);
        feat = ops::leaky_relu(lvl.offset_merge(ops::concat({feat, up})));
        level_offsets = ops::add(up, lvl.offset_head(feat));
      } else {
        level_offsets = lvl.offset_head(feat);
      }
      if (config_.clamp_offsets) {
        level_offsets = ops::clamp_channels(level_offsets, offset_bounds(nbr.height(), nbr.width()));
      }
    }
    offsets = level_offsets;
    Var level_aligned = lvl.dcn(nbr, level_offsets);
    if (l < 2) {
      level_aligned = lvl.feature_merge(ops::concat({level_aligned, ops::upsample2x(aligned)}));
    }
    aligned = ops::leaky_relu(level_aligned);
  }

  Var cascade_offsets;
  if (overrides && overrides->cascade_offsets) {
    check_offsets(*overrides->cascade_offsets, aligned, "pcd_align");
    cascade_offsets = Var(*overrides->cascade_offsets);
  } else {
    const Var feat = ops::leaky_relu(cascade_conv_(ops::concat({aligned, reference.levels[0]})));
    cascade_offsets = cascade_head_(feat);
    if (config_.clamp_offsets) {
      cascade_offsets = ops::clamp_channels(cascade_offsets, offset_bounds(aligned.height(), aligned.width()));
    }
  }
  return ops::leaky_relu(cascade_dcn_(aligned, cascade_offsets));
}

Var RefineModel::temporal_attention_fuse(const std::array<Var, 3>& aligned,
                                         const AttentionOverrides* overrides) const {
  require_same_shape(aligned[0].value(), aligned[1].value(), "temporal_attention_fuse");
  require_same_shape(aligned[2].value(), aligned[1].value(), "temporal_attention_fuse");
  std::vector<Var> weighted;
  for (int k = 0; k < 3; ++k) {
    Var attention;
    if (overrides && overrides->forced[k]) {
      attention = constant_like(aligned[k], *overrides->forced[k]);
    } else {
      const Var hidden = ops::leaky_relu(attention_a_(ops::concat({aligned[k], aligned[1]})));
      attention = ops::sigmoid(attention_b_(hidden));
    }
    weighted.push_back(ops::mul(aligned[k], attention));
  }
  return ops::leaky_relu(fusion_(ops::concat(weighted)));
}

Var RefineModel::decode(const Var& fused, const FeaturePyramid& reference) const {
  const Var d1 = ops::leaky_relu(decode_down_[0](fused));
  const Var d2 = ops::leaky_relu(decode_down_[1](d1));
  const Var u1 = ops::leaky_relu(decode_up_[1](ops::concat({ops::upsample2x(d2), reference.levels[1]})));
  const Var u0 = ops::leaky_relu(decode_up_[0](ops::concat({ops::upsample2x(u1), reference.levels[0]})));
  return decode_head_(u0);
}

RefineOutput RefineModel::forward(const std::array<Var, 3>& coarse_window, const LdrFrame& reference_ldr,
                                  ExposureRole role, const RefineOverrides* overrides) const {
  reference_ldr.validate();
  for (const auto& c : coarse_window) {
    require_same_shape(c.value(), reference_ldr.pixels, "refine_forward");
  }
  std::array<FeaturePyramid, 3> pyramids;
  for (int k = 0; k < 3; ++k) pyramids[k] = extract_features(coarse_window[k]);
  const std::array<Var, 3> aligned{
      pcd_align(pyramids[0], pyramids[1], overrides ? &overrides->prev : nullptr),
      pcd_align(pyramids[1], pyramids[1]),
      pcd_align(pyramids[2], pyramids[1], overrides ? &overrides->next : nullptr)};
  const Var fused = temporal_attention_fuse(aligned, overrides ? &overrides->attention : nullptr);
  const Var residual = decode(fused, pyramids[1]);
  const Var tonemapped = ops::add(ops::mu_law(coarse_window[1], config_.mu), residual);

  RefineOutput out;
  out.refined = ops::inverse_mu_law(ops::relu(tonemapped), config_.mu);
  if (overrides && overrides->mask) {
    out.mask = *overrides->mask;
  } else {
    out.mask = radiometry::well_exposed_mask(reference_ldr, role).weights;
  }
  out.merged = ops::mask_merge(coarse_window[1], out.refined, out.mask);
  return out;
}

PerceptualExtractor::PerceptualExtractor(int channels, std::uint64_t seed) {
  if (channels <= 0) throw InvalidArgument("perceptual extractor: channels must be positive");
  std::mt19937_64 rng(seed);
  const int c = channels;
  conv1a_ = nn::Conv2d(params_, "perceptual.conv1a", 3, c, rng, 1, 3, nn::Init::kHe, false);
  conv1b_ = nn::Conv2d(params_, "perceptual.conv1b", c, c, rng, 1, 3, nn::Init::kHe, false);
  conv2_ = nn::Conv2d(params_, "perceptual.conv2", c, 2 * c, rng, 2, 3, nn::Init::kHe, false);
  conv3_ = nn::Conv2d(params_, "perceptual.conv3", 2 * c, 4 * c, rng, 2, 3, nn::Init::kHe, false);
}

std::array<Var, 3> PerceptualExtractor::features(const Var& tonemapped) const {
  const Var x1 = ops::relu(conv1b_(ops::relu(conv1a_(tonemapped))));
  const Var x2 = ops::relu(conv2_(x1));
  const Var x3 = ops::relu(conv3_(x2));
  return {x1, x2, x3};
}

RefineLoss refine_loss(const Var& pred_merged, const Tensor& gt, const Tensor& mask,
                       const PerceptualExtractor* perceptual, double mu) {
  require_same_shape(pred_merged.value(), gt, "refine_loss");
  if (mask.channels() != 1) throw InvalidArgument("refine_loss: mask must have one channel");
  require_same_spatial(mask, gt, "refine_loss");
  const Var predicted = ops::mu_law(pred_merged, mu);
  const Var target(radiometry::mu_tonemap(gt, mu));

  RefineLoss out;
  std::vector<Var> terms;
  double denominator = 0.0;
  for (double m : mask.values()) denominator += 1.0 - m;
  if (denominator > 0.0) {
    out.l1 = ops::pixel_abs_sum(predicted, target, denominator);
    terms.push_back(out.l1);
  } else {
    out.l1_skipped = true;
    out.warning = "refine_loss: mask is all ones, L1 term skipped";
  }
  if (perceptual) {
    const auto fp = perceptual->features(predicted);
    const auto ft = perceptual->features(target);
    std::vector<Var> layers;
    for (int k = 0; k < 3; ++k) layers.push_back(ops::mean_abs_diff(fp[k], ft[k]));
    out.perceptual = ops::sum_scalars(layers);
    terms.push_back(out.perceptual);
  }
  out.total = terms.empty() ? Var(Tensor(1, 1, 1)) : ops::sum_scalars(terms);
  return out;
}

}  // namespace hdrv::refine
