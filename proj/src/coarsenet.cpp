#include "hdrv/coarsenet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hdrv/errors.hpp"
#include "hdrv/ops.hpp"
#include "hdrv/radiometry.hpp"

namespace hdrv::coarse {

CoarseConfig CoarseConfig::scaled(double factor) const {
  CoarseConfig out = *this;
  const auto shrink = [factor](int c) { return std::max(1, static_cast<int>(std::lround(c * factor))); };
  for (auto& c : out.flow_channels) c = shrink(c);
  out.weight_base = shrink(weight_base);
  return out;
}

void CoarseConfig::validate() const {
  if (period != 2 && period != 3) throw InvalidArgument("coarse: period must be 2 or 3");
  for (int c : flow_channels) {
    if (c <= 0) throw InvalidArgument("coarse: channel counts must be positive");
  }
  if (weight_base <= 0) throw InvalidArgument("coarse: weight_base must be positive");
  if (!(gamma > 0.0)) throw InvalidArgument("coarse: gamma must be positive");
}

Tensor prepare_flow_input(const LdrFrame& prev, const LdrFrame& ref, const LdrFrame& next,
                          int period) {
  require_same_shape(prev.pixels, ref.pixels, "prepare_flow_input");
  require_same_shape(next.pixels, ref.pixels, "prepare_flow_input");
  if (ref.pixels.channels() != 3) throw InvalidArgument("prepare_flow_input: expected RGB frames");
  const Tensor ref_radiance = radiometry::ldr_to_radiance(ref).pixels;
  std::vector<const Tensor*> parts;
  Tensor matched_prev, matched_next;
  parts.push_back(&prev.pixels);
  if (period == 2) {
    matched_next = radiometry::render_ldr(ref_radiance, next.exposure, ref.gamma);
    parts.push_back(&matched_next);
  } else {
    matched_prev = radiometry::render_ldr(ref_radiance, prev.exposure, ref.gamma);
    matched_next = radiometry::render_ldr(ref_radiance, next.exposure, ref.gamma);
    parts.push_back(&matched_prev);
    parts.push_back(&matched_next);
  }
  parts.push_back(&next.pixels);
  Tensor out(static_cast<int>(parts.size()) * 3, ref.pixels.height(), ref.pixels.width());
  std::size_t pos = 0;
  for (const Tensor* p : parts) {
    std::copy(p->data(), p->data() + p->size(), out.data() + pos);
    pos += p->size();
  }
  return out;
}

Var blend_coarse(const std::array<Var, 5>& images, const Var& weights, double eps) {
  for (double w : weights.value().values()) {
    if (!(w >= 0.0)) throw InvalidArgument("blend_coarse: weights must be nonnegative");
  }
  return ops::blend({images.begin(), images.end()}, weights, eps);
}

Var coarse_loss(const Var& pred, const Tensor& gt, double mu) {
  require_same_shape(pred.value(), gt, "coarse_loss");
  for (double v : pred.value().values()) {
    if (v < 0.0) throw InvalidArgument("coarse_loss: negative predicted radiance");
  }
  const Tensor gt_tonemapped = radiometry::mu_tonemap(gt, mu);
  return ops::mean_abs_diff(ops::mu_law(pred, mu), Var(gt_tonemapped));
}

CoarseModel::CoarseModel(const CoarseConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto& fc = config_.flow_channels;
  int in = config_.flow_input_channels();
  for (int l = 0; l < 4; ++l) {
    const std::string lvl = std::to_string(l + 1);
    flow_down_[l] = nn::Conv2d(params_, "flow.down" + lvl, in, fc[l], rng, 2);
    flow_conv_[l] = nn::Conv2d(params_, "flow.conv" + lvl, fc[l], fc[l], rng);
    in = fc[l];
  }
  for (int l = 0; l < 3; ++l) {
    flow_refine_[l] = nn::Conv2d(params_, "flow.refine" + std::to_string(l + 1), fc[l] + 4, fc[l], rng);
  }
  for (int l = 0; l < 4; ++l) {
    flow_head_[l] = nn::Conv2d(params_, "flow.head" + std::to_string(l + 1), fc[l], 4, rng, 1, 3,
                               nn::Init::kZero);
  }

  const int b = config_.weight_base;
  const std::array<int, 4> wc{b, 2 * b, 4 * b, 8 * b};
  in = 30;
  for (int l = 0; l < 4; ++l) {
    const std::string lvl = std::to_string(l);
    weight_enc_a_[l] = nn::Conv2d(params_, "weight.enc" + lvl + "a", in, wc[l], rng, l == 0 ? 1 : 2);
    weight_enc_b_[l] = nn::Conv2d(params_, "weight.enc" + lvl + "b", wc[l], wc[l], rng);
    in = wc[l];
  }
  for (int l = 2; l >= 0; --l) {
    weight_dec_[l] = nn::Conv2d(params_, "weight.dec" + std::to_string(l), wc[l + 1] + wc[l], wc[l], rng);
  }
  weight_head_ = nn::Conv2d(params_, "weight.head", wc[0], 5, rng);
}

FlowPair CoarseModel::predict_flows(const Var& flow_input) const {
  const int h = flow_input.height(), w = flow_input.width();
  if (h % CoarseConfig::kDownsample != 0 || w % CoarseConfig::kDownsample != 0) {
    throw InvalidArgument("coarse: frame size " + std::to_string(w) + "x" + std::to_string(h) +
                          " must be divisible by " + std::to_string(CoarseConfig::kDownsample));
  }
  if (flow_input.channels() != config_.flow_input_channels()) {
    throw InvalidArgument("coarse: flow input has " + std::to_string(flow_input.channels()) +
                          " channels, expected " + std::to_string(config_.flow_input_channels()));
  }
  std::array<Var, 4> enc;
  Var x = flow_input;
  for (int l = 0; l < 4; ++l) {
    x = ops::leaky_relu(flow_down_[l](x));
    x = ops::leaky_relu(flow_conv_[l](x));
    enc[l] = x;
  }
  Var flow = flow_head_[3](enc[3]);
  for (int l = 2; l >= 0; --l) {
    const Var up = ops::scale(ops::upsample2x(flow), 2.0);
    const Var feat = ops::leaky_relu(flow_refine_[l](ops::concat({enc[l], up})));
    flow = ops::add(up, flow_head_[l](feat));
  }
  flow = ops::scale(ops::upsample2x(flow), 2.0);
  return {ops::slice_channels(flow, 0, 2), ops::slice_channels(flow, 2, 2)};
}

Var CoarseModel::predict_weights(const Var& stack) const {
  std::array<Var, 4> enc;
  Var x = stack;
  for (int l = 0; l < 4; ++l) {
    x = ops::leaky_relu(weight_enc_a_[l](x));
    x = ops::leaky_relu(weight_enc_b_[l](x));
    enc[l] = x;
  }
  for (int l = 2; l >= 0; --l) {
    x = ops::leaky_relu(weight_dec_[l](ops::concat({ops::upsample2x(x), enc[l]})));
  }
  return ops::softplus(weight_head_(x));
}

CoarseOutput CoarseModel::forward(const LdrFrame& prev, const LdrFrame& ref, const LdrFrame& next,
                                  const CoarseOverrides* overrides) const {
  prev.validate();
  ref.validate();
  next.validate();
  CoarseOutput out;
  if (overrides && overrides->flow_to_prev && overrides->flow_to_next) {
    out.flows = {Var(*overrides->flow_to_prev), Var(*overrides->flow_to_next)};
  } else {
    out.flows = predict_flows(Var(prepare_flow_input(prev, ref, next, config_.period)));
  }
  const Var l_prev(prev.pixels), l_ref(ref.pixels), l_next(next.pixels);
  const Var warped_prev = ops::backward_warp(l_prev, out.flows.to_prev);
  const Var warped_next = ops::backward_warp(l_next, out.flows.to_next);
  const double g = config_.gamma;
  const std::array<Var, 5> ldr{l_prev, warped_prev, l_ref, warped_next, l_next};
  const std::array<Var, 5> radiance{
      ops::ldr_to_radiance(l_prev, prev.exposure, g), ops::ldr_to_radiance(warped_prev, prev.exposure, g),
      ops::ldr_to_radiance(l_ref, ref.exposure, g), ops::ldr_to_radiance(warped_next, next.exposure, g),
      ops::ldr_to_radiance(l_next, next.exposure, g)};
  std::vector<Var> stack(ldr.begin(), ldr.end());
  stack.insert(stack.end(), radiance.begin(), radiance.end());
  out.weights = predict_weights(ops::concat(stack));
  out.hdr = ops::blend({radiance.begin(), radiance.end()}, out.weights, config_.blend_eps);
  return out;
}

}  // namespace hdrv::coarse
