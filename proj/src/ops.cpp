#include "hdrv/ops.hpp"

#include <algorithm>
#include <cmath>

#include "hdrv/errors.hpp"

namespace hdrv::ops {

using ag::Node;
using ag::input_grad;
using ag::make_result;

namespace {

const Tensor* bias_ptr(const Var& bias) { return bias.defined() ? &bias.value() : nullptr; }

template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out = Tensor::like(x.value());
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(std::move(out), {x}, [deriv](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      const auto& in = self.inputs[0]->value;
      for (std::size_t i = 0; i < in.size(); ++i) {
        (*g)[i] += self.grad[i] * deriv(in[i], self.value[i]);
      }
    }
  });
}

Var scalar_result(double v, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  return make_result(Tensor(1, 1, 1, v), std::move(inputs), std::move(fn));
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, const kernels::ConvGeometry& g) {
  Tensor out = kernels::conv2d_forward(x.value(), weight.value(), bias_ptr(bias), g);
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), inputs, [g](Node& self) {
    Tensor* gb = self.inputs.size() > 2 ? input_grad(self, 2) : nullptr;
    kernels::conv2d_backward(self.inputs[0]->value, self.inputs[1]->value, self.grad, g,
                             input_grad(self, 0), input_grad(self, 1), gb);
  });
}

Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias,
                  const kernels::ConvGeometry& g) {
  Tensor out = kernels::deform_conv2d_forward(x.value(), offsets.value(), weight.value(),
                                              bias_ptr(bias), g);
  std::vector<Var> inputs{x, offsets, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), inputs, [g](Node& self) {
    Tensor* gb = self.inputs.size() > 3 ? input_grad(self, 3) : nullptr;
    kernels::deform_conv2d_backward(self.inputs[0]->value, self.inputs[1]->value,
                                    self.inputs[2]->value, self.grad, g, input_grad(self, 0),
                                    input_grad(self, 1), input_grad(self, 2), gb);
  });
}

Var backward_warp(const Var& image, const Var& flow) {
  Tensor out = kernels::backward_warp_forward(image.value(), flow.value());
  return make_result(std::move(out), {image, flow}, [](Node& self) {
    kernels::backward_warp_backward(self.inputs[0]->value, self.inputs[1]->value, self.grad,
                                    input_grad(self, 0), input_grad(self, 1));
  });
}

Var upsample2x(const Var& x) {
  return make_result(kernels::upsample2x_forward(x.value()), {x}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0)) kernels::upsample2x_backward(self.grad, *g);
  });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0 ? v : slope * v; },
      [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& x) {
  return unary(
      x, [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Var clamp_channels(const Var& x, const std::vector<double>& bounds) {
  const auto& in = x.value();
  if (static_cast<int>(bounds.size()) != in.channels()) {
    throw InvalidArgument("clamp_channels: bound count does not match channels");
  }
  Tensor out = Tensor::like(in);
  for (int c = 0; c < in.channels(); ++c) {
    for (int i = 0; i < in.plane(); ++i) {
      out.channel(c)[i] = std::clamp(in.channel(c)[i], -bounds[c], bounds[c]);
    }
  }
  return make_result(std::move(out), {x}, [bounds](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      const auto& in = self.inputs[0]->value;
      for (int c = 0; c < in.channels(); ++c) {
        for (int i = 0; i < in.plane(); ++i) {
          const double v = in.channel(c)[i];
          if (v > -bounds[c] && v < bounds[c]) g->channel(c)[i] += self.grad.channel(c)[i];
        }
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = input_grad(self, k)) *g += self.grad;
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0)) *g += self.grad;
    if (Tensor* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& x, double s) {
  return unary(
      x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  int channels = 0;
  for (const auto& p : parts) {
    require_same_spatial(parts.front().value(), p.value(), "concat");
    channels += p.channels();
  }
  Tensor out(channels, parts.front().height(), parts.front().width());
  std::size_t pos = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + pos);
    pos += p.value().size();
  }
  return make_result(std::move(out), parts, [](Node& self) {
    std::size_t pos = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const std::size_t n = self.inputs[k]->value.size();
      if (Tensor* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += self.grad[pos + i];
      }
      pos += n;
    }
  });
}

Var slice_channels(const Var& x, int begin, int count) {
  if (begin < 0 || count <= 0 || begin + count > x.channels()) {
    throw InvalidArgument("slice_channels: range out of bounds");
  }
  Tensor out(count, x.height(), x.width());
  const std::size_t offset = static_cast<std::size_t>(begin) * x.value().plane();
  std::copy(x.value().data() + offset, x.value().data() + offset + out.size(), out.data());
  return make_result(std::move(out), {x}, [offset](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[offset + i] += self.grad[i];
    }
  });
}

Var ldr_to_radiance(const Var& ldr, double exposure, double gamma) {
  if (!(exposure > 0.0)) throw InvalidArgument("ldr_to_radiance: exposure must be positive");
  return unary(
      ldr, [=](double v) { return std::pow(std::max(v, 0.0), gamma) / exposure; },
      [=](double v, double) {
        return v > 0.0 ? gamma * std::pow(v, gamma - 1.0) / exposure : 0.0;
      });
}

Var mu_law(const Var& radiance, double mu) {
  const double denom = std::log1p(mu);
  return unary(
      radiance, [=](double v) { return std::log1p(mu * v) / denom; },
      [=](double v, double) { return mu / ((1.0 + mu * v) * denom); });
}

Var inverse_mu_law(const Var& tonemapped, double mu) {
  const double denom = std::log1p(mu);
  return unary(
      tonemapped, [=](double v) { return std::expm1(v * denom) / mu; },
      [=](double v, double) { return std::exp(v * denom) * denom / mu; });
}

Var blend(const std::vector<Var>& images, const Var& weights, double eps) {
  if (images.empty()) throw InvalidArgument("blend: no images");
  const auto& w = weights.value();
  if (w.channels() != static_cast<int>(images.size())) {
    throw InvalidArgument("blend: weight maps (" + std::to_string(w.channels()) +
                          ") do not match image count (" + std::to_string(images.size()) + ")");
  }
  for (const auto& im : images) {
    require_same_shape(images.front().value(), im.value(), "blend");
    require_same_spatial(im.value(), w, "blend");
  }
  const int k_count = static_cast<int>(images.size());
  const int channels = images.front().channels();
  const int n = w.plane();
  Tensor out(channels, w.height(), w.width());
  Tensor denom(1, w.height(), w.width());
  for (int i = 0; i < n; ++i) {
    double d = eps;
    for (int k = 0; k < k_count; ++k) d += w.channel(k)[i];
    denom[i] = d;
    for (int c = 0; c < channels; ++c) {
      double num = 0.0;
      for (int k = 0; k < k_count; ++k) num += w.channel(k)[i] * images[k].value().channel(c)[i];
      out.channel(c)[i] = num / d;
    }
  }
  std::vector<Var> inputs = images;
  inputs.push_back(weights);
  return make_result(std::move(out), inputs, [denom, k_count, channels, n](Node& self) {
    const auto& w = self.inputs[k_count]->value;
    for (int k = 0; k < k_count; ++k) {
      if (Tensor* g = input_grad(self, k)) {
        for (int c = 0; c < channels; ++c) {
          for (int i = 0; i < n; ++i) {
            g->channel(c)[i] += self.grad.channel(c)[i] * w.channel(k)[i] / denom[i];
          }
        }
      }
    }
    if (Tensor* g = input_grad(self, k_count)) {
      for (int k = 0; k < k_count; ++k) {
        const auto& img = self.inputs[k]->value;
        for (int i = 0; i < n; ++i) {
          double s = 0.0;
          for (int c = 0; c < channels; ++c) {
            s += self.grad.channel(c)[i] * (img.channel(c)[i] - self.value.channel(c)[i]);
          }
          g->channel(k)[i] += s / denom[i];
        }
      }
    }
  });
}

Var mask_merge(const Var& a, const Var& b, const Tensor& mask) {
  require_same_shape(a.value(), b.value(), "mask_merge");
  if (mask.channels() != 1) throw InvalidArgument("mask_merge: mask must have one channel");
  require_same_spatial(a.value(), mask, "mask_merge");
  Tensor out = Tensor::like(a.value());
  const int n = mask.plane();
  for (int c = 0; c < out.channels(); ++c) {
    for (int i = 0; i < n; ++i) {
      const double m = mask[i];
      out.channel(c)[i] = m * a.value().channel(c)[i] + (1.0 - m) * b.value().channel(c)[i];
    }
  }
  return make_result(std::move(out), {a, b}, [mask, n](Node& self) {
    Tensor* ga = input_grad(self, 0);
    Tensor* gb = input_grad(self, 1);
    for (int c = 0; c < self.grad.channels(); ++c) {
      for (int i = 0; i < n; ++i) {
        const double g = self.grad.channel(c)[i];
        if (ga) ga->channel(c)[i] += mask[i] * g;
        if (gb) gb->channel(c)[i] += (1.0 - mask[i]) * g;
      }
    }
  });
}

Var mean_abs_diff(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mean_abs_diff");
  const std::size_t n = a.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return scalar_result(s / static_cast<double>(n), {a, b}, [n](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    const double g = self.grad[0] / static_cast<double>(n);
    for (std::size_t k = 0; k < 2; ++k) {
      Tensor* t = input_grad(self, k);
      if (!t) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = av[i] - bv[i];
        (*t)[i] += sign * g * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
      }
    }
  });
}

Var pixel_abs_sum(const Var& a, const Var& b, double normalizer) {
  require_same_shape(a.value(), b.value(), "pixel_abs_sum");
  if (!(normalizer > 0.0)) throw InvalidArgument("pixel_abs_sum: normalizer must be positive");
  const std::size_t n = a.value().size();
  const double per = 1.0 / (a.channels() * normalizer);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return scalar_result(s * per, {a, b}, [n, per](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    const double g = self.grad[0] * per;
    for (std::size_t k = 0; k < 2; ++k) {
      Tensor* t = input_grad(self, k);
      if (!t) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = av[i] - bv[i];
        (*t)[i] += sign * g * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
      }
    }
  });
}

Var sum_scalars(const std::vector<Var>& scalars) {
  double s = 0.0;
  for (const auto& v : scalars) {
    if (v.value().size() != 1) throw InvalidArgument("sum_scalars: non-scalar input");
    s += v.value()[0];
  }
  return scalar_result(s, scalars, [](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      if (Tensor* g = input_grad(self, k)) (*g)[0] += self.grad[0];
    }
  });
}

}  // namespace hdrv::ops
