#include "hdrv/reference_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace hdrv::reference {

using kernels::ConvGeometry;

namespace {

double pixel_or_zero(const Tensor& t, int c, int y, int x) {
  if (y < 0 || y >= t.height() || x < 0 || x >= t.width()) return 0.0;
  return t.at(c, y, x);
}

double pixel_clamped(const Tensor& t, int c, int y, int x) {
  return t.at(c, std::clamp(y, 0, t.height() - 1), std::clamp(x, 0, t.width() - 1));
}

double weight_at(const Tensor& weight, int o, int c, int ky, int kx, int k) {
  return weight.at(o, (c * k + ky) * k + kx, 0);
}

}  // namespace

double bilinear_zero(const Tensor& t, int c, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * (1 - fx) * pixel_or_zero(t, c, y0, x0) +
         (1 - fy) * fx * pixel_or_zero(t, c, y0, x0 + 1) +
         fy * (1 - fx) * pixel_or_zero(t, c, y0 + 1, x0) +
         fy * fx * pixel_or_zero(t, c, y0 + 1, x0 + 1);
}

double bilinear_clamp(const Tensor& t, int c, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * (1 - fx) * pixel_clamped(t, c, y0, x0) +
         (1 - fy) * fx * pixel_clamped(t, c, y0, x0 + 1) +
         fy * (1 - fx) * pixel_clamped(t, c, y0 + 1, x0) +
         fy * fx * pixel_clamped(t, c, y0 + 1, x0 + 1);
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias,
                      const ConvGeometry& g) {
  const int k = g.kernel;
  const int ho = g.out_size(input.height()), wo = g.out_size(input.width());
  Tensor out(weight.channels(), ho, wo);
  for (int o = 0; o < out.channels(); ++o) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double s = (bias != nullptr && !bias->empty()) ? (*bias)[o] : 0.0;
        for (int c = 0; c < input.channels(); ++c) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              s += weight_at(weight, o, c, ky, kx, k) *
                   pixel_or_zero(input, c, oy * g.stride + ky - g.pad, ox * g.stride + kx - g.pad);
            }
          }
        }
        out.at(o, oy, ox) = s;
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                     const ConvGeometry& g, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias) {
  const int k = g.kernel;
  for (int o = 0; o < grad_out.channels(); ++o) {
    for (int oy = 0; oy < grad_out.height(); ++oy) {
      for (int ox = 0; ox < grad_out.width(); ++ox) {
        const double go = grad_out.at(o, oy, ox);
        if (grad_bias != nullptr) (*grad_bias)[o] += go;
        for (int c = 0; c < input.channels(); ++c) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * g.stride + ky - g.pad, ix = ox * g.stride + kx - g.pad;
              if (iy < 0 || iy >= input.height() || ix < 0 || ix >= input.width()) continue;
              if (grad_weight != nullptr) {
                grad_weight->at(o, (c * k + ky) * k + kx, 0) += go * input.at(c, iy, ix);
              }
              if (grad_input != nullptr) {
                grad_input->at(c, iy, ix) += go * weight_at(weight, o, c, ky, kx, k);
              }
            }
          }
        }
      }
    }
  }
}

Tensor deform_conv2d_forward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                             const Tensor* bias, const ConvGeometry& g) {
  const int k = g.kernel;
  Tensor out(weight.channels(), input.height(), input.width());
  for (int o = 0; o < out.channels(); ++o) {
    for (int y = 0; y < input.height(); ++y) {
      for (int x = 0; x < input.width(); ++x) {
        double s = (bias != nullptr && !bias->empty()) ? (*bias)[o] : 0.0;
        for (int c = 0; c < input.channels(); ++c) {
          for (int t = 0; t < k * k; ++t) {
            const int ky = t / k, kx = t % k;
            const double py = y + ky - g.pad + offsets.at(2 * t + 1, y, x);
            const double px = x + kx - g.pad + offsets.at(2 * t, y, x);
            s += weight_at(weight, o, c, ky, kx, k) * bilinear_zero(input, c, py, px);
          }
        }
        out.at(o, y, x) = s;
      }
    }
  }
  return out;
}

void deform_conv2d_backward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                            const Tensor& grad_out, const ConvGeometry& g, Tensor* grad_input,
                            Tensor* grad_offsets, Tensor* grad_weight, Tensor* grad_bias) {
  const int k = g.kernel;
  for (int o = 0; o < grad_out.channels(); ++o) {
    for (int y = 0; y < input.height(); ++y) {
      for (int x = 0; x < input.width(); ++x) {
        const double go = grad_out.at(o, y, x);
        if (grad_bias != nullptr) (*grad_bias)[o] += go;
        for (int c = 0; c < input.channels(); ++c) {
          for (int t = 0; t < k * k; ++t) {
            const int ky = t / k, kx = t % k;
            const double py = y + ky - g.pad + offsets.at(2 * t + 1, y, x);
            const double px = x + kx - g.pad + offsets.at(2 * t, y, x);
            const double wv = weight_at(weight, o, c, ky, kx, k);
            if (grad_weight != nullptr) {
              grad_weight->at(o, (c * k + ky) * k + kx, 0) += go * bilinear_zero(input, c, py, px);
            }
            const int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
            const double fy = py - y0, fx = px - x0;
            if (grad_input != nullptr) {
              const int ys[2] = {y0, y0 + 1}, xs[2] = {x0, x0 + 1};
              const double wy[2] = {1 - fy, fy}, wx[2] = {1 - fx, fx};
              for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                  if (ys[a] < 0 || ys[a] >= input.height() || xs[b] < 0 || xs[b] >= input.width()) {
                    continue;
                  }
                  grad_input->at(c, ys[a], xs[b]) += go * wv * wy[a] * wx[b];
                }
              }
            }
            if (grad_offsets != nullptr) {
              const double v00 = pixel_or_zero(input, c, y0, x0);
              const double v01 = pixel_or_zero(input, c, y0, x0 + 1);
              const double v10 = pixel_or_zero(input, c, y0 + 1, x0);
              const double v11 = pixel_or_zero(input, c, y0 + 1, x0 + 1);
              grad_offsets->at(2 * t, y, x) +=
                  go * wv * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
              grad_offsets->at(2 * t + 1, y, x) +=
                  go * wv * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
            }
          }
        }
      }
    }
  }
}

Tensor backward_warp_forward(const Tensor& image, const Tensor& flow) {
  Tensor out = Tensor::like(image);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        out.at(c, y, x) = bilinear_clamp(image, c, y + flow.at(1, y, x), x + flow.at(0, y, x));
      }
    }
  }
  return out;
}

void backward_warp_backward(const Tensor& image, const Tensor& flow, const Tensor& grad_out,
                            Tensor* grad_image, Tensor* grad_flow) {
  const int h = image.height(), w = image.width();
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double go = grad_out.at(c, y, x);
        const double py = y + flow.at(1, y, x), px = x + flow.at(0, y, x);
        const int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
        const double fy = py - y0, fx = px - x0;
        if (grad_image != nullptr) {
          const int ya = std::clamp(y0, 0, h - 1), yb = std::clamp(y0 + 1, 0, h - 1);
          const int xa = std::clamp(x0, 0, w - 1), xb = std::clamp(x0 + 1, 0, w - 1);
          grad_image->at(c, ya, xa) += go * (1 - fy) * (1 - fx);
          grad_image->at(c, ya, xb) += go * (1 - fy) * fx;
          grad_image->at(c, yb, xa) += go * fy * (1 - fx);
          grad_image->at(c, yb, xb) += go * fy * fx;
        }
        if (grad_flow != nullptr) {
          const double v00 = pixel_clamped(image, c, y0, x0);
          const double v01 = pixel_clamped(image, c, y0, x0 + 1);
          const double v10 = pixel_clamped(image, c, y0 + 1, x0);
          const double v11 = pixel_clamped(image, c, y0 + 1, x0 + 1);
          grad_flow->at(0, y, x) += go * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
          grad_flow->at(1, y, x) += go * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
        }
      }
    }
  }
}

}  // namespace hdrv::reference
