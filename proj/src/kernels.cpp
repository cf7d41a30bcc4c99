#include "hdrv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdrv/errors.hpp"

namespace hdrv::kernels {
namespace {

constexpr int kBlockN = 256;

// C[M x N] += A[M x K] * B[K x N]
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C) {
  const int blocks = (N + kBlockN - 1) / kBlockN;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int n0 = blk * kBlockN;
    const int n1 = std::min(N, n0 + kBlockN);
    for (int m = 0; m < M; ++m) {
      double* c = C + static_cast<std::size_t>(m) * N;
      const double* a = A + static_cast<std::size_t>(m) * K;
      int k = 0;
      for (; k + 4 <= K; k += 4) {
        const double a0 = a[k], a1 = a[k + 1], a2 = a[k + 2], a3 = a[k + 3];
        const double* b0 = B + static_cast<std::size_t>(k) * N;
        const double* b1 = b0 + N;
        const double* b2 = b1 + N;
        const double* b3 = b2 + N;
#pragma omp simd
        for (int n = n0; n < n1; ++n) c[n] += a0 * b0[n] + a1 * b1[n] + a2 * b2[n] + a3 * b3[n];
      }
      for (; k < K; ++k) {
        const double a0 = a[k];
        const double* b0 = B + static_cast<std::size_t>(k) * N;
#pragma omp simd
        for (int n = n0; n < n1; ++n) c[n] += a0 * b0[n];
      }
    }
  }
}

// C[M x K] += A[M x N] * B[K x N]^T
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C) {
#pragma omp parallel for schedule(static)
  for (int mk = 0; mk < M * K; ++mk) {
    const int m = mk / K;
    const int k = mk % K;
    const double* a = A + static_cast<std::size_t>(m) * N;
    const double* b = B + static_cast<std::size_t>(k) * N;
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int n = 0; n < N; ++n) s += a[n] * b[n];
    C[mk] += s;
  }
}

// C[K x N] += A[M x K]^T * B[M x N]
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C) {
  const int blocks = (N + kBlockN - 1) / kBlockN;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int n0 = blk * kBlockN;
    const int n1 = std::min(N, n0 + kBlockN);
    for (int k = 0; k < K; ++k) {
      double* c = C + static_cast<std::size_t>(k) * N;
      for (int m = 0; m < M; ++m) {
        const double a = A[static_cast<std::size_t>(m) * K + k];
        const double* b = B + static_cast<std::size_t>(m) * N;
#pragma omp simd
        for (int n = n0; n < n1; ++n) c[n] += a * b[n];
      }
    }
  }
}

void check_conv_shapes(const Tensor& input, const Tensor& weight, const Tensor* bias,
                       const ConvGeometry& g) {
  const int kk = g.kernel * g.kernel;
  if (weight.height() != input.channels() * kk || weight.width() != 1) {
    throw InvalidArgument("conv2d: weight " + weight.shape_string() +
                          " does not match input " + input.shape_string());
  }
  if (bias != nullptr && !bias->empty() && bias->channels() != weight.channels()) {
    throw InvalidArgument("conv2d: bias size mismatch");
  }
  if (g.out_size(input.height()) <= 0 || g.out_size(input.width()) <= 0) {
    throw InvalidArgument("conv2d: input " + input.shape_string() + " too small");
  }
}

// Valid output range [lo, hi) such that o * stride + tap - pad lies in [0, n).
void valid_range(int n_in, int n_out, int stride, int shift, int& lo, int& hi) {
  // i = o * stride + shift
  lo = 0;
  while (lo < n_out && lo * stride + shift < 0) ++lo;
  hi = n_out;
  while (hi > lo && (hi - 1) * stride + shift >= n_in) --hi;
}

std::vector<double> im2col(const Tensor& in, const ConvGeometry& g, int ho, int wo) {
  const int k = g.kernel;
  const int rows = in.channels() * k * k;
  const int n = ho * wo;
  std::vector<double> col(static_cast<std::size_t>(rows) * n, 0.0);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.channels(); ++c) {
    const double* src = in.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      int ylo, yhi;
      valid_range(in.height(), ho, g.stride, ky - g.pad, ylo, yhi);
      for (int kx = 0; kx < k; ++kx) {
        int xlo, xhi;
        valid_range(in.width(), wo, g.stride, kx - g.pad, xlo, xhi);
        double* dst = col.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * n;
        for (int oy = ylo; oy < yhi; ++oy) {
          const double* row = src + static_cast<std::size_t>(oy * g.stride + ky - g.pad) * in.width();
          double* out = dst + static_cast<std::size_t>(oy) * wo;
          if (g.stride == 1) {
            const int shift = kx - g.pad;
            for (int ox = xlo; ox < xhi; ++ox) out[ox] = row[ox + shift];
          } else {
            for (int ox = xlo; ox < xhi; ++ox) out[ox] = row[ox * g.stride + kx - g.pad];
          }
        }
      }
    }
  }
  return col;
}

void col2im(const std::vector<double>& col, const ConvGeometry& g, int ho, int wo,
            Tensor& grad_in) {
  const int k = g.kernel;
  const int n = ho * wo;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < grad_in.channels(); ++c) {
    double* dst = grad_in.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      int ylo, yhi;
      valid_range(grad_in.height(), ho, g.stride, ky - g.pad, ylo, yhi);
      for (int kx = 0; kx < k; ++kx) {
        int xlo, xhi;
        valid_range(grad_in.width(), wo, g.stride, kx - g.pad, xlo, xhi);
        const double* src = col.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * n;
        for (int oy = ylo; oy < yhi; ++oy) {
          double* row =
              dst + static_cast<std::size_t>(oy * g.stride + ky - g.pad) * grad_in.width();
          const double* in = src + static_cast<std::size_t>(oy) * wo;
          for (int ox = xlo; ox < xhi; ++ox) row[ox * g.stride + kx - g.pad] += in[ox];
        }
      }
    }
  }
}

void add_bias(Tensor& out, const Tensor* bias) {
  if (bias == nullptr || bias->empty()) return;
  for (int o = 0; o < out.channels(); ++o) {
    double* p = out.channel(o);
    const double b = (*bias)[o];
    for (int i = 0; i < out.plane(); ++i) p[i] += b;
  }
}

void accumulate_bias_grad(const Tensor& grad_out, Tensor* grad_bias) {
  if (grad_bias == nullptr) return;
  for (int o = 0; o < grad_out.channels(); ++o) {
    const double* p = grad_out.channel(o);
    double s = 0.0;
    for (int i = 0; i < grad_out.plane(); ++i) s += p[i];
    (*grad_bias)[o] += s;
  }
}

// Bilinear sampling plan for one (tap, pixel): top-left corner, fractional
// parts, and per-corner validity under zero padding.
struct SamplePoint {
  int y0, x0;
  double fy, fx;
  bool v00, v01, v10, v11;
};

std::vector<SamplePoint> deform_plan(const Tensor& input, const Tensor& offsets,
                                     const ConvGeometry& g) {
  const int h = input.height(), w = input.width();
  const int taps = g.kernel * g.kernel;
  std::vector<SamplePoint> plan(static_cast<std::size_t>(taps) * h * w);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < taps; ++t) {
    const int ky = t / g.kernel, kx = t % g.kernel;
    const double* dx = offsets.channel(2 * t);
    const double* dy = offsets.channel(2 * t + 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int i = y * w + x;
        const double py = y + ky - g.pad + dy[i];
        const double px = x + kx - g.pad + dx[i];
        SamplePoint& s = plan[static_cast<std::size_t>(t) * h * w + i];
        const double fy0 = std::floor(py), fx0 = std::floor(px);
        s.y0 = static_cast<int>(fy0);
        s.x0 = static_cast<int>(fx0);
        s.fy = py - fy0;
        s.fx = px - fx0;
        const bool y0ok = s.y0 >= 0 && s.y0 < h, y1ok = s.y0 + 1 >= 0 && s.y0 + 1 < h;
        const bool x0ok = s.x0 >= 0 && s.x0 < w, x1ok = s.x0 + 1 >= 0 && s.x0 + 1 < w;
        s.v00 = y0ok && x0ok;
        s.v01 = y0ok && x1ok;
        s.v10 = y1ok && x0ok;
        s.v11 = y1ok && x1ok;
      }
    }
  }
  return plan;
}

struct Corners {
  double c00, c01, c10, c11;
};

inline Corners read_corners(const double* src, int w, const SamplePoint& s) {
  const std::size_t base = static_cast<std::size_t>(s.y0) * w + s.x0;
  return {s.v00 ? src[base] : 0.0, s.v01 ? src[base + 1] : 0.0, s.v10 ? src[base + w] : 0.0,
          s.v11 ? src[base + w + 1] : 0.0};
}

void check_deform_shapes(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                         const Tensor* bias, const ConvGeometry& g) {
  if (g.stride != 1 || 2 * g.pad != g.kernel - 1) {
    throw InvalidArgument("deform_conv2d: only stride 1 'same' geometry is supported");
  }
  check_conv_shapes(input, weight, bias, g);
  if (offsets.channels() != 2 * g.kernel * g.kernel || !offsets.same_spatial(input)) {
    throw InvalidArgument("deform_conv2d: offsets " + offsets.shape_string() +
                          " incompatible with input " + input.shape_string());
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias,
                      const ConvGeometry& g) {
  check_conv_shapes(input, weight, bias, g);
  const int ho = g.out_size(input.height()), wo = g.out_size(input.width());
  const auto col = im2col(input, g, ho, wo);
  Tensor out(weight.channels(), ho, wo);
  gemm_nn(weight.channels(), ho * wo, weight.height(), weight.data(), col.data(), out.data());
  add_bias(out, bias);
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                     const ConvGeometry& g, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias) {
  const int ho = grad_out.height(), wo = grad_out.width();
  const int n = ho * wo;
  const int rows = weight.height();
  if (grad_weight != nullptr) {
    const auto col = im2col(input, g, ho, wo);
    gemm_nt(weight.channels(), n, rows, grad_out.data(), col.data(), grad_weight->data());
  }
  accumulate_bias_grad(grad_out, grad_bias);
  if (grad_input != nullptr) {
    std::vector<double> gcol(static_cast<std::size_t>(rows) * n, 0.0);
    gemm_tn(weight.channels(), n, rows, weight.data(), grad_out.data(), gcol.data());
    col2im(gcol, g, ho, wo, *grad_input);
  }
}

Tensor deform_conv2d_forward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                             const Tensor* bias, const ConvGeometry& g) {
  check_deform_shapes(input, offsets, weight, bias, g);
  const int h = input.height(), w = input.width(), n = h * w;
  const int taps = g.kernel * g.kernel;
  const auto plan = deform_plan(input, offsets, g);
  std::vector<double> col(static_cast<std::size_t>(input.channels()) * taps * n);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < input.channels(); ++c) {
    const double* src = input.channel(c);
    for (int t = 0; t < taps; ++t) {
      double* dst = col.data() + static_cast<std::size_t>(c * taps + t) * n;
      const SamplePoint* sp = plan.data() + static_cast<std::size_t>(t) * n;
      for (int i = 0; i < n; ++i) {
        const auto& s = sp[i];
        const auto v = read_corners(src, w, s);
        dst[i] = (1 - s.fy) * ((1 - s.fx) * v.c00 + s.fx * v.c01) +
                 s.fy * ((1 - s.fx) * v.c10 + s.fx * v.c11);
      }
    }
  }
  Tensor out(weight.channels(), h, w);
  gemm_nn(weight.channels(), n, weight.height(), weight.data(), col.data(), out.data());
  add_bias(out, bias);
  return out;
}

void deform_conv2d_backward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                            const Tensor& grad_out, const ConvGeometry& g, Tensor* grad_input,
                            Tensor* grad_offsets, Tensor* grad_weight, Tensor* grad_bias) {
  const int h = input.height(), w = input.width(), n = h * w;
  const int taps = g.kernel * g.kernel;
  const int channels = input.channels();
  const auto plan = deform_plan(input, offsets, g);

  if (grad_weight != nullptr) {
    std::vector<double> col(static_cast<std::size_t>(channels) * taps * n);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
      const double* src = input.channel(c);
      for (int t = 0; t < taps; ++t) {
        double* dst = col.data() + static_cast<std::size_t>(c * taps + t) * n;
        const SamplePoint* sp = plan.data() + static_cast<std::size_t>(t) * n;
        for (int i = 0; i < n; ++i) {
          const auto& s = sp[i];
          const auto v = read_corners(src, w, s);
          dst[i] = (1 - s.fy) * ((1 - s.fx) * v.c00 + s.fx * v.c01) +
                   s.fy * ((1 - s.fx) * v.c10 + s.fx * v.c11);
        }
      }
    }
    gemm_nt(weight.channels(), n, weight.height(), grad_out.data(), col.data(),
            grad_weight->data());
  }
  accumulate_bias_grad(grad_out, grad_bias);
  if (grad_input == nullptr && grad_offsets == nullptr) return;

  std::vector<double> gcol(static_cast<std::size_t>(channels) * taps * n, 0.0);
  gemm_tn(weight.channels(), n, weight.height(), weight.data(), grad_out.data(), gcol.data());

  if (grad_input != nullptr) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
      double* dst = grad_input->channel(c);
      for (int t = 0; t < taps; ++t) {
        const double* gc = gcol.data() + static_cast<std::size_t>(c * taps + t) * n;
        const SamplePoint* sp = plan.data() + static_cast<std::size_t>(t) * n;
        for (int i = 0; i < n; ++i) {
          const auto& s = sp[i];
          const double gv = gc[i];
          const std::size_t base = static_cast<std::size_t>(s.y0) * w + s.x0;
          if (s.v00) dst[base] += gv * (1 - s.fy) * (1 - s.fx);
          if (s.v01) dst[base + 1] += gv * (1 - s.fy) * s.fx;
          if (s.v10) dst[base + w] += gv * s.fy * (1 - s.fx);
          if (s.v11) dst[base + w + 1] += gv * s.fy * s.fx;
        }
      }
    }
  }
  if (grad_offsets != nullptr) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < taps; ++t) {
      double* gdx = grad_offsets->channel(2 * t);
      double* gdy = grad_offsets->channel(2 * t + 1);
      const SamplePoint* sp = plan.data() + static_cast<std::size_t>(t) * n;
      for (int c = 0; c < channels; ++c) {
        const double* src = input.channel(c);
        const double* gc = gcol.data() + static_cast<std::size_t>(c * taps + t) * n;
        for (int i = 0; i < n; ++i) {
          const auto& s = sp[i];
          const auto v = read_corners(src, w, s);
          gdx[i] += gc[i] * ((1 - s.fy) * (v.c01 - v.c00) + s.fy * (v.c11 - v.c10));
          gdy[i] += gc[i] * ((1 - s.fx) * (v.c10 - v.c00) + s.fx * (v.c11 - v.c01));
        }
      }
    }
  }
}

namespace {

struct ClampedPoint {
  std::size_t i00, i01, i10, i11;
  double fy, fx;
};

ClampedPoint clamped_point(int h, int w, double py, double px) {
  const double fy0 = std::floor(py), fx0 = std::floor(px);
  const int y0 = static_cast<int>(fy0), x0 = static_cast<int>(fx0);
  const int ya = std::clamp(y0, 0, h - 1), yb = std::clamp(y0 + 1, 0, h - 1);
  const int xa = std::clamp(x0, 0, w - 1), xb = std::clamp(x0 + 1, 0, w - 1);
  return {static_cast<std::size_t>(ya) * w + xa, static_cast<std::size_t>(ya) * w + xb,
          static_cast<std::size_t>(yb) * w + xa, static_cast<std::size_t>(yb) * w + xb,
          py - fy0, px - fx0};
}

void check_warp_shapes(const Tensor& image, const Tensor& flow) {
  if (flow.channels() != 2 || !flow.same_spatial(image)) {
    throw InvalidArgument("backward_warp: flow " + flow.shape_string() +
                          " does not match image " + image.shape_string());
  }
  if (!flow.all_finite()) throw NumericalError("backward_warp: non-finite flow");
}

}  // namespace

Tensor backward_warp_forward(const Tensor& image, const Tensor& flow) {
  check_warp_shapes(image, flow);
  const int h = image.height(), w = image.width();
  Tensor out = Tensor::like(image);
  const double* fx = flow.channel(0);
  const double* fy = flow.channel(1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const auto p = clamped_point(h, w, y + fy[i], x + fx[i]);
      for (int c = 0; c < image.channels(); ++c) {
        const double* src = image.channel(c);
        out.channel(c)[i] = (1 - p.fy) * ((1 - p.fx) * src[p.i00] + p.fx * src[p.i01]) +
                            p.fy * ((1 - p.fx) * src[p.i10] + p.fx * src[p.i11]);
      }
    }
  }
  return out;
}

void backward_warp_backward(const Tensor& image, const Tensor& flow, const Tensor& grad_out,
                            Tensor* grad_image, Tensor* grad_flow) {
  const int h = image.height(), w = image.width(), n = h * w;
  const double* fx = flow.channel(0);
  const double* fy = flow.channel(1);
  if (grad_image != nullptr) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < image.channels(); ++c) {
      double* dst = grad_image->channel(c);
      const double* g = grad_out.channel(c);
      for (int i = 0; i < n; ++i) {
        const auto p = clamped_point(h, w, i / w + fy[i], i % w + fx[i]);
        dst[p.i00] += g[i] * (1 - p.fy) * (1 - p.fx);
        dst[p.i01] += g[i] * (1 - p.fy) * p.fx;
        dst[p.i10] += g[i] * p.fy * (1 - p.fx);
        dst[p.i11] += g[i] * p.fy * p.fx;
      }
    }
  }
  if (grad_flow != nullptr) {
    double* gx = grad_flow->channel(0);
    double* gy = grad_flow->channel(1);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto p = clamped_point(h, w, i / w + fy[i], i % w + fx[i]);
      double sx = 0.0, sy = 0.0;
      for (int c = 0; c < image.channels(); ++c) {
        const double* src = image.channel(c);
        const double g = grad_out.channel(c)[i];
        sx += g * ((1 - p.fy) * (src[p.i01] - src[p.i00]) + p.fy * (src[p.i11] - src[p.i10]));
        sy += g * ((1 - p.fx) * (src[p.i10] - src[p.i00]) + p.fx * (src[p.i11] - src[p.i01]));
      }
      gx[i] += sx;
      gy[i] += sy;
    }
  }
}

namespace {

struct Lerp {
  int i0, i1;
  double f;
};

std::vector<Lerp> upsample_axis(int in) {
  std::vector<Lerp> axis(static_cast<std::size_t>(in) * 2);
  for (int o = 0; o < 2 * in; ++o) {
    const double src = std::max(0.0, (o + 0.5) / 2.0 - 0.5);
    const int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    axis[o] = {i0, std::min(i0 + 1, in - 1), src - i0};
  }
  return axis;
}

}  // namespace

Tensor upsample2x_forward(const Tensor& input) {
  const auto ay = upsample_axis(input.height());
  const auto ax = upsample_axis(input.width());
  Tensor out(input.channels(), 2 * input.height(), 2 * input.width());
  const int w = input.width(), wo = out.width();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < input.channels(); ++c) {
    const double* src = input.channel(c);
    double* dst = out.channel(c);
    for (int y = 0; y < out.height(); ++y) {
      const auto& ly = ay[y];
      const double* r0 = src + static_cast<std::size_t>(ly.i0) * w;
      const double* r1 = src + static_cast<std::size_t>(ly.i1) * w;
      for (int x = 0; x < wo; ++x) {
        const auto& lx = ax[x];
        const double top = (1 - lx.f) * r0[lx.i0] + lx.f * r0[lx.i1];
        const double bot = (1 - lx.f) * r1[lx.i0] + lx.f * r1[lx.i1];
        dst[static_cast<std::size_t>(y) * wo + x] = (1 - ly.f) * top + ly.f * bot;
      }
    }
  }
  return out;
}

void upsample2x_backward(const Tensor& grad_out, Tensor& grad_input) {
  const auto ay = upsample_axis(grad_input.height());
  const auto ax = upsample_axis(grad_input.width());
  const int w = grad_input.width(), wo = grad_out.width();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < grad_input.channels(); ++c) {
    const double* g = grad_out.channel(c);
    double* dst = grad_input.channel(c);
    for (int y = 0; y < grad_out.height(); ++y) {
      const auto& ly = ay[y];
      double* r0 = dst + static_cast<std::size_t>(ly.i0) * w;
      double* r1 = dst + static_cast<std::size_t>(ly.i1) * w;
      for (int x = 0; x < wo; ++x) {
        const auto& lx = ax[x];
        const double v = g[static_cast<std::size_t>(y) * wo + x];
        r0[lx.i0] += v * (1 - ly.f) * (1 - lx.f);
        r0[lx.i1] += v * (1 - ly.f) * lx.f;
        r1[lx.i0] += v * ly.f * (1 - lx.f);
        r1[lx.i1] += v * ly.f * lx.f;
      }
    }
  }
}

}  // namespace hdrv::kernels
