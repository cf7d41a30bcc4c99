#pragma once

// Serial loop-nest implementations of the kernels in kernels.hpp. They are
// written for obviousness, not speed, and exist to check the parallel kernels
// in tests and to serve as the baseline in the kernel benchmark.

#include "hdrv/kernels.hpp"

namespace hdrv::reference {

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias,
                      const kernels::ConvGeometry& g);
void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                     const kernels::ConvGeometry& g, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias);

Tensor deform_conv2d_forward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                             const Tensor* bias, const kernels::ConvGeometry& g);
void deform_conv2d_backward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                            const Tensor& grad_out, const kernels::ConvGeometry& g,
                            Tensor* grad_input, Tensor* grad_offsets, Tensor* grad_weight,
                            Tensor* grad_bias);

Tensor backward_warp_forward(const Tensor& image, const Tensor& flow);
void backward_warp_backward(const Tensor& image, const Tensor& flow, const Tensor& grad_out,
                            Tensor* grad_image, Tensor* grad_flow);

// Zero-padded bilinear read used by the deformable reference.
double bilinear_zero(const Tensor& t, int c, double y, double x);
// Edge-clamped bilinear read used by the warp reference.
double bilinear_clamp(const Tensor& t, int c, double y, double x);

}  // namespace hdrv::reference
