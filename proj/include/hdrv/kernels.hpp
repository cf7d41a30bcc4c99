#pragma once

// OpenMP-parallel compute kernels behind the differentiable ops. Every kernel
// writes each output element from exactly one thread in a fixed order, so
// results do not depend on the thread count. Serial, loop-nest reference
// versions live in reference_kernels.hpp.

#include "hdrv/tensor.hpp"

namespace hdrv::kernels {

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

// weight: (out, in * k * k, 1); bias: (out, 1, 1) or empty.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias,
                      const ConvGeometry& g);

// Accumulates into whichever of grad_input / grad_weight / grad_bias is non-null.
void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                     const ConvGeometry& g, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias);

// Deformable convolution (stride 1, zero padding outside the image).
// offsets: (2 * k * k, H, W); channel 2t holds dx and 2t+1 holds dy of tap t.
Tensor deform_conv2d_forward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                             const Tensor* bias, const ConvGeometry& g);

void deform_conv2d_backward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                            const Tensor& grad_out, const ConvGeometry& g, Tensor* grad_input,
                            Tensor* grad_offsets, Tensor* grad_weight, Tensor* grad_bias);

// output(c, p) = bilinear(image(c), p + flow(p)), coordinates clamped to the
// border. flow: (2, H, W) with (dx, dy).
Tensor backward_warp_forward(const Tensor& image, const Tensor& flow);

void backward_warp_backward(const Tensor& image, const Tensor& flow, const Tensor& grad_out,
                            Tensor* grad_image, Tensor* grad_flow);

// x2 bilinear upsampling with half-pixel centers and edge clamping.
Tensor upsample2x_forward(const Tensor& input);
void upsample2x_backward(const Tensor& grad_out, Tensor& grad_input);

}  // namespace hdrv::kernels
