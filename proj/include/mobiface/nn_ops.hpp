#pragma once

#include <optional>

#include "mobiface/tensor.hpp"

namespace mobiface {

// Parameter bundles for the Table-1 operator set. Kernels are stored
// [Cout, Cin, kH, kW] (depthwise: [C, 1, kH, kW]); kernels are square.
struct ConvParams {
    Tensor kernel;
    std::optional<Tensor> bias;  // absent whenever a BatchNorm follows
    int stride = 1;
    int pad = 0;
};

struct DwConvParams {
    Tensor kernel;  // [C, 1, kH, kW]
    int stride = 1;
    int pad = 0;
};

struct BatchNormParams {
    Tensor gamma, beta, running_mean, running_var;  // all [C]
    float epsilon = 1e-5f;
};

struct PReLUParams {
    Tensor slopes;  // [C]
};

struct FcParams {
    Tensor weight;  // [out_dim, in_dim]
    Tensor bias;    // [out_dim]
};

// floor((in + 2*pad - k) / stride) + 1; throws if the result is < 1.
int conv_output_extent(int in, int k, int stride, int pad);

// Cross-correlation (no kernel flip). Accumulation runs per output element
// in channel, kernel-row, kernel-column order; bias is added last.
Tensor conv2d(const Tensor& x, const ConvParams& p);

// Per-channel cross-correlation with the same shape law as conv2d.
Tensor dwconv2d(const Tensor& x, const DwConvParams& p);

// Inference-mode batch normalization from running statistics.
Tensor batchnorm(const Tensor& x, const BatchNormParams& p);

// Returns a biased convolution satisfying conv'(x) == bn(conv(x)) up to
// rounding, for any x.
ConvParams fold_bn(const ConvParams& conv, const BatchNormParams& bn);

Tensor prelu(const Tensor& x, const PReLUParams& p);

Tensor relu(const Tensor& x);

// weight * x + bias for a rank-1 input.
Tensor fully_connected(const Tensor& x, const FcParams& p);

// Elementwise sum of identically shaped tensors (the block shortcut).
Tensor residual_add(const Tensor& x, const Tensor& y);

// [N,C,H,W] -> [N, C*H*W], per-sample row-major in C,H,W order.
Tensor flatten(const Tensor& x);

}  // namespace mobiface
