#pragma once

#include "mobiface/nn_ops.hpp"
#include "mobiface/tensor.hpp"

namespace mobiface::oracle {

// Brute-force reference implementations used to check the engine kernels.
// Direct nested loops, no im2col, no blocking. They share the parameter
// structs with the engine but none of its code, and accumulate in the same
// fixed order (channel, kernel row, kernel column; bias last) so that
// agreement is bitwise when the engine takes no reordering fast path.

Tensor naive_conv2d(const Tensor& x, const ConvParams& p);

Tensor naive_dwconv2d(const Tensor& x, const DwConvParams& p);

Tensor naive_fc(const Tensor& x, const FcParams& p);

}  // namespace mobiface::oracle
