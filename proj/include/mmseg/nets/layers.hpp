#pragma once

#include <vector>

#include "mmseg/core/rng.hpp"
#include "mmseg/core/tensor.hpp"

namespace mmseg {

// 3D convolution over (C, D, H, W) tensors. Forward/backward are stateless:
// backward takes the cached forward input, accumulates into gw/gb and returns
// the input gradient. Stride-1 paths run on contiguous W-rows through the
// axpy/dot kernels; strided convs fall back to scalar loops.
struct Conv3d {
    int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
    Tensor w, b, gw, gb;

    Conv3d() = default;
    Conv3d(int in_channels, int out_channels, int kernel, int stride_, int pad_);

    void init_params(Rng& rng);
    void zero_grad();
    std::size_t param_count() const { return w.numel() + b.numel(); }

    std::vector<int> out_shape(const std::vector<int>& in_shape) const;
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);
};

Tensor relu(const Tensor& x);
// gx contribution of relu given pre-activation x; returns gradient wrt x.
Tensor relu_grad(const Tensor& x, const Tensor& gy);

// Nearest-neighbor 2x upsampling along D,H,W.
Tensor upsample2(const Tensor& x);
Tensor upsample2_grad(const std::vector<int>& in_shape, const Tensor& gy);

}  // namespace mmseg
