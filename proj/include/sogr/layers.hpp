#pragma once

#include <vector>

#include "sogr/autograd.hpp"

namespace sogr {

// Geometry of one (possibly transposed) square convolution. Padding may be
// asymmetric: pad_lo is applied before the first row/column, pad_hi after the
// last. Both spatial dims share the same padding pair.
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int pad_lo = 0;
    int pad_hi = 0;

    static ConvSpec make(int in_channels, int out_channels, int kernel, int stride, int pad);
    // stride-1 size-preserving spec for the even kernel 4: pads (1, 2)
    static ConvSpec same_k4(int in_channels, int out_channels);

    int out_size(int in) const;            // floor((in + pads - k) / stride) + 1
    int transpose_out_size(int in) const;  // (in - 1) * stride - pads + k
    void validate() const;
};

// x: [N, IC, H, W], w: [OC, IC, K, K], b: [OC] or null
NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, const ConvSpec& spec);

// Exact adjoint of conv2d with the same spec. x: [N, IC, H, W],
// w: [IC, OC, K, K], b: [OC] or null.
NodePtr conv2d_transpose(const NodePtr& x, const NodePtr& w, const NodePtr& b,
                         const ConvSpec& spec);

// Per-sample, per-channel spatial normalization with learned affine.
// x: [N, C, H, W], scale/shift: [C].
NodePtr instance_norm(const NodePtr& x, const NodePtr& scale, const NodePtr& shift,
                      float eps = 1e-5f);

// Box-average downsampling by an integer factor; H and W must divide evenly.
NodePtr avg_pool_downsample(const NodePtr& x, int factor);

// Concatenation along the channel axis of [N, C, H, W] tensors.
NodePtr concat_channels(const std::vector<NodePtr>& xs);

}  // namespace sogr
