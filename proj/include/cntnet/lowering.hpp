#pragma once

// Conv2D and recurrent layers expressed as layered graphs.

#include <cstddef>
#include <utility>
#include <vector>

#include "cntnet/matrix.hpp"
#include "cntnet/netgraph.hpp"

namespace cntnet {

struct PatchEntry {
    std::size_t input_node;    // row-major pixel index in the input image
    std::size_t kernel_index;  // row-major index into the kernel
};

/// The patches of a convolution: for every output pixel, the k*k input
/// pixels it reads and which (shared) kernel entry multiplies each one.
struct PatchCoupling {
    std::vector<std::pair<std::size_t, std::vector<PatchEntry>>> patches;
    std::vector<double> kernel_weights;
    double bias = 0.0;
};

PatchCoupling patch_coupling(const Conv2DShape& shape, const LayerParams& params);

/// One input node per pixel, one output node per output pixel, one edge per
/// (patch, kernel entry). Shared kernel weights appear on many edges.
LayeredGraph lower_conv(const LayerSpec& layer, const LayerParams& params);

/// Largest h*w accepted by toeplitz_oracle.
inline constexpr std::size_t kToeplitzMaxInput = 4096;

/// Dense (h*w) x (out_h*out_w) matrix M with flatten(conv(z)) = flatten(z) * M.
/// Test oracle only; refuses inputs larger than kToeplitzMaxInput pixels.
Matrix toeplitz_oracle(const LayerSpec& layer, const LayerParams& params);

/// Unfolds a recurrent layer over its horizon T into T + 1 node layers.
///
/// Node layer 0 holds x_1. Node layer t (1 <= t <= T) holds the hidden state
/// h_t in indices [0, hidden) followed, for t < T, by the next input block
/// x_{t+1} in [hidden, hidden + input). Gap t-1 carries W_xh from the input
/// block and, for t >= 2, W_hh from h_{t-1}; every hidden node gets the bias.
LayeredGraph lower_recurrent(const LayerSpec& layer, const LayerParams& params);

/// Lowers a chain of Dense and Conv2D layers into one graph. Recurrent
/// layers have a different input layout and must go through lower_recurrent().
LayeredGraph lower(const NetworkSpec& spec);

}  // namespace cntnet
