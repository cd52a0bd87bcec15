#pragma once

#include <span>
#include <vector>

#include "cntnet/netgraph.hpp"

namespace cntnet {

/// Per-layer pre-activations z and activations f(z) for one input.
struct ForwardTrace {
    std::vector<std::vector<double>> pre_activation;
    std::vector<std::vector<double>> activation;

    const std::vector<double>& output() const { return activation.back(); }
};

/// Applies `kind` to z. Softmax is computed over the whole vector with the
/// maximum subtracted first, so large logits do not overflow.
std::vector<double> activate(Activation kind, std::span<const double> z);

/// Pre-activation of a single layer for input x (which must have the
/// layer's input_size()). Recurrent layers return the last step's pre-activation.
std::vector<double> layer_pre_activation(const LayerSpec& layer, const LayerParams& params,
                                         std::span<const double> x);

/// Runs x through every layer of a valid spec. Throws StructuralError on
/// a dimension mismatch or an invalid spec.
ForwardTrace forward(std::span<const double> x, const NetworkSpec& spec);

/// Same as forward() but skips validation; for hot loops over a spec that
/// has already been validated.
ForwardTrace forward_unchecked(std::span<const double> x, const NetworkSpec& spec);

}  // namespace cntnet
