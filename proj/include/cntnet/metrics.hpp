#pragma once

// Complex-network metrics over networks-as-graphs.
//
// Layer indices: link-weight metrics take a parameter (gap) index l, which
// connects node layer l to node layer l + 1. Node-level metrics take a node
// layer index, where layer 0 is the input layer. Neuron strength and
// activation of parameter layer l describe the nodes of node layer l + 1.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cntnet/netgraph.hpp"

namespace cntnet {

inline constexpr double kDisparityEpsilon = 1e-8;

// Mean and population variance of (w_ij + b_j) over one layer.
double link_weight_mean(const NetworkSpec& spec, std::size_t layer);
double link_weight_var(const NetworkSpec& spec, std::size_t layer);
double link_weight_mean(const LayeredGraph& graph, std::size_t gap);
double link_weight_var(const LayeredGraph& graph, std::size_t gap);

struct NodeStrength {
    double in = 0.0;   // incoming weights plus the node's bias, added once
    double out = 0.0;  // outgoing weights
    double total = 0.0;

    bool operator==(const NodeStrength&) const = default;
};

NodeStrength node_strength(const LayeredGraph& graph, std::size_t layer, std::size_t node);

/// Strengths of every node of one layer in a single pass over its edges.
std::vector<NodeStrength> layer_strengths(const LayeredGraph& graph, std::size_t layer);

/// Pre-activation of parameter layer `layer` for input x (Neurons Strength).
std::vector<double> neuron_strength(const NetworkSpec& spec, std::size_t layer, std::span<const double> x);

/// f(zeta) of parameter layer `layer` for input x (Neurons Activation).
std::vector<double> neuron_activation(const NetworkSpec& spec, std::size_t layer, std::span<const double> x);

/// Neurons Strength computed on the graph: sum over incoming edges of
/// z_source * w plus bias, with `upstream` the activations of node layer `gap`.
std::vector<double> neuron_strength(const LayeredGraph& graph, std::size_t gap, std::span<const double> upstream);

enum class StrengthKind { In, Out, Total };

/// Root-mean-square deviation of a set of strengths around their mean.
double fluctuation(std::span<const double> strengths);

/// Layers Fluctuation of node layer `layer`, normalised by its node count.
double layer_fluctuation(const LayeredGraph& graph, std::size_t layer, StrengthKind kind = StrengthKind::Total);

/// sum_i (w_i / s)^2 with s = sum_i w_i. Throws IllConditionedDisparity if |s| <= epsilon.
double disparity(std::span<const double> weights, double epsilon = kDisparityEpsilon);

/// Disparity of a node over its incoming link weights (outgoing for input-layer nodes).
double node_disparity(const LayeredGraph& graph, std::size_t layer, std::size_t node,
                      double epsilon = kDisparityEpsilon);

enum class MetricKind {
    LinkWeightMean,
    LinkWeightVar,
    NodeStrength,
    NodeInStrength,
    NodeOutStrength,
    NeuronStrength,
    NeuronActivation,
    LayerFluctuation,
    NodeDisparity,
};

inline constexpr MetricKind kAllMetricKinds[] = {
    MetricKind::LinkWeightMean, MetricKind::LinkWeightVar,    MetricKind::NodeStrength,
    MetricKind::NodeInStrength, MetricKind::NodeOutStrength,  MetricKind::NeuronStrength,
    MetricKind::NeuronActivation, MetricKind::LayerFluctuation, MetricKind::NodeDisparity,
};

std::string_view to_string(MetricKind kind);
MetricKind metric_kind_from_string(std::string_view name);
bool is_input_dependent(MetricKind kind);

/// One metric value with provenance. `layer` is a gap index for the
/// link-weight metrics and a node-layer index for everything else.
/// Ill-conditioned disparities are kept as flagged samples with a NaN value.
struct MetricSample {
    MetricKind metric;
    std::string network_id;
    std::size_t layer = 0;
    std::optional<std::size_t> node;
    std::optional<std::size_t> input_sample;
    double value = 0.0;
    bool flagged = false;
};

struct CollectOptions {
    bool link_weights = true;
    bool node_strengths = true;
    bool fluctuation = true;
    bool disparity = true;
    double disparity_epsilon = kDisparityEpsilon;
};

/// Every metric at every layer for one network. Input-independent metrics
/// are emitted once; neuron strength/activation once per (input, neuron).
/// Output is sorted by (metric, layer, node, input_sample).
std::vector<MetricSample> collect(const NetworkSpec& spec, std::span<const std::vector<double>> inputs,
                                  const std::string& network_id, const CollectOptions& options = {});

}  // namespace cntnet
