#pragma once

// Networks as layered directed graphs.
//
// A NetworkSpec is the parametric view (layer shapes plus weights); a
// LayeredGraph is the complex-network view, in which every parameter is
// the weight of a directed edge between neurons of consecutive layers.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cntnet/matrix.hpp"

namespace cntnet {

enum class Activation { Linear, ReLU, Sigmoid, Softmax };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

enum class LayerKind { Dense, Conv2D, Recurrent };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct Conv2DShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;

    std::size_t out_height() const { return (height - kernel) / stride + 1; }
    std::size_t out_width() const { return (width - kernel) / stride + 1; }

    bool operator==(const Conv2DShape&) const = default;
};

struct RecurrentShape {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t horizon = 0;

    bool operator==(const RecurrentShape&) const = default;
};

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t in_dim = 0;   // Dense only
    std::size_t out_dim = 0;  // Dense only
    Conv2DShape conv;
    RecurrentShape recurrent;
    Activation activation = Activation::Linear;

    static LayerSpec dense(std::size_t in, std::size_t out, Activation act);
    static LayerSpec conv2d(Conv2DShape shape, Activation act);
    static LayerSpec rnn(RecurrentShape shape, Activation act);

    // Flattened input / output lengths. A recurrent layer consumes the
    // concatenation of `horizon` input vectors and emits the last hidden state.
    std::size_t input_size() const;
    std::size_t output_size() const;

    bool operator==(const LayerSpec&) const = default;
};

/// Parameters of one layer.
///   Dense:     weights in x out, bias[out]
///   Conv2D:    weights kernel x kernel, bias[1] (shared by every output pixel)
///   Recurrent: weights = W_xh (input_dim x hidden_dim),
///              recurrent = W_hh (hidden_dim x hidden_dim), bias[hidden_dim]
struct LayerParams {
    Matrix weights;
    Matrix recurrent;
    std::vector<double> bias;

    bool operator==(const LayerParams&) const = default;
};

/// Zero-filled parameters with the shapes `spec` requires.
LayerParams zero_params(const LayerSpec& spec);

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::vector<LayerParams> params;

    std::size_t input_size() const { return layers.empty() ? 0 : layers.front().input_size(); }
    std::size_t output_size() const { return layers.empty() ? 0 : layers.back().output_size(); }
    std::size_t parameter_count() const;

    bool operator==(const NetworkSpec&) const = default;
};

/// Convenience for fully connected stacks: widths {784, 128, 10} with the
/// given hidden and output activations; parameters are zero.
NetworkSpec make_dense_network(const std::vector<std::size_t>& widths, Activation hidden,
                               Activation output);

struct Violation {
    std::size_t layer;
    std::string rule;  // "dimension", "conv-geometry", "chaining", "param-shape", "finite", "softmax-position"
    std::string message;

    bool operator==(const Violation&) const = default;
};

/// Checks every structural invariant; an empty result means the spec is
/// well formed. Chaining violations are reported at the earlier layer.
std::vector<Violation> validate(const NetworkSpec& spec);

/// Throws StructuralError listing all violations, if any.
void require_valid(const NetworkSpec& spec);

struct NodeId {
    std::size_t layer;
    std::size_t index;

    bool operator==(const NodeId&) const = default;
};

struct Edge {
    std::uint32_t source;  // index within layer g
    std::uint32_t target;  // index within layer g + 1
    double weight;

    bool operator==(const Edge&) const = default;
};

/// Bipartite-between-neighbours directed graph. Gap g holds the edges from
/// node layer g to node layer g + 1 and the bias of every node in layer g + 1.
class LayeredGraph {
public:
    LayeredGraph() = default;
    explicit LayeredGraph(std::vector<std::size_t> layer_sizes);

    std::size_t layer_count() const noexcept { return layer_sizes_.size(); }
    std::size_t gap_count() const noexcept { return gaps_.size(); }
    std::size_t layer_size(std::size_t layer) const { return layer_sizes_.at(layer); }
    const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
    std::size_t node_count() const;
    std::size_t edge_count() const;

    std::size_t global_id(NodeId node) const;

    const std::vector<Edge>& edges(std::size_t gap) const { return gaps_.at(gap); }
    const std::vector<double>& dest_bias(std::size_t gap) const { return biases_.at(gap); }

    void add_edge(std::size_t gap, std::uint32_t source, std::uint32_t target, double weight);
    void set_bias(std::size_t gap, std::size_t target, double bias);

    /// Appends a node layer of `size` nodes and the empty gap leading to it.
    void append_layer(std::size_t size);

    bool operator==(const LayeredGraph&) const = default;

private:
    std::vector<std::size_t> layer_sizes_;
    std::vector<std::vector<Edge>> gaps_;
    std::vector<std::vector<double>> biases_;
};

/// One node per neuron, one edge per weight-matrix entry (row-major order),
/// destination biases copied from the bias vectors. All layers must be Dense.
LayeredGraph lower_dense(const NetworkSpec& spec);

/// Rebuilds the weight matrix of one gap; the inverse of lowering a Dense layer.
Matrix gap_weight_matrix(const LayeredGraph& graph, std::size_t gap);

}  // namespace cntnet
