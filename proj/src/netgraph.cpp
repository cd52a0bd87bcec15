#include "cntnet/netgraph.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "cntnet/errors.hpp"

namespace cntnet {

std::string_view to_string(Activation activation) {
    switch (activation) {
        case Activation::Linear: return "linear";
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "linear") return Activation::Linear;
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    throw ParameterError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::Recurrent: return "recurrent";
    }
    return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
    if (name == "dense") return LayerKind::Dense;
    if (name == "conv2d") return LayerKind::Conv2D;
    if (name == "recurrent") return LayerKind::Recurrent;
    throw ParameterError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_dim = in;
    s.out_dim = out;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::conv2d(Conv2DShape shape, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.conv = shape;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::rnn(RecurrentShape shape, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::Recurrent;
    s.recurrent = shape;
    s.activation = act;
    return s;
}

std::size_t LayerSpec::input_size() const {
    switch (kind) {
        case LayerKind::Dense: return in_dim;
        case LayerKind::Conv2D: return conv.height * conv.width;
        case LayerKind::Recurrent: return recurrent.input_dim * recurrent.horizon;
    }
    return 0;
}

std::size_t LayerSpec::output_size() const {
    switch (kind) {
        case LayerKind::Dense: return out_dim;
        case LayerKind::Conv2D:
            if (conv.kernel == 0 || conv.stride == 0 || conv.kernel > conv.height || conv.kernel > conv.width)
                return 0;
            return conv.out_height() * conv.out_width();
        case LayerKind::Recurrent: return recurrent.hidden_dim;
    }
    return 0;
}

LayerParams zero_params(const LayerSpec& spec) {
    LayerParams p;
    switch (spec.kind) {
        case LayerKind::Dense:
            p.weights = Matrix(spec.in_dim, spec.out_dim);
            p.bias.assign(spec.out_dim, 0.0);
            break;
        case LayerKind::Conv2D:
            p.weights = Matrix(spec.conv.kernel, spec.conv.kernel);
            p.bias.assign(1, 0.0);
            break;
        case LayerKind::Recurrent:
            p.weights = Matrix(spec.recurrent.input_dim, spec.recurrent.hidden_dim);
            p.recurrent = Matrix(spec.recurrent.hidden_dim, spec.recurrent.hidden_dim);
            p.bias.assign(spec.recurrent.hidden_dim, 0.0);
            break;
    }
    return p;
}

std::size_t NetworkSpec::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.weights.size() + p.recurrent.size() + p.bias.size();
    return n;
}

NetworkSpec make_dense_network(const std::vector<std::size_t>& widths, Activation hidden,
                               Activation output) {
    if (widths.size() < 2) throw ParameterError("a dense network needs at least two widths");
    NetworkSpec spec;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        spec.layers.push_back(LayerSpec::dense(widths[i], widths[i + 1], last ? output : hidden));
        spec.params.push_back(zero_params(spec.layers.back()));
    }
    return spec;
}

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_dims(std::size_t index, const LayerSpec& layer, std::vector<Violation>& out) {
    auto add = [&](std::string rule, std::string msg) {
        out.push_back({index, std::move(rule), std::move(msg)});
    };
    switch (layer.kind) {
        case LayerKind::Dense:
            if (layer.in_dim == 0 || layer.out_dim == 0)
                add("dimension", "dense layer dimensions must be positive");
            break;
        case LayerKind::Conv2D: {
            const auto& c = layer.conv;
            if (c.height == 0 || c.width == 0 || c.kernel == 0 || c.stride == 0) {
                add("dimension", "conv2d dimensions and stride must be positive");
            } else if (c.kernel > c.height || c.kernel > c.width) {
                add("conv-geometry", "kernel " + std::to_string(c.kernel) + " does not fit the input " +
                                         std::to_string(c.height) + "x" + std::to_string(c.width));
            }
            break;
        }
        case LayerKind::Recurrent: {
            const auto& r = layer.recurrent;
            if (r.input_dim == 0 || r.hidden_dim == 0 || r.horizon == 0)
                add("dimension", "recurrent input, hidden and horizon must be positive");
            break;
        }
    }
}

void check_param_shapes(std::size_t index, const LayerSpec& layer, const LayerParams& p,
                        std::vector<Violation>& out) {
    const LayerParams want = zero_params(layer);
    auto mismatch = [&](std::string_view what, std::string got, std::string expected) {
        out.push_back({index, "param-shape",
                       std::string(what) + " has shape " + got + ", expected " + expected});
    };
    if (p.weights.rows() != want.weights.rows() || p.weights.cols() != want.weights.cols())
        mismatch("weights", shape_str(p.weights), shape_str(want.weights));
    if (p.recurrent.rows() != want.recurrent.rows() || p.recurrent.cols() != want.recurrent.cols())
        mismatch("recurrent weights", shape_str(p.recurrent), shape_str(want.recurrent));
    if (p.bias.size() != want.bias.size())
        mismatch("bias", std::to_string(p.bias.size()), std::to_string(want.bias.size()));
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

std::vector<Violation> validate(const NetworkSpec& spec) {
    std::vector<Violation> out;
    if (spec.layers.empty()) {
        out.push_back({0, "dimension", "network has no layers"});
        return out;
    }
    if (spec.params.size() != spec.layers.size()) {
        out.push_back({0, "param-shape",
                       std::to_string(spec.params.size()) + " parameter sets for " +
                           std::to_string(spec.layers.size()) + " layers"});
    }
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& layer = spec.layers[i];
        const std::size_t before = out.size();
        check_dims(i, layer, out);
        const bool dims_ok = out.size() == before;

        if (i + 1 < spec.layers.size()) {
            if (layer.activation == Activation::Softmax)
                out.push_back({i, "softmax-position", "softmax is only allowed on the final layer"});
            const auto& next = spec.layers[i + 1];
            if (dims_ok && layer.output_size() != next.input_size()) {
                out.push_back({i, "chaining",
                               "layer " + std::to_string(i) + " emits " + std::to_string(layer.output_size()) +
                                   " values but layer " + std::to_string(i + 1) + " expects " +
                                   std::to_string(next.input_size())});
            }
        }
        if (i < spec.params.size()) {
            const auto& p = spec.params[i];
            if (dims_ok) check_param_shapes(i, layer, p, out);
            if (!all_finite(p.weights.values()) || !all_finite(p.recurrent.values()) || !all_finite(p.bias))
                out.push_back({i, "finite", "parameters contain NaN or Inf"});
        }
    }
    return out;
}

void require_valid(const NetworkSpec& spec) {
    const auto violations = validate(spec);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid network:";
    for (const auto& v : violations) msg << " [layer " << v.layer << ", " << v.rule << "] " << v.message << ";";
    throw StructuralError(msg.str());
}

LayeredGraph::LayeredGraph(std::vector<std::size_t> layer_sizes) : layer_sizes_(std::move(layer_sizes)) {
    if (layer_sizes_.empty()) return;
    gaps_.resize(layer_sizes_.size() - 1);
    for (std::size_t g = 0; g + 1 < layer_sizes_.size(); ++g) biases_.emplace_back(layer_sizes_[g + 1], 0.0);
}

std::size_t LayeredGraph::node_count() const {
    return std::accumulate(layer_sizes_.begin(), layer_sizes_.end(), std::size_t{0});
}

std::size_t LayeredGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& g : gaps_) n += g.size();
    return n;
}

std::size_t LayeredGraph::global_id(NodeId node) const {
    if (node.layer >= layer_sizes_.size() || node.index >= layer_sizes_[node.layer])
        throw StructuralError("node (" + std::to_string(node.layer) + ", " + std::to_string(node.index) +
                              ") does not exist");
    std::size_t offset = 0;
    for (std::size_t l = 0; l < node.layer; ++l) offset += layer_sizes_[l];
    return offset + node.index;
}

void LayeredGraph::add_edge(std::size_t gap, std::uint32_t source, std::uint32_t target, double weight) {
    if (gap >= gaps_.size() || source >= layer_sizes_[gap] || target >= layer_sizes_[gap + 1])
        throw StructuralError("edge (" + std::to_string(source) + " -> " + std::to_string(target) +
                              ") out of range for gap " + std::to_string(gap));
    gaps_[gap].push_back({source, target, weight});
}

void LayeredGraph::set_bias(std::size_t gap, std::size_t target, double bias) {
    biases_.at(gap).at(target) = bias;
}

void LayeredGraph::append_layer(std::size_t size) {
    if (!layer_sizes_.empty()) {
        gaps_.emplace_back();
        biases_.emplace_back(size, 0.0);
    }
    layer_sizes_.push_back(size);
}

LayeredGraph lower_dense(const NetworkSpec& spec) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (spec.layers[i].kind != LayerKind::Dense)
            throw StructuralError("lower_dense: layer " + std::to_string(i) + " is " +
                                  std::string(to_string(spec.layers[i].kind)));
    }
    for (const auto& v : validate(spec)) {
        if (v.rule == "chaining")
            throw StructuralError("lower_dense: layers " + std::to_string(v.layer) + " and " +
                                  std::to_string(v.layer + 1) + " do not chain: " + v.message);
    }
    require_valid(spec);

    LayeredGraph graph;
    graph.append_layer(spec.layers.front().in_dim);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& w = spec.params[l].weights;
        graph.append_layer(w.cols());
        for (std::size_t i = 0; i < w.rows(); ++i)
            for (std::size_t j = 0; j < w.cols(); ++j)
                graph.add_edge(l, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w(i, j));
        for (std::size_t j = 0; j < w.cols(); ++j) graph.set_bias(l, j, spec.params[l].bias[j]);
    }
    return graph;
}

Matrix gap_weight_matrix(const LayeredGraph& graph, std::size_t gap) {
    Matrix m(graph.layer_size(gap), graph.layer_size(gap + 1));
    for (const auto& e : graph.edges(gap)) m(e.source, e.target) += e.weight;
    return m;
}

}  // namespace cntnet
