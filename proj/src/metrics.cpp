#include "cntnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "cntnet/errors.hpp"
#include "cntnet/forward.hpp"
#include "cntnet/lowering.hpp"

namespace cntnet {

namespace {

struct MeanVar {
    double mean;
    double var;
};

MeanVar dense_link_stats(const LayerParams& p) {
    const auto& w = p.weights;
    const double n = static_cast<double>(w.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) sum += w(i, j) + p.bias[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) {
            const double d = w(i, j) + p.bias[j] - mean;
            ss += d * d;
        }
    return {mean, ss / n};
}

MeanVar graph_link_stats(const LayeredGraph& graph, std::size_t gap) {
    if (gap >= graph.gap_count()) throw StructuralError("gap " + std::to_string(gap) + " does not exist");
    const auto& edges = graph.edges(gap);
    if (edges.empty()) throw StructuralError("gap " + std::to_string(gap) + " has no links");
    const auto& bias = graph.dest_bias(gap);
    const double n = static_cast<double>(edges.size());
    double sum = 0.0;
    for (const auto& e : edges) sum += e.weight + bias[e.target];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& e : edges) {
        const double d = e.weight + bias[e.target] - mean;
        ss += d * d;
    }
    return {mean, ss / n};
}

MeanVar spec_link_stats(const NetworkSpec& spec, std::size_t layer) {
    if (layer >= spec.layers.size()) throw StructuralError("layer " + std::to_string(layer) + " does not exist");
    const auto& ls = spec.layers[layer];
    const auto& p = spec.params.at(layer);
    switch (ls.kind) {
        case LayerKind::Dense:
            if (p.weights.empty()) throw StructuralError("layer " + std::to_string(layer) + " is empty");
            return dense_link_stats(p);
        case LayerKind::Conv2D: return graph_link_stats(lower_conv(ls, p), 0);
        case LayerKind::Recurrent: break;
    }
    throw StructuralError("link-weight statistics of a recurrent layer are taken on its unfolded graph");
}

void check_node(const LayeredGraph& graph, std::size_t layer, std::size_t node) {
    if (layer >= graph.layer_count() || node >= graph.layer_size(layer))
        throw StructuralError("node (" + std::to_string(layer) + ", " + std::to_string(node) + ") does not exist");
}

}  // namespace

double link_weight_mean(const NetworkSpec& spec, std::size_t layer) { return spec_link_stats(spec, layer).mean; }
double link_weight_var(const NetworkSpec& spec, std::size_t layer) { return spec_link_stats(spec, layer).var; }
double link_weight_mean(const LayeredGraph& graph, std::size_t gap) { return graph_link_stats(graph, gap).mean; }
double link_weight_var(const LayeredGraph& graph, std::size_t gap) { return graph_link_stats(graph, gap).var; }

std::vector<NodeStrength> layer_strengths(const LayeredGraph& graph, std::size_t layer) {
    if (layer >= graph.layer_count()) throw StructuralError("layer " + std::to_string(layer) + " does not exist");
    std::vector<NodeStrength> s(graph.layer_size(layer));
    if (layer > 0) {
        const auto& bias = graph.dest_bias(layer - 1);
        for (std::size_t k = 0; k < s.size(); ++k) s[k].in = bias[k];
        for (const auto& e : graph.edges(layer - 1)) s[e.target].in += e.weight;
    }
    if (layer + 1 < graph.layer_count()) {
        for (const auto& e : graph.edges(layer)) s[e.source].out += e.weight;
    }
    for (auto& n : s) n.total = n.in + n.out;
    return s;
}

NodeStrength node_strength(const LayeredGraph& graph, std::size_t layer, std::size_t node) {
    check_node(graph, layer, node);
    NodeStrength s;
    if (layer > 0) {
        s.in = graph.dest_bias(layer - 1)[node];
        for (const auto& e : graph.edges(layer - 1))
            if (e.target == node) s.in += e.weight;
    }
    if (layer + 1 < graph.layer_count()) {
        for (const auto& e : graph.edges(layer))
            if (e.source == node) s.out += e.weight;
    }
    s.total = s.in + s.out;
    return s;
}

std::vector<double> neuron_strength(const NetworkSpec& spec, std::size_t layer, std::span<const double> x) {
    if (layer >= spec.layers.size()) throw StructuralError("layer " + std::to_string(layer) + " does not exist");
    auto trace = forward(x, spec);
    return std::move(trace.pre_activation[layer]);
}

std::vector<double> neuron_activation(const NetworkSpec& spec, std::size_t layer, std::span<const double> x) {
    if (layer >= spec.layers.size()) throw StructuralError("layer " + std::to_string(layer) + " does not exist");
    auto trace = forward(x, spec);
    return std::move(trace.activation[layer]);
}

std::vector<double> neuron_strength(const LayeredGraph& graph, std::size_t gap, std::span<const double> upstream) {
    if (gap >= graph.gap_count()) throw StructuralError("gap " + std::to_string(gap) + " does not exist");
    if (upstream.size() != graph.layer_size(gap))
        throw StructuralError("upstream activations have " + std::to_string(upstream.size()) + " values, layer has " +
                              std::to_string(graph.layer_size(gap)) + " nodes");
    std::vector<double> zeta(graph.dest_bias(gap));
    for (const auto& e : graph.edges(gap)) zeta[e.target] += upstream[e.source] * e.weight;
    return zeta;
}

double fluctuation(std::span<const double> strengths) {
    if (strengths.empty()) throw StructuralError("fluctuation of an empty layer");
    const double n = static_cast<double>(strengths.size());
    double mean = 0.0;
    for (double s : strengths) mean += s;
    mean /= n;
    double ss = 0.0;
    for (double s : strengths) ss += (s - mean) * (s - mean);
    return std::sqrt(ss / n);
}

double layer_fluctuation(const LayeredGraph& graph, std::size_t layer, StrengthKind kind) {
    const auto strengths = layer_strengths(graph, layer);
    std::vector<double> v;
    v.reserve(strengths.size());
    for (const auto& s : strengths) {
        switch (kind) {
            case StrengthKind::In: v.push_back(s.in); break;
            case StrengthKind::Out: v.push_back(s.out); break;
            case StrengthKind::Total: v.push_back(s.total); break;
        }
    }
    return fluctuation(v);
}

double disparity(std::span<const double> weights, double epsilon) {
    double s = 0.0;
    for (double w : weights) s += w;
    if (!(std::abs(s) > epsilon))
        throw IllConditionedDisparity("strength " + std::to_string(s) + " is within " + std::to_string(epsilon) +
                                      " of zero");
    double y = 0.0;
    for (double w : weights) y += (w / s) * (w / s);
    return y;
}

double node_disparity(const LayeredGraph& graph, std::size_t layer, std::size_t node, double epsilon) {
    check_node(graph, layer, node);
    std::vector<double> w;
    if (layer > 0) {
        for (const auto& e : graph.edges(layer - 1))
            if (e.target == node) w.push_back(e.weight);
    } else if (graph.gap_count() > 0) {
        for (const auto& e : graph.edges(0))
            if (e.source == node) w.push_back(e.weight);
    }
    return disparity(w, epsilon);
}

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::LinkWeightMean: return "link_weight_mean";
        case MetricKind::LinkWeightVar: return "link_weight_var";
        case MetricKind::NodeStrength: return "node_strength";
        case MetricKind::NodeInStrength: return "node_in_strength";
        case MetricKind::NodeOutStrength: return "node_out_strength";
        case MetricKind::NeuronStrength: return "neuron_strength";
        case MetricKind::NeuronActivation: return "neuron_activation";
        case MetricKind::LayerFluctuation: return "layer_fluctuation";
        case MetricKind::NodeDisparity: return "node_disparity";
    }
    return "unknown";
}

MetricKind metric_kind_from_string(std::string_view name) {
    for (auto k : kAllMetricKinds)
        if (to_string(k) == name) return k;
    throw ParameterError("unknown metric '" + std::string(name) + "'");
}

bool is_input_dependent(MetricKind kind) {
    return kind == MetricKind::NeuronStrength || kind == MetricKind::NeuronActivation;
}

std::vector<MetricSample> collect(const NetworkSpec& spec, std::span<const std::vector<double>> inputs,
                                  const std::string& network_id, const CollectOptions& options) {
    const LayeredGraph graph = lower(spec);
    std::vector<MetricSample> out;
    auto emit = [&](MetricKind m, std::size_t layer, std::optional<std::size_t> node,
                    std::optional<std::size_t> input, double value, bool flagged = false) {
        out.push_back({m, network_id, layer, node, input, value, flagged});
    };

    if (options.link_weights) {
        for (std::size_t g = 0; g < graph.gap_count(); ++g) {
            const auto st = graph_link_stats(graph, g);
            emit(MetricKind::LinkWeightMean, g, std::nullopt, std::nullopt, st.mean);
            emit(MetricKind::LinkWeightVar, g, std::nullopt, std::nullopt, st.var);
        }
    }
    for (std::size_t l = 0; l < graph.layer_count(); ++l) {
        const auto strengths = layer_strengths(graph, l);
        if (options.node_strengths) {
            for (std::size_t k = 0; k < strengths.size(); ++k) {
                emit(MetricKind::NodeStrength, l, k, std::nullopt, strengths[k].total);
                emit(MetricKind::NodeInStrength, l, k, std::nullopt, strengths[k].in);
                emit(MetricKind::NodeOutStrength, l, k, std::nullopt, strengths[k].out);
            }
        }
        if (options.fluctuation) {
            std::vector<double> totals;
            totals.reserve(strengths.size());
            for (const auto& s : strengths) totals.push_back(s.total);
            emit(MetricKind::LayerFluctuation, l, std::nullopt, std::nullopt, fluctuation(totals));
        }
        if (options.disparity && graph.layer_count() > 1) {
            // Group incident weights per node once instead of rescanning the gap per node.
            std::vector<std::vector<double>> incident(graph.layer_size(l));
            if (l > 0) {
                for (const auto& e : graph.edges(l - 1)) incident[e.target].push_back(e.weight);
            } else {
                for (const auto& e : graph.edges(0)) incident[e.source].push_back(e.weight);
            }
            for (std::size_t k = 0; k < incident.size(); ++k) {
                try {
                    emit(MetricKind::NodeDisparity, l, k, std::nullopt, disparity(incident[k], options.disparity_epsilon));
                } catch (const IllConditionedDisparity&) {
                    emit(MetricKind::NodeDisparity, l, k, std::nullopt, std::numeric_limits<double>::quiet_NaN(), true);
                }
            }
        }
    }
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const auto trace = forward_unchecked(inputs[s], spec);
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            for (std::size_t k = 0; k < trace.pre_activation[l].size(); ++k) {
                emit(MetricKind::NeuronStrength, l + 1, k, s, trace.pre_activation[l][k]);
                emit(MetricKind::NeuronActivation, l + 1, k, s, trace.activation[l][k]);
            }
        }
    }

    auto key = [](const MetricSample& m) {
        return std::make_tuple(static_cast<int>(m.metric), m.layer, m.node.value_or(0), m.input_sample.value_or(0));
    };
    std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    return out;
}

}  // namespace cntnet
