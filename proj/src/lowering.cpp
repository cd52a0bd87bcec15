#include "cntnet/lowering.hpp"

#include "cntnet/errors.hpp"

namespace cntnet {

namespace {

void require_conv(const LayerSpec& layer, const LayerParams& params) {
    if (layer.kind != LayerKind::Conv2D) throw StructuralError("expected a conv2d layer");
    const auto& c = layer.conv;
    if (c.kernel == 0 || c.stride == 0 || c.height == 0 || c.width == 0)
        throw StructuralError("conv2d dimensions and stride must be positive");
    if (c.kernel > c.height || c.kernel > c.width)
        throw StructuralError("kernel " + std::to_string(c.kernel) + " is larger than the " +
                              std::to_string(c.height) + "x" + std::to_string(c.width) + " input");
    if (params.weights.rows() != c.kernel || params.weights.cols() != c.kernel || params.bias.size() != 1)
        throw StructuralError("conv2d parameters do not match the kernel size");
}

void require_recurrent(const LayerSpec& layer, const LayerParams& params) {
    if (layer.kind != LayerKind::Recurrent) throw StructuralError("expected a recurrent layer");
    const auto& r = layer.recurrent;
    if (r.horizon == 0) throw StructuralError("recurrent horizon T must be at least 1");
    if (r.input_dim == 0 || r.hidden_dim == 0) throw StructuralError("recurrent dimensions must be positive");
    if (params.weights.rows() != r.input_dim || params.weights.cols() != r.hidden_dim ||
        params.recurrent.rows() != r.hidden_dim || params.recurrent.cols() != r.hidden_dim ||
        params.bias.size() != r.hidden_dim)
        throw StructuralError("recurrent parameters do not match the layer shape");
}

void append_conv_gap(LayeredGraph& graph, const LayerSpec& layer, const LayerParams& params) {
    const auto coupling = patch_coupling(layer.conv, params);
    const std::size_t gap = graph.gap_count();
    graph.append_layer(coupling.patches.size());
    for (const auto& [out, entries] : coupling.patches) {
        for (const auto& e : entries)
            graph.add_edge(gap, static_cast<std::uint32_t>(e.input_node), static_cast<std::uint32_t>(out),
                           coupling.kernel_weights[e.kernel_index]);
        graph.set_bias(gap, out, coupling.bias);
    }
}

void append_dense_gap(LayeredGraph& graph, const LayerParams& params) {
    const auto& w = params.weights;
    const std::size_t gap = graph.gap_count();
    graph.append_layer(w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j)
            graph.add_edge(gap, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w(i, j));
    for (std::size_t j = 0; j < w.cols(); ++j) graph.set_bias(gap, j, params.bias[j]);
}

}  // namespace

PatchCoupling patch_coupling(const Conv2DShape& shape, const LayerParams& params) {
    LayerSpec layer = LayerSpec::conv2d(shape, Activation::Linear);
    require_conv(layer, params);
    const std::size_t k = shape.kernel;
    PatchCoupling pc;
    pc.kernel_weights.assign(params.weights.values().begin(), params.weights.values().end());
    pc.bias = params.bias[0];
    const std::size_t oh = shape.out_height(), ow = shape.out_width();
    pc.patches.reserve(oh * ow);
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t q = 0; q < ow; ++q) {
            std::vector<PatchEntry> entries;
            entries.reserve(k * k);
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = 0; b < k; ++b)
                    entries.push_back({(r * shape.stride + a) * shape.width + (q * shape.stride + b), a * k + b});
            pc.patches.emplace_back(r * ow + q, std::move(entries));
        }
    }
    return pc;
}

LayeredGraph lower_conv(const LayerSpec& layer, const LayerParams& params) {
    require_conv(layer, params);
    LayeredGraph graph;
    graph.append_layer(layer.conv.height * layer.conv.width);
    append_conv_gap(graph, layer, params);
    return graph;
}

Matrix toeplitz_oracle(const LayerSpec& layer, const LayerParams& params) {
    require_conv(layer, params);
    const auto& c = layer.conv;
    if (c.height * c.width > kToeplitzMaxInput)
        throw ParameterError("toeplitz_oracle refuses a " + std::to_string(c.height) + "x" +
                             std::to_string(c.width) + " input (limit " + std::to_string(kToeplitzMaxInput) +
                             " pixels)");
    const std::size_t oh = c.out_height(), ow = c.out_width();
    Matrix m(c.height * c.width, oh * ow);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t q = 0; q < ow; ++q)
            for (std::size_t a = 0; a < c.kernel; ++a)
                for (std::size_t b = 0; b < c.kernel; ++b)
                    m((r * c.stride + a) * c.width + (q * c.stride + b), r * ow + q) = params.weights(a, b);
    return m;
}

LayeredGraph lower_recurrent(const LayerSpec& layer, const LayerParams& params) {
    require_recurrent(layer, params);
    const auto& r = layer.recurrent;
    LayeredGraph graph;
    graph.append_layer(r.input_dim);
    for (std::size_t t = 1; t <= r.horizon; ++t) {
        const std::size_t gap = t - 1;
        graph.append_layer(r.hidden_dim + (t < r.horizon ? r.input_dim : 0));
        // Input block x_t sits at offset 0 of layer 0 and at offset hidden_dim afterwards.
        const std::size_t input_offset = t == 1 ? 0 : r.hidden_dim;
        if (t >= 2) {
            for (std::size_t i = 0; i < r.hidden_dim; ++i)
                for (std::size_t j = 0; j < r.hidden_dim; ++j)
                    graph.add_edge(gap, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                   params.recurrent(i, j));
        }
        for (std::size_t i = 0; i < r.input_dim; ++i)
            for (std::size_t j = 0; j < r.hidden_dim; ++j)
                graph.add_edge(gap, static_cast<std::uint32_t>(input_offset + i), static_cast<std::uint32_t>(j),
                               params.weights(i, j));
        for (std::size_t j = 0; j < r.hidden_dim; ++j) graph.set_bias(gap, j, params.bias[j]);
    }
    return graph;
}

LayeredGraph lower(const NetworkSpec& spec) {
    require_valid(spec);
    LayeredGraph graph;
    graph.append_layer(spec.layers.front().input_size());
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        switch (spec.layers[l].kind) {
            case LayerKind::Dense: append_dense_gap(graph, spec.params[l]); break;
            case LayerKind::Conv2D: append_conv_gap(graph, spec.layers[l], spec.params[l]); break;
            case LayerKind::Recurrent:
                throw StructuralError("layer " + std::to_string(l) +
                                      " is recurrent; unfold it with lower_recurrent()");
        }
    }
    return graph;
}

}  // namespace cntnet
