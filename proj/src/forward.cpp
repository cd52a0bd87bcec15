#include "cntnet/forward.hpp"

#include <algorithm>
#include <cmath>

#include "cntnet/errors.hpp"

namespace cntnet {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> conv_pre_activation(const Conv2DShape& c, const LayerParams& p, std::span<const double> x) {
    const std::size_t oh = c.out_height(), ow = c.out_width();
    std::vector<double> out(oh * ow, p.bias[0]);
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t q = 0; q < ow; ++q) {
            double acc = 0.0;
            for (std::size_t a = 0; a < c.kernel; ++a)
                for (std::size_t b = 0; b < c.kernel; ++b)
                    acc += x[(r * c.stride + a) * c.width + (q * c.stride + b)] * p.weights(a, b);
            out[r * ow + q] += acc;
        }
    }
    return out;
}

// h_t = f(x_t W_xh + h_{t-1} W_hh + b), h_0 = 0.
std::vector<double> recurrent_pre_activation(const LayerSpec& layer, const LayerParams& p,
                                             std::span<const double> x) {
    const auto& r = layer.recurrent;
    std::vector<double> hidden(r.hidden_dim, 0.0);
    std::vector<double> z;
    for (std::size_t t = 0; t < r.horizon; ++t) {
        z = vecmat(x.subspan(t * r.input_dim, r.input_dim), p.weights);
        if (t > 0) {
            const auto rec = vecmat(hidden, p.recurrent);
            for (std::size_t j = 0; j < z.size(); ++j) z[j] += rec[j];
        }
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += p.bias[j];
        hidden = activate(layer.activation, z);
    }
    return z;
}

}  // namespace

std::vector<double> activate(Activation kind, std::span<const double> z) {
    std::vector<double> a(z.begin(), z.end());
    switch (kind) {
        case Activation::Linear: break;
        case Activation::ReLU:
            for (double& v : a) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::Sigmoid:
            for (double& v : a) v = sigmoid(v);
            break;
        case Activation::Softmax: {
            if (a.empty()) break;
            const double m = *std::max_element(a.begin(), a.end());
            double sum = 0.0;
            for (double& v : a) {
                v = std::exp(v - m);
                sum += v;
            }
            for (double& v : a) v /= sum;
            break;
        }
    }
    return a;
}

std::vector<double> layer_pre_activation(const LayerSpec& layer, const LayerParams& params,
                                         std::span<const double> x) {
    if (x.size() != layer.input_size())
        throw StructuralError("layer input has " + std::to_string(x.size()) + " values, expected " +
                              std::to_string(layer.input_size()));
    switch (layer.kind) {
        case LayerKind::Dense: {
            auto z = vecmat(x, params.weights);
            for (std::size_t j = 0; j < z.size(); ++j) z[j] += params.bias[j];
            return z;
        }
        case LayerKind::Conv2D: return conv_pre_activation(layer.conv, params, x);
        case LayerKind::Recurrent: return recurrent_pre_activation(layer, params, x);
    }
    return {};
}

ForwardTrace forward_unchecked(std::span<const double> x, const NetworkSpec& spec) {
    if (x.size() != spec.input_size())
        throw StructuralError("input has " + std::to_string(x.size()) + " values, network expects " +
                              std::to_string(spec.input_size()));
    ForwardTrace trace;
    trace.pre_activation.reserve(spec.layers.size());
    trace.activation.reserve(spec.layers.size());
    std::span<const double> current = x;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        trace.pre_activation.push_back(layer_pre_activation(spec.layers[l], spec.params[l], current));
        trace.activation.push_back(activate(spec.layers[l].activation, trace.pre_activation.back()));
        current = trace.activation.back();
    }
    return trace;
}

ForwardTrace forward(std::span<const double> x, const NetworkSpec& spec) {
    require_valid(spec);
    return forward_unchecked(x, spec);
}

}  // namespace cntnet
