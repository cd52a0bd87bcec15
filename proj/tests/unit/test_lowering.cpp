#include <doctest.h>

#include <cmath>
#include <set>

#include "cntnet/errors.hpp"
#include "cntnet/forward.hpp"
#include "cntnet/lowering.hpp"
#include "cntnet/metrics.hpp"
#include "helpers.hpp"

using namespace cntnet;

namespace {

LayerParams conv_params(const LayerSpec& layer, std::vector<double> kernel, double bias) {
    LayerParams p = zero_params(layer);
    std::copy(kernel.begin(), kernel.end(), p.weights.values().begin());
    p.bias = {bias};
    return p;
}

std::vector<double> direct_conv(const Conv2DShape& s, std::span<const double> x, std::span<const double> k) {
    std::vector<double> out;
    for (std::size_t oy = 0; oy < s.out_height(); ++oy)
        for (std::size_t ox = 0; ox < s.out_width(); ++ox) {
            double acc = 0.0;
            for (std::size_t dy = 0; dy < s.kernel; ++dy)
                for (std::size_t dx = 0; dx < s.kernel; ++dx)
                    acc += x[(oy * s.stride + dy) * s.width + ox * s.stride + dx] * k[dy * s.kernel + dx];
            out.push_back(acc);
        }
    return out;
}

}  // namespace

TEST_CASE("patch coupling structure") {
    const auto layer = LayerSpec::conv2d({5, 6, 3, 1}, Activation::Linear);
    const auto pc = patch_coupling(layer.conv, conv_params(layer, testing::random_vector(9, 1), 0.0));
    REQUIRE(pc.patches.size() == 3 * 4);
    std::set<std::size_t> outputs;
    for (const auto& [o, entries] : pc.patches) {
        outputs.insert(o);
        CHECK(entries.size() == 9);
        std::set<std::size_t> kidx;
        for (const auto& e : entries) kidx.insert(e.kernel_index);
        CHECK(kidx.size() == 9);
    }
    CHECK(outputs.size() == 12);
}

TEST_CASE("lower_conv examples") {
    const auto l3 = LayerSpec::conv2d({3, 3, 2, 1}, Activation::Linear);
    const auto g = lower_conv(l3, conv_params(l3, {1, 1, 1, 1}, 0.0));
    CHECK(g.layer_sizes() == std::vector<std::size_t>{9, 4});
    CHECK(g.edge_count() == 16);
    std::size_t center_out = 0;
    for (const auto& e : g.edges(0)) center_out += e.source == 4;
    CHECK(center_out == 4);
    for (std::size_t o = 0; o < 4; ++o) CHECK(node_strength(g, 1, o).in == 4.0);

    const auto l2 = LayerSpec::conv2d({2, 2, 2, 1}, Activation::Linear);
    const auto g2 = lower_conv(l2, conv_params(l2, {1, 2, 3, 4}, 0.0));
    CHECK(g2.layer_sizes() == std::vector<std::size_t>{4, 1});
    CHECK(g2.edge_count() == 4);

    const auto big = LayerSpec::conv2d({2, 2, 3, 1}, Activation::Linear);
    CHECK_THROWS_AS(lower_conv(big, conv_params(LayerSpec::conv2d({3, 3, 3, 1}, Activation::Linear), std::vector<double>(9, 1), 0)), StructuralError);
}

TEST_CASE("toeplitz oracle examples") {
    const auto l3 = LayerSpec::conv2d({3, 3, 2, 1}, Activation::Linear);
    const auto m = toeplitz_oracle(l3, conv_params(l3, {1, 2, 3, 4}, 0.0));
    CHECK(m.rows() == 9);
    CHECK(m.cols() == 4);
    std::size_t nz = 0;
    for (double v : m.values()) nz += v != 0.0;
    CHECK(nz == 16);

    const auto l2 = LayerSpec::conv2d({2, 2, 2, 1}, Activation::Linear);
    const auto col = toeplitz_oracle(l2, conv_params(l2, {1, 2, 3, 4}, 0.0));
    CHECK(col.rows() == 4);
    CHECK(col.cols() == 1);
    CHECK(std::vector<double>(col.values().begin(), col.values().end()) == std::vector<double>{1, 2, 3, 4});

    const auto huge = LayerSpec::conv2d({65, 65, 3, 1}, Activation::Linear);
    CHECK_THROWS_AS(toeplitz_oracle(huge, zero_params(huge)), ParameterError);
}

TEST_CASE("toeplitz product equals direct convolution") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Conv2DShape shape{8, 8, 3, 1 + seed % 2};
        const auto layer = LayerSpec::conv2d(shape, Activation::Linear);
        const auto k = testing::random_vector(9, seed);
        const auto m = toeplitz_oracle(layer, conv_params(layer, k, 0.0));
        const auto x = testing::random_vector(64, seed + 1000);
        const auto want = direct_conv(shape, x, k);
        const auto got = vecmat(x, m);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }
}

TEST_CASE("weight sharing conservation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto layer = LayerSpec::conv2d({7, 6, 3, 1 + seed % 3}, Activation::Linear);
        const auto k = testing::random_vector(9, seed);
        const auto g = lower_conv(layer, conv_params(layer, k, 0.5));
        double total = 0.0, ksum = 0.0;
        for (const auto& e : g.edges(0)) total += e.weight;
        for (double v : k) ksum += v;
        const double patches = static_cast<double>(layer.conv.out_height() * layer.conv.out_width());
        CHECK(total == doctest::Approx(patches * ksum).epsilon(1e-12));
    }
}

TEST_CASE("lowered conv strengths agree with the toeplitz dense treatment") {
    const auto layer = LayerSpec::conv2d({6, 5, 2, 1}, Activation::ReLU);
    const auto p = conv_params(layer, testing::random_vector(4, 4), 0.3);
    const auto g = lower_conv(layer, p);
    NetworkSpec dense;
    dense.layers.push_back(LayerSpec::dense(30, 20, Activation::ReLU));
    dense.params.push_back({toeplitz_oracle(layer, p), {}, std::vector<double>(20, 0.3)});
    const auto gd = lower_dense(dense);
    for (std::size_t l = 0; l < 2; ++l) {
        const auto a = layer_strengths(g, l), b = layer_strengths(gd, l);
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(std::abs(a[k].in - b[k].in) < 1e-12);
            CHECK(std::abs(a[k].out - b[k].out) < 1e-12);
        }
    }
    const auto x = testing::random_vector(30, 8);
    const auto zs = neuron_strength(g, 0, x), zd = neuron_strength(gd, 0, x);
    const auto zf = layer_pre_activation(layer, p, x);
    for (std::size_t k = 0; k < 20; ++k) {
        CHECK(std::abs(zs[k] - zd[k]) < 1e-12);
        CHECK(std::abs(zs[k] - zf[k]) < 1e-12);
    }
}

namespace {

LayerParams rnn_params(const LayerSpec& layer, std::uint64_t seed) {
    LayerParams p = zero_params(layer);
    const auto a = testing::random_vector(p.weights.size(), seed);
    const auto b = testing::random_vector(p.recurrent.size(), seed + 1);
    const auto c = testing::random_vector(p.bias.size(), seed + 2);
    std::copy(a.begin(), a.end(), p.weights.values().begin());
    std::copy(b.begin(), b.end(), p.recurrent.values().begin());
    p.bias = c;
    return p;
}

}  // namespace

TEST_CASE("lower_recurrent") {
    SUBCASE("T=1 equals lower_dense of W_xh") {
        const auto layer = LayerSpec::rnn({3, 4, 1}, Activation::Sigmoid);
        const auto p = rnn_params(layer, 1);
        NetworkSpec dense;
        dense.layers.push_back(LayerSpec::dense(3, 4, Activation::Sigmoid));
        dense.params.push_back({p.weights, {}, p.bias});
        CHECK(lower_recurrent(layer, p) == lower_dense(dense));
    }
    SUBCASE("T=3, d=2, h=2 degree counts") {
        const auto layer = LayerSpec::rnn({2, 2, 3}, Activation::Sigmoid);
        const auto g = lower_recurrent(layer, rnn_params(layer, 2));
        CHECK(g.layer_count() == 4);
        std::size_t indeg = 0;
        for (const auto& e : g.edges(1)) indeg += e.target == 0;
        CHECK(indeg == 4);
        std::size_t first = 0;
        for (const auto& e : g.edges(0)) first += e.target == 0;
        CHECK(first == 2);
        for (std::size_t k = 0; k < 2; ++k) CHECK(node_strength(g, 3, k).out == 0.0);
        CHECK(g.layer_size(3) == 2);
    }
    SUBCASE("unfolding T-1 is a prefix of unfolding T") {
        for (std::size_t T = 2; T <= 5; ++T) {
            const auto lt = LayerSpec::rnn({2, 3, T}, Activation::Sigmoid);
            const auto lp = LayerSpec::rnn({2, 3, T - 1}, Activation::Sigmoid);
            const auto p = rnn_params(lt, 9);
            const auto gt = lower_recurrent(lt, p), gp = lower_recurrent(lp, p);
            for (std::size_t gap = 0; gap + 1 < gp.gap_count(); ++gap) {
                CHECK(gt.edges(gap) == gp.edges(gap));
                CHECK(gt.dest_bias(gap) == gp.dest_bias(gap));
            }
            const auto last = gp.gap_count() - 1;
            for (const auto& e : gp.edges(last)) {
                bool found = false;
                for (const auto& f : gt.edges(last)) found |= f == e;
                CHECK(found);
            }
        }
    }
    SUBCASE("graph propagation reproduces the recurrent forward pass") {
        const auto layer = LayerSpec::rnn({2, 3, 4}, Activation::Sigmoid);
        const auto p = rnn_params(layer, 11);
        const auto g = lower_recurrent(layer, p);
        const auto x = testing::random_vector(8, 12);
        std::vector<double> up(x.begin(), x.begin() + 2);
        std::vector<double> z;
        for (std::size_t t = 1; t <= 4; ++t) {
            z = neuron_strength(g, t - 1, up);
            std::vector<double> h = activate(Activation::Sigmoid, std::span<const double>(z.data(), 3));
            up = h;
            if (t < 4) up.insert(up.end(), x.begin() + static_cast<std::ptrdiff_t>(2 * t),
                                 x.begin() + static_cast<std::ptrdiff_t>(2 * t + 2));
        }
        const auto want = layer_pre_activation(layer, p, x);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(z[j] - want[j]) < 1e-12);
    }
    SUBCASE("T=0 is rejected") {
        auto layer = LayerSpec::rnn({2, 2, 1}, Activation::Sigmoid);
        const auto p = rnn_params(layer, 3);
        layer.recurrent.horizon = 0;
        CHECK_THROWS_AS(lower_recurrent(layer, p), StructuralError);
    }
}

TEST_CASE("lower handles conv then dense and refuses recurrent") {
    NetworkSpec spec;
    spec.layers.push_back(LayerSpec::conv2d({4, 4, 3, 1}, Activation::ReLU));
    spec.layers.push_back(LayerSpec::dense(4, 2, Activation::Softmax));
    spec.params.push_back(conv_params(spec.layers[0], testing::random_vector(9, 1), 0.1));
    spec.params.push_back({testing::mat(2 * 2, 2, testing::random_vector(8, 2)), {}, {0, 0}});
    const auto g = lower(spec);
    CHECK(g.layer_sizes() == std::vector<std::size_t>{16, 4, 2});
    CHECK(g.edge_count() == 4 * 9 + 8);

    NetworkSpec rnn;
    rnn.layers.push_back(LayerSpec::rnn({2, 2, 2}, Activation::Sigmoid));
    rnn.params.push_back(rnn_params(rnn.layers[0], 1));
    CHECK_THROWS_AS(lower(rnn), StructuralError);
}
