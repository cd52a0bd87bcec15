#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cntnet/netgraph.hpp"

namespace testing {

inline cntnet::Matrix mat(std::size_t r, std::size_t c, std::vector<double> v) {
    return cntnet::Matrix(r, c, std::move(v));
}

inline cntnet::NetworkSpec dense1(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b,
                                  cntnet::Activation act = cntnet::Activation::Linear) {
    cntnet::NetworkSpec s;
    s.layers.push_back(cntnet::LayerSpec::dense(in, out, act));
    s.params.push_back({mat(in, out, std::move(w)), {}, std::move(b)});
    return s;
}

// Random dense stack with weights and biases uniform in [-scale, scale].
inline cntnet::NetworkSpec random_dense(const std::vector<std::size_t>& widths, cntnet::Activation hidden,
                                        cntnet::Activation output, std::uint64_t seed, double scale = 1.0,
                                        bool bias = true) {
    auto spec = cntnet::make_dense_network(widths, hidden, output);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& p : spec.params) {
        for (double& w : p.weights.values()) w = u(rng);
        for (double& b : p.bias) b = bias ? u(rng) : 0.0;
    }
    return spec;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

inline double normal_cdf(double x, double mean, double var) {
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cntnet_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
