// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance            run everything
//   acceptance <name>...  run only the named criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cntnet/cli.hpp"
#include "cntnet/dataio.hpp"
#include "cntnet/forward.hpp"
#include "cntnet/lowering.hpp"
#include "cntnet/metrics.hpp"
#include "cntnet/theory.hpp"
#include "cntnet/train.hpp"
#include "fuzz.hpp"
#include "gradcheck.hpp"

using namespace cntnet;
namespace fs = std::filesystem;

namespace {

struct Result {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const fs::path kMnist = CNTNET_MNIST_DIR;

// ---------------------------------------------------------------------------

Result theory_calibration() {
    const auto t0 = Clock::now();
    int both = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        MonteCarloConfig c;
        c.sigma = 0.1;
        c.in_degree = 32;
        c.trials = 1000;
        c.seed = seed;
        c.significance = 0.01;
        const auto r = monte_carlo_check(c);
        both += r.in_strength.verdict == Verdict::Consistent && r.fluctuation.verdict == Verdict::Consistent;
    }
    const double secs = seconds_since(t0);
    return {both >= 98 && secs < 10.0, fmt("%d/100 seeds consistent on both tests (need >= 98), %.2f s for all 100 (limit 10 s)", both, secs)};
}

Result strength_variance() {
    const double sigma = 0.1;
    const std::size_t I = 32;
    const auto s = sample_in_strengths(sigma, I, 100000, 1);
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(s.size());
    double var = 0.0;
    for (double v : s) var += (v - m) * (v - m);
    var /= static_cast<double>(s.size());
    const double target = static_cast<double>(I) * sigma * sigma;
    const double rel = std::abs(var - target) / target;
    return {rel <= 0.05, fmt("variance %.6f vs I*sigma^2 = %.6f, relative error %.4f (limit 0.05)", var, target, rel)};
}

Result conv_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const auto layer = LayerSpec::conv2d({8, 8, 3, 1}, Activation::Linear);
        LayerParams p = zero_params(layer);
        for (double& w : p.weights.values()) w = n01(rng);
        p.bias = {n01(rng)};
        std::vector<double> x(64);
        for (double& v : x) v = n01(rng);

        const auto patch = lower_conv(layer, p);
        NetworkSpec dense;
        dense.layers.push_back(LayerSpec::dense(64, 36, Activation::Linear));
        dense.params.push_back({toeplitz_oracle(layer, p), {}, std::vector<double>(36, p.bias[0])});
        const auto toeplitz = lower_dense(dense);

        for (std::size_t l = 0; l < 2; ++l) {
            const auto a = layer_strengths(patch, l), b = layer_strengths(toeplitz, l);
            for (std::size_t k = 0; k < a.size(); ++k)
                worst = std::max({worst, std::abs(a[k].in - b[k].in), std::abs(a[k].out - b[k].out),
                                  std::abs(a[k].total - b[k].total)});
        }
        const auto zp = neuron_strength(patch, 0, x);
        const auto zt = neuron_strength(dense, 0, x);
        for (std::size_t k = 0; k < zp.size(); ++k) worst = std::max(worst, std::abs(zp[k] - zt[k]));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 5.0, fmt("100 instances, max |diff| %.3g (limit 1e-9), %.3f s (limit 5 s)", worst, secs)};
}

Result rnn_base_case() {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    int identical = 0;
    const int instances = 20;
    for (int inst = 0; inst < instances; ++inst) {
        const std::size_t d = 1 + rng() % 6, h = 1 + rng() % 6;
        const auto layer = LayerSpec::rnn({d, h, 1}, Activation::Sigmoid);
        LayerParams p = zero_params(layer);
        for (double& w : p.weights.values()) w = n01(rng);
        for (double& w : p.recurrent.values()) w = n01(rng);
        for (double& b : p.bias) b = n01(rng);
        NetworkSpec dense;
        dense.layers.push_back(LayerSpec::dense(d, h, Activation::Sigmoid));
        dense.params.push_back({p.weights, {}, p.bias});
        const auto gr = lower_recurrent(layer, p), gd = lower_dense(dense);

        bool same = gr == gd;
        for (std::size_t l = 0; l < 2 && same; ++l) {
            same = layer_strengths(gr, l) == layer_strengths(gd, l) &&
                   layer_fluctuation(gr, l) == layer_fluctuation(gd, l);
        }
        same = same && link_weight_mean(gr, 0) == link_weight_mean(gd, 0) &&
               link_weight_var(gr, 0) == link_weight_var(gd, 0);
        identical += same;
    }
    return {identical == instances, fmt("%d/%d random (d, h) instances graph- and metric-identical", identical, instances)};
}

Result gradients() {
    double worst = 0.0;
    std::size_t params = 0;
    std::vector<std::string> failing;
    for (std::size_t i = 0; i < 20; ++i) {
        const auto c = gradcheck::make_case(i, 9000 + i);
        const auto o = gradcheck::check(c);
        params += o.checked;
        worst = std::max(worst, o.worst_relative);
        if (o.worst_relative >= gradcheck::kTolerance) failing.push_back(c.label);
    }
    return {failing.empty(), fmt("20 nets, %zu parameters, all 3 hidden x (CE/softmax + MSE/4 outputs), worst relative error %.3g (limit 1e-4)",
                                 params, worst)};
}

struct TrainedPopulation {
    std::vector<double> accuracy;
    double seconds = 0.0;
};

const DatasetSplit& mnist_split() {
    static const DatasetSplit s = [] {
        const auto m = load_mnist(kMnist);
        return split(make_classification(m.images, m.labels, 10), 8000, 2000, 1);
    }();
    return s;
}

TrainedPopulation train_fc(const std::string& preset, std::size_t members) {
    cli::ArchOptions o;
    o.preset = preset;
    const auto arch = cli::resolve_architecture(o);
    TrainConfig cfg;
    cfg.init_variance = 0.5;
    cfg.learning_rate = 0.5;
    cfg.batch_size = 64;
    cfg.epochs = 40;
    cfg.seed = 1;
    const auto t0 = Clock::now();
    auto pop = make_population(preset, arch.layers, cfg, members);
    train_population(pop, mnist_split(), 0);
    TrainedPopulation r;
    r.seconds = seconds_since(t0);
    for (const auto& m : pop.members) r.accuracy.push_back(m.diverged ? 0.0 : m.test_accuracy);
    return r;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

Result mnist_accuracy() {
    const auto r = train_fc("fc3", 5);
    const double lo = *std::min_element(r.accuracy.begin(), r.accuracy.end());
    std::string accs;
    for (double a : r.accuracy) accs += fmt(" %.4f", a);
    return {lo >= 0.90 && r.seconds < 600.0,
            fmt("fc3 sigmoid 784-128-64-32-10, 8000 train / 2000 test, accuracies%s; min %.4f (need >= 0.90), %.1f s (limit 600 s)",
                accs.c_str(), lo, r.seconds)};
}

Result input_bimodality() {
    const auto m = load_mnist(kMnist);
    std::size_t dark = 0, bright = 0;
    for (double v : m.images.values()) {
        dark += v <= 0.05;
        bright += v >= 0.95;
    }
    const double n = static_cast<double>(m.images.size());
    const double pd = dark / n, pb = bright / n;
    return {pd > pb && pd + pb > 0.60,
            fmt("mass in [0,0.05] = %.4f, in [0.95,1] = %.4f, together %.4f (need dark > bright and > 0.60)", pd, pb, pd + pb)};
}

Result accuracy_gap() {
    const auto small = train_fc("small", 5), medium = train_fc("medium", 5), big = train_fc("big", 5);
    const double s = mean(small.accuracy), m = mean(medium.accuracy), b = mean(big.accuracy);
    return {s <= m && m <= b && b - s >= 0.01,
            fmt("mean accuracy small %.4f <= medium %.4f <= big %.4f, big - small = %.2f pp (need >= 1 pp); %.0f s",
                s, m, b, 100.0 * (b - s), small.seconds + medium.seconds + big.seconds)};
}

std::string slurp(const fs::path& p) {
    const auto b = read_file(p);
    return std::string(b.begin(), b.end());
}

int run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
}

bool same_files(const fs::path& a, const fs::path& b, const std::vector<std::string>& names, std::string& mismatch) {
    for (const auto& n : names)
        if (!fs::exists(a / n) || slurp(a / n) != slurp(b / n)) {
            mismatch = n;
            return false;
        }
    return true;
}

Result determinism() {
    const auto root = fs::temp_directory_path() / "cntnet_acceptance_determinism";
    fs::remove_all(root);
    const auto pop = root / "init", pop2 = root / "init_replay";
    const auto an = root / "analyze", an2 = root / "analyze_replay";
    if (run_cli({"init", "--preset", "fc3", "--sigma2", "0.5", "--n", "3", "--seed", "7", "--out", pop.string()}) != 0)
        return {false, "init failed"};
    if (run_cli({"analyze", "--population", pop.string(), "--data", kMnist.string(), "--samples", "50", "--out",
                 an.string()}) != 0)
        return {false, "analyze failed"};
    if (run_cli({"replay", (pop / "config.json").string(), "--out", pop2.string()}) != 0 ||
        run_cli({"replay", (an / "config.json").string(), "--out", an2.string()}) != 0)
        return {false, "replay failed"};

    std::vector<std::string> init_files{"population.json", "initial_report.csv", "theory_gof.json"};
    for (int i = 0; i < 3; ++i) init_files.push_back(fmt("fc3-sigmoid-%03d.cntw", i));
    const std::vector<std::string> analyze_files{"report.csv", "report.json", "summary.json", "scatter.csv"};
    std::string bad;
    if (!same_files(pop, pop2, init_files, bad)) return {false, "init replay differs in " + bad};
    if (!same_files(an, an2, analyze_files, bad)) return {false, "analyze replay differs in " + bad};

    // Analyzing the replayed population gives the same reports as the original.
    const auto an3 = root / "analyze_of_replay";
    if (run_cli({"analyze", "--population", pop2.string(), "--data", kMnist.string(), "--samples", "50", "--out",
                 an3.string()}) != 0)
        return {false, "analyze of replayed population failed"};
    if (!same_files(an, an3, analyze_files, bad)) return {false, "analysis of replayed population differs in " + bad};
    fs::remove_all(root);
    return {true, fmt("%zu init files and %zu analyze reports byte-identical after replay", init_files.size(),
                      analyze_files.size())};
}

Result parser_robustness() {
    const auto t = fuzz::run(10000, 2024);
    bool asan_ok = true;
    std::string asan = "ASan build not configured";
#ifdef CNTNET_FUZZ_ASAN
    asan_ok = std::system(CNTNET_FUZZ_ASAN " > /dev/null 2>&1") == 0;
    asan = asan_ok ? "ASan run clean" : "ASan run FAILED";
#endif
    return {t.unstructured == 0 && t.cases == 10000 && asan_ok,
            fmt("%zu mutated headers: %zu structured errors, %zu still valid, %zu unstructured; %s", t.cases,
                t.structured, t.accepted, t.unstructured, asan.c_str())};
}

struct Criterion {
    const char* name;
    const char* title;
    Result (*run)();
};

const Criterion kCriteria[] = {
    {"theory", "Theory calibration", theory_calibration},
    {"variance", "Empirical strength variance", strength_variance},
    {"conv", "Conv equivalence", conv_equivalence},
    {"rnn", "RNN unfolding base case", rnn_base_case},
    {"gradients", "Gradient correctness", gradients},
    {"mnist", "MNIST desk-scale accuracy", mnist_accuracy},
    {"bimodality", "Input bimodality", input_bimodality},
    {"tiers", "Accuracy-gap ordering", accuracy_gap},
    {"determinism", "Determinism", determinism},
    {"fuzz", "Parser robustness", parser_robustness},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> only(argv + 1, argv + argc);
    int failed = 0, ran = 0;
    for (const auto& c : kCriteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
        ++ran;
        Result r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = {false, std::string("threw: ") + e.what()};
        }
        failed += !r.pass;
        std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", c.title, r.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
