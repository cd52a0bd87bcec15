#include <doctest.h>

#include <cmath>
#include <set>

#include "cntnet/dataio.hpp"
#include "cntnet/errors.hpp"
#include "cntnet/forward.hpp"
#include "cntnet/theory.hpp"
#include "cntnet/train.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace cntnet;
using doctest::Approx;

TEST_CASE("init_gaussian") {
    const auto arch = make_dense_network({400, 200, 100}, Activation::Sigmoid, Activation::Softmax).layers;
    const auto a = init_gaussian(arch, 0.5, 9);
    CHECK(a == init_gaussian(arch, 0.5, 9));
    CHECK_FALSE(a == init_gaussian(arch, 0.5, 10));
    std::vector<double> w;
    for (const auto& p : a.params) {
        w.insert(w.end(), p.weights.values().begin(), p.weights.values().end());
        for (double b : p.bias) CHECK(b == 0.0);
    }
    REQUIRE(w.size() >= 100000);
    double ss = 0.0;
    for (double v : w) ss += v * v;
    CHECK(std::sqrt(ss / static_cast<double>(w.size())) == Approx(std::sqrt(0.5)).epsilon(0.01));
    CHECK(ks_test(w, NullDistribution::normal(0.0, 0.5)).verdict == Verdict::Consistent);
    CHECK_THROWS_AS(init_gaussian(arch, 0.0, 1), ParameterError);
}

TEST_CASE("gradients match central finite differences for every activation and loss") {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < 30; ++i) {
        const auto c = gradcheck::make_case(i, 1000 + i);
        const auto o = gradcheck::check(c);
        INFO(c.label);
        CHECK(o.worst_relative < gradcheck::kTolerance);
        seen.insert(c.label);
    }
    CHECK(seen.size() == 15);
}

TEST_CASE("single example, linear net, MSE: closed-form gradient") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto spec = testing::random_dense({4, 3}, Activation::Linear, Activation::Linear, seed);
        const auto xv = testing::random_vector(4, seed + 1), yv = testing::random_vector(3, seed + 2);
        const Matrix x(1, 4, xv), y(1, 3, yv);
        const auto g = compute_gradients(spec, x, y, Loss::MSE);
        // L = (1/m) sum_k (x W + b - y)_k^2  =>  dL/dW_ik = (2/m) x_i r_k, dL/db_k = (2/m) r_k.
        std::vector<double> r(3);
        for (std::size_t k = 0; k < 3; ++k) {
            r[k] = spec.params[0].bias[k] - yv[k];
            for (std::size_t i = 0; i < 4; ++i) r[k] += xv[i] * spec.params[0].weights(i, k);
        }
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(std::abs(g.bias[0][k] - 2.0 / 3.0 * r[k]) < 1e-9);
            for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(g.weights[0](i, k) - 2.0 / 3.0 * xv[i] * r[k]) < 1e-9);
        }
    }
}

TEST_CASE("sgd_step") {
    const auto spec = testing::random_dense({3, 4, 2}, Activation::Sigmoid, Activation::Softmax, 4);
    Matrix x(2, 3, testing::random_vector(6, 5)), y(2, 2, {1, 0, 0, 1});
    TrainConfig cfg;
    SUBCASE("zero learning rate leaves parameters unchanged") {
        cfg.learning_rate = 0.0;
        const auto r = sgd_step(spec, x, y, cfg);
        CHECK(r.spec == spec);
        CHECK(r.loss == batch_loss(spec, x, y, Loss::CrossEntropy));
    }
    SUBCASE("update is parameters minus lr times gradient") {
        cfg.learning_rate = 0.3;
        const auto g = compute_gradients(spec, x, y, Loss::CrossEntropy);
        const auto r = sgd_step(spec, x, y, cfg);
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t i = 0; i < spec.params[l].weights.size(); ++i)
                CHECK(r.spec.params[l].weights.values()[i] ==
                      spec.params[l].weights.values()[i] - 0.3 * g.weights[l].values()[i]);
    }
    SUBCASE("config mismatches") {
        cfg.loss = Loss::MSE;
        CHECK_THROWS_AS(sgd_step(spec, x, y, cfg), ParameterError);
        cfg.task = Task::Reconstruction;
        CHECK_NOTHROW(sgd_step(spec, x, y, cfg));
        TrainConfig ce;
        auto lin = testing::random_dense({3, 2}, Activation::Linear, Activation::Sigmoid, 1);
        CHECK_THROWS_AS(check_config(ce, lin), ParameterError);
        ce.batch_size = 0;
        CHECK_THROWS_AS(check_config(ce, spec), ParameterError);
    }
    SUBCASE("non-finite loss is a divergence") {
        auto lin = testing::random_dense({3, 3}, Activation::Linear, Activation::Linear, 2);
        TrainConfig mse;
        mse.task = Task::Reconstruction;
        mse.loss = Loss::MSE;
        mse.learning_rate = 1e200;
        Matrix xs(1, 3, {1, 2, 3});
        CHECK_THROWS_AS(
            [&] {
                for (int i = 0; i < 10; ++i) sgd_step_inplace(lin, xs, xs, mse);
            }(),
            DivergenceError);
    }
}

namespace {

Dataset xor_data() {
    Matrix x(4, 2, {0, 0, 0, 1, 1, 0, 1, 1});
    Dataset d;
    d.inputs = x;
    d.targets = Matrix(4, 1, {0, 1, 1, 0});
    return d;
}

}  // namespace

TEST_CASE("XOR 2-2-1 sigmoid net, lr 0.5, 5000 epochs") {
    TrainConfig cfg;
    cfg.task = Task::Reconstruction;
    cfg.loss = Loss::MSE;
    cfg.learning_rate = 0.5;
    cfg.batch_size = 4;
    cfg.epochs = 5000;
    cfg.init_variance = 1.0;
    const auto arch = make_dense_network({2, 2, 1}, Activation::Sigmoid, Activation::Sigmoid).layers;
    auto spec = init_gaussian(arch, cfg.init_variance, 3);
    const DatasetSplit data{xor_data(), xor_data()};
    const auto curve = train_network(spec, data, cfg, "xor", 1);
    REQUIRE(curve.size() == 5000);
    CHECK(evaluate_mse(spec, data.test) < 0.05);

    double tail = 0.0;
    for (std::size_t i = curve.size() - 10; i < curve.size(); ++i) tail += curve[i].train_loss;
    CHECK(tail / 10.0 < curve.front().train_loss);
}

TEST_CASE("training is seed-deterministic") {
    Matrix x(40, 3, testing::random_vector(120, 1));
    std::vector<int> labels;
    for (std::size_t i = 0; i < 40; ++i) labels.push_back(x(i, 0) > 0 ? 1 : 0);
    const auto d = make_classification(x, labels, 2);
    const auto s = split(d, 30, 10, 2);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    const auto arch = make_dense_network({3, 4, 2}, Activation::Sigmoid, Activation::Softmax).layers;
    auto a = init_gaussian(arch, 0.5, 1), b = init_gaussian(arch, 0.5, 1);
    const auto ca = train_network(a, s, cfg, "a", 7);
    const auto cb = train_network(b, s, cfg, "a", 7);
    CHECK(a == b);
    for (std::size_t i = 0; i < ca.size(); ++i) {
        CHECK(ca[i].train_loss == cb[i].train_loss);
        CHECK(ca[i].test_metric == cb[i].test_metric);
    }
}

TEST_CASE("split and subset") {
    Matrix x(10, 1);
    for (std::size_t i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i);
    const auto d = make_reconstruction(x);
    const auto s = split(d, 6, 0, 3);
    CHECK(s.train.size() == 6);
    CHECK(s.test.size() == 4);
    std::set<double> seen;
    for (std::size_t i = 0; i < 6; ++i) seen.insert(s.train.inputs(i, 0));
    for (std::size_t i = 0; i < 4; ++i) seen.insert(s.test.inputs(i, 0));
    CHECK(seen.size() == 10);
    CHECK(split(d, 6, 0, 3).train.inputs == s.train.inputs);
    CHECK_THROWS_AS(split(d, 10, 0, 3), ParameterError);
    CHECK_THROWS_AS(split(d, 6, 5, 3), ParameterError);
    CHECK_THROWS_AS(make_classification(x, std::vector<int>(10, 3), 3), ParameterError);
}

TEST_CASE("population bookkeeping and divergence") {
    TrainConfig cfg;
    cfg.task = Task::Reconstruction;
    cfg.loss = Loss::MSE;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    const auto arch = make_dense_network({2, 3, 2}, Activation::Linear, Activation::Linear).layers;
    auto pop = make_population("p", arch, cfg, 3);
    REQUIRE(pop.members.size() == 3);
    CHECK(pop.members[0].id == "p-000");
    CHECK(pop.members[2].id == "p-002");
    CHECK(pop.members[0].seed != pop.members[1].seed);
    CHECK_FALSE(pop.members[0].spec == pop.members[1].spec);

    Matrix x(12, 2, testing::random_vector(24, 3));
    const auto s = split(make_reconstruction(x), 8, 4, 1);
    auto stable = pop;
    train_population(stable, s, 2);
    for (const auto& m : stable.members) {
        CHECK(m.trained);
        CHECK_FALSE(m.diverged);
        CHECK(m.curve.size() == 2);
        CHECK_FALSE(m.initial_metrics.empty());
        CHECK_FALSE(m.final_metrics.empty());
    }

    // A huge learning rate on a linear net blows up: recorded, not thrown.
    pop.config.learning_rate = 1e200;
    pop.members[1].spec.params[0].weights(0, 0) = 1e200;
    CHECK_NOTHROW(train_population(pop, s, 1));
    bool any = false;
    for (const auto& m : pop.members) any |= m.diverged;
    CHECK(any);
}

TEST_CASE("untrained MNIST population sits at chance level") {
    const auto mnist = load_mnist(std::filesystem::path(CNTNET_MNIST_DIR));
    const auto data = make_classification(mnist.images, mnist.labels, 10);
    const auto s = split(data, 8000, 2000, 1);
    TrainConfig cfg;
    const auto arch = make_dense_network({784, 128, 64, 32, 10}, Activation::Sigmoid, Activation::Softmax).layers;
    auto pop = make_population("u", arch, cfg, 5);
    evaluate_population(pop, s.test);
    double mean = 0.0;
    for (const auto& m : pop.members) mean += m.test_accuracy;
    mean /= 5.0;
    CHECK(std::abs(mean - 0.1) <= 0.05);
}

TEST_CASE("initial snapshots pass the untrained-network nulls") {
    TrainConfig cfg;
    cfg.init_variance = 0.5;
    cfg.epochs = 1;
    const auto arch = make_dense_network({50, 40, 30, 10}, Activation::Sigmoid, Activation::Softmax).layers;
    auto pop = make_population("g", arch, cfg, 4);
    Matrix x(20, 50, testing::random_vector(1000, 8, 0.0, 1.0));
    std::vector<int> labels(20);
    for (std::size_t i = 0; i < 20; ++i) labels[i] = static_cast<int>(i % 10);
    train_population(pop, split(make_classification(x, labels, 10), 15, 5, 1), 1);

    const std::size_t fan_in[] = {0, 50, 40, 30};
    for (std::size_t layer = 1; layer <= 3; ++layer) {
        std::vector<double> s;
        for (const auto& m : pop.members)
            for (const auto& sample : m.initial_metrics)
                if (sample.metric == MetricKind::NodeInStrength && sample.layer == layer) s.push_back(sample.value);
        REQUIRE(s.size() == 4 * arch[layer - 1].out_dim);
        const auto r = ks_test(s, node_strength_null(std::sqrt(0.5), fan_in[layer], 0));
        INFO("layer " << layer << " p " << r.p_value);
        CHECK(r.verdict == Verdict::Consistent);
    }
}
