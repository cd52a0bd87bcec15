#include "cntnet/train.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "cntnet/errors.hpp"
#include "cntnet/forward.hpp"
#include "cntnet/rng.hpp"

namespace cntnet {

std::string_view to_string(Task task) {
    return task == Task::Classification ? "classification" : "reconstruction";
}

std::string_view to_string(Loss loss) { return loss == Loss::CrossEntropy ? "cross_entropy" : "mse"; }

Task task_from_string(std::string_view name) {
    if (name == "classification") return Task::Classification;
    if (name == "reconstruction") return Task::Reconstruction;
    throw ParameterError("unknown task '" + std::string(name) + "'");
}

Loss loss_from_string(std::string_view name) {
    if (name == "cross_entropy") return Loss::CrossEntropy;
    if (name == "mse") return Loss::MSE;
    throw ParameterError("unknown loss '" + std::string(name) + "'");
}

void check_config(const TrainConfig& config, const NetworkSpec& spec) {
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate))
        throw ParameterError("learning rate must be a finite non-negative number");
    if (config.batch_size == 0) throw ParameterError("batch size must be positive");
    if (!(config.init_variance > 0.0)) throw ParameterError("initialisation variance must be positive");
    if (config.task == Task::Classification && config.loss != Loss::CrossEntropy)
        throw ParameterError("classification trains with cross-entropy");
    if (config.task == Task::Reconstruction && config.loss != Loss::MSE)
        throw ParameterError("reconstruction trains with MSE");
    if (config.loss == Loss::CrossEntropy && (spec.layers.empty() || spec.layers.back().activation != Activation::Softmax))
        throw ParameterError("cross-entropy needs a softmax output layer");
}

Dataset make_classification(Matrix inputs, std::vector<int> labels, std::size_t classes) {
    if (labels.size() != inputs.rows()) throw StructuralError("label count does not match input count");
    Dataset d;
    d.targets = Matrix(inputs.rows(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw ParameterError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
        d.targets(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    d.inputs = std::move(inputs);
    d.labels = std::move(labels);
    return d;
}

Dataset make_reconstruction(Matrix inputs) {
    Dataset d;
    d.targets = inputs;
    d.inputs = std::move(inputs);
    return d;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
    Dataset d;
    d.inputs = Matrix(rows.size(), data.inputs.cols());
    d.targets = Matrix(rows.size(), data.targets.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = data.inputs.row(rows[i]);
        std::copy(src.begin(), src.end(), d.inputs.row(i).begin());
        const auto tgt = data.targets.row(rows[i]);
        std::copy(tgt.begin(), tgt.end(), d.targets.row(i).begin());
        if (!data.labels.empty()) d.labels.push_back(data.labels[rows[i]]);
    }
    return d;
}

DatasetSplit split(const Dataset& data, std::size_t train_count, std::size_t test_count, std::uint64_t seed) {
    if (train_count == 0 || train_count >= data.size())
        throw ParameterError("train split of " + std::to_string(train_count) + " leaves no test data out of " +
                             std::to_string(data.size()));
    const std::size_t remaining = data.size() - train_count;
    if (test_count == 0) test_count = remaining;
    if (test_count > remaining) throw ParameterError("test split larger than the remaining data");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto engine = make_engine(seed, 0x5EED);
    std::shuffle(order.begin(), order.end(), engine);
    const std::span<const std::size_t> all(order);
    return {subset(data, all.first(train_count)), subset(data, all.subspan(train_count, test_count))};
}

NetworkSpec init_gaussian(const std::vector<LayerSpec>& arch, double variance, std::uint64_t seed) {
    if (!(variance > 0.0) || !std::isfinite(variance)) throw ParameterError("initialisation variance must be positive");
    NetworkSpec spec;
    spec.layers = arch;
    auto engine = make_engine(seed);
    std::normal_distribution<double> weight(0.0, std::sqrt(variance));
    for (const auto& layer : arch) {
        LayerParams p = zero_params(layer);
        for (double& w : p.weights.values()) w = weight(engine);
        for (double& w : p.recurrent.values()) w = weight(engine);
        spec.params.push_back(std::move(p));
    }
    require_valid(spec);
    return spec;
}

namespace {

void require_dense(const NetworkSpec& spec) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].kind != LayerKind::Dense)
            throw StructuralError("training supports dense layers only; layer " + std::to_string(i) + " is " +
                                  std::string(to_string(spec.layers[i].kind)));
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void apply_activation(Activation kind, const Matrix& z, Matrix& a) {
    if (a.rows() != z.rows() || a.cols() != z.cols()) a = Matrix(z.rows(), z.cols());
    const auto zs = z.values();
    auto as = a.values();
    switch (kind) {
        case Activation::Linear: std::copy(zs.begin(), zs.end(), as.begin()); break;
        case Activation::ReLU:
            for (std::size_t i = 0; i < zs.size(); ++i) as[i] = zs[i] > 0.0 ? zs[i] : 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < zs.size(); ++i) as[i] = sigmoid(zs[i]);
            break;
        case Activation::Softmax:
            for (std::size_t r = 0; r < z.rows(); ++r) {
                const auto zr = z.row(r);
                auto ar = a.row(r);
                const double m = *std::max_element(zr.begin(), zr.end());
                double sum = 0.0;
                for (std::size_t j = 0; j < zr.size(); ++j) sum += (ar[j] = std::exp(zr[j] - m));
                for (double& v : ar) v /= sum;
            }
            break;
    }
}

// Batched forward pass keeping every layer's z and f(z).
struct BatchTrace {
    std::vector<Matrix> z;
    std::vector<Matrix> a;
};

void forward_batch(const NetworkSpec& spec, const Matrix& inputs, BatchTrace& t) {
    const std::size_t L = spec.layers.size();
    t.z.resize(L);
    t.a.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& in = l == 0 ? inputs : t.a[l - 1];
        matmul(in, spec.params[l].weights, t.z[l]);
        const auto& b = spec.params[l].bias;
        for (std::size_t r = 0; r < t.z[l].rows(); ++r) {
            auto row = t.z[l].row(r);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
        }
        apply_activation(spec.layers[l].activation, t.z[l], t.a[l]);
    }
}

double loss_from_trace(const BatchTrace& t, const Matrix& targets, Loss loss) {
    const Matrix& a = t.a.back();
    const Matrix& z = t.z.back();
    const double batch = static_cast<double>(a.rows());
    double total = 0.0;
    if (loss == Loss::CrossEntropy) {
        for (std::size_t r = 0; r < z.rows(); ++r) {
            const auto zr = z.row(r);
            const double m = *std::max_element(zr.begin(), zr.end());
            double sum = 0.0;
            for (double v : zr) sum += std::exp(v - m);
            const double lse = m + std::log(sum);
            const auto yr = targets.row(r);
            for (std::size_t k = 0; k < zr.size(); ++k)
                if (yr[k] != 0.0) total -= yr[k] * (zr[k] - lse);
        }
    } else {
        const double outputs = static_cast<double>(a.cols());
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const auto ar = a.row(r);
            const auto yr = targets.row(r);
            double ss = 0.0;
            for (std::size_t k = 0; k < ar.size(); ++k) ss += (ar[k] - yr[k]) * (ar[k] - yr[k]);
            total += ss / outputs;
        }
    }
    return total / batch;
}

// Converts dL/da into dL/dz for layer activation `kind`, in place in `grad`.
void activation_backward(Activation kind, const Matrix& z, const Matrix& a, Matrix& grad) {
    auto g = grad.values();
    const auto zs = z.values();
    const auto as = a.values();
    switch (kind) {
        case Activation::Linear: break;
        case Activation::ReLU:
            for (std::size_t i = 0; i < g.size(); ++i)
                if (!(zs[i] > 0.0)) g[i] = 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= as[i] * (1.0 - as[i]);
            break;
        case Activation::Softmax:
            for (std::size_t r = 0; r < grad.rows(); ++r) {
                auto gr = grad.row(r);
                const auto ar = a.row(r);
                double dot = 0.0;
                for (std::size_t k = 0; k < gr.size(); ++k) dot += gr[k] * ar[k];
                for (std::size_t k = 0; k < gr.size(); ++k) gr[k] = ar[k] * (gr[k] - dot);
            }
            break;
    }
}

struct Workspace {
    BatchTrace trace;
    Matrix delta;
    Matrix next_delta;
    Gradients grads;
};

double backprop(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, Loss loss, Workspace& ws) {
    const std::size_t L = spec.layers.size();
    forward_batch(spec, inputs, ws.trace);
    const double value = loss_from_trace(ws.trace, targets, loss);

    const double batch = static_cast<double>(inputs.rows());
    const Matrix& out = ws.trace.a.back();
    ws.delta = Matrix(out.rows(), out.cols());
    if (loss == Loss::CrossEntropy) {
        // softmax + cross-entropy: dL/dz = (a - y) / B
        for (std::size_t i = 0; i < out.size(); ++i)
            ws.delta.values()[i] = (out.values()[i] - targets.values()[i]) / batch;
    } else {
        const double scale = 2.0 / (static_cast<double>(out.cols()) * batch);
        for (std::size_t i = 0; i < out.size(); ++i)
            ws.delta.values()[i] = scale * (out.values()[i] - targets.values()[i]);
        activation_backward(spec.layers.back().activation, ws.trace.z.back(), out, ws.delta);
    }

    ws.grads.weights.resize(L);
    ws.grads.bias.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& in = l == 0 ? inputs : ws.trace.a[l - 1];
        matmul_at_b(in, ws.delta, ws.grads.weights[l]);
        auto& gb = ws.grads.bias[l];
        gb.assign(ws.delta.cols(), 0.0);
        for (std::size_t r = 0; r < ws.delta.rows(); ++r) {
            const auto row = ws.delta.row(r);
            for (std::size_t j = 0; j < row.size(); ++j) gb[j] += row[j];
        }
        if (l > 0) {
            matmul_a_bt(ws.delta, spec.params[l].weights, ws.next_delta);
            activation_backward(spec.layers[l - 1].activation, ws.trace.z[l - 1], ws.trace.a[l - 1], ws.next_delta);
            std::swap(ws.delta, ws.next_delta);
        }
    }
    return value;
}

void check_batch(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets) {
    if (inputs.rows() == 0) throw ParameterError("empty batch");
    if (inputs.rows() != targets.rows()) throw StructuralError("inputs and targets have different row counts");
    if (inputs.cols() != spec.input_size())
        throw StructuralError("batch inputs have " + std::to_string(inputs.cols()) + " columns, network expects " +
                              std::to_string(spec.input_size()));
    if (targets.cols() != spec.output_size())
        throw StructuralError("batch targets have " + std::to_string(targets.cols()) + " columns, network emits " +
                              std::to_string(spec.output_size()));
}

void apply_update(NetworkSpec& spec, const Gradients& g, double lr) {
    if (lr == 0.0) return;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        auto w = spec.params[l].weights.values();
        const auto gw = g.weights[l].values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
        auto& b = spec.params[l].bias;
        for (std::size_t j = 0; j < b.size(); ++j) b[j] -= lr * g.bias[l][j];
    }
}

}  // namespace

double batch_loss(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, Loss loss) {
    require_dense(spec);
    check_batch(spec, inputs, targets);
    BatchTrace t;
    forward_batch(spec, inputs, t);
    return loss_from_trace(t, targets, loss);
}

Gradients compute_gradients(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, Loss loss,
                            double* loss_out) {
    require_dense(spec);
    require_valid(spec);
    check_batch(spec, inputs, targets);
    if (loss == Loss::CrossEntropy && spec.layers.back().activation != Activation::Softmax)
        throw ParameterError("cross-entropy needs a softmax output layer");
    Workspace ws;
    const double value = backprop(spec, inputs, targets, loss, ws);
    if (loss_out) *loss_out = value;
    return std::move(ws.grads);
}

StepResult sgd_step(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, const TrainConfig& config) {
    StepResult r{spec, 0.0};
    r.loss = sgd_step_inplace(r.spec, inputs, targets, config);
    return r;
}

double sgd_step_inplace(NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, const TrainConfig& config) {
    check_config(config, spec);
    double value = 0.0;
    const auto g = compute_gradients(spec, inputs, targets, config.loss, &value);
    if (!std::isfinite(value)) throw DivergenceError(0, 0, "non-finite loss");
    apply_update(spec, g, config.learning_rate);
    return value;
}

double evaluate_accuracy(const NetworkSpec& spec, const Dataset& data) {
    if (data.labels.empty() || data.size() == 0) throw ParameterError("accuracy needs labelled data");
    require_dense(spec);
    BatchTrace t;
    forward_batch(spec, data.inputs, t);
    const Matrix& out = t.a.back();
    std::size_t correct = 0;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const auto row = out.row(r);
        const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == data.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(out.rows());
}

double evaluate_mse(const NetworkSpec& spec, const Dataset& data) {
    return batch_loss(spec, data.inputs, data.targets, Loss::MSE);
}

std::vector<EpochRecord> train_network(NetworkSpec& spec, const DatasetSplit& data, const TrainConfig& config,
                                       const std::string& member_id, std::uint64_t shuffle_seed) {
    require_dense(spec);
    require_valid(spec);
    check_config(config, spec);
    check_batch(spec, data.train.inputs, data.train.targets);

    const std::size_t n = data.train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto engine = make_engine(shuffle_seed, 0x7EA1);
    Workspace ws;
    Matrix xb, yb;
    std::vector<EpochRecord> curve;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), engine);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t b = std::min(config.batch_size, n - start);
            if (xb.rows() != b) {
                xb = Matrix(b, data.train.inputs.cols());
                yb = Matrix(b, data.train.targets.cols());
            }
            for (std::size_t i = 0; i < b; ++i) {
                const auto xs = data.train.inputs.row(order[start + i]);
                std::copy(xs.begin(), xs.end(), xb.row(i).begin());
                const auto ys = data.train.targets.row(order[start + i]);
                std::copy(ys.begin(), ys.end(), yb.row(i).begin());
            }
            const double value = backprop(spec, xb, yb, config.loss, ws);
            if (!std::isfinite(value)) throw DivergenceError(epoch, batches, "non-finite loss");
            apply_update(spec, ws.grads, config.learning_rate);
            loss_sum += value;
            ++batches;
        }
        const double metric = config.task == Task::Classification ? evaluate_accuracy(spec, data.test)
                                                                   : evaluate_mse(spec, data.test);
        curve.push_back({epoch, member_id, loss_sum / static_cast<double>(batches), metric});
    }
    return curve;
}

std::uint64_t member_seed(std::uint64_t population_seed, std::size_t index) { return mix_seed(population_seed, index); }

Population make_population(const std::string& id, const std::vector<LayerSpec>& arch, const TrainConfig& config,
                           std::size_t size) {
    if (size == 0) throw ParameterError("population size must be positive");
    Population pop;
    pop.id = id;
    pop.arch = arch;
    pop.config = config;
    for (std::size_t i = 0; i < size; ++i) {
        Member m;
        char name[32];
        std::snprintf(name, sizeof name, "%03zu", i);
        m.id = id + "-" + name;
        m.seed = member_seed(config.seed, i);
        m.spec = init_gaussian(arch, config.init_variance, m.seed);
        check_config(config, m.spec);
        pop.members.push_back(std::move(m));
    }
    return pop;
}

namespace {

CollectOptions snapshot_options() {
    CollectOptions o;
    o.disparity = false;
    return o;
}

void score(Member& m, const Population& pop, const Dataset& test) {
    if (pop.config.task == Task::Classification) m.test_accuracy = evaluate_accuracy(m.spec, test);
    m.test_mse = evaluate_mse(m.spec, test);
}

}  // namespace

void train_population(Population& population, const DatasetSplit& data, std::size_t threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, population.members.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < population.members.size(); i = next++) {
            Member& m = population.members[i];
            m.initial_metrics = collect(m.spec, {}, m.id, snapshot_options());
            try {
                m.curve = train_network(m.spec, data, population.config, m.id, m.seed);
                m.trained = true;
                score(m, population, data.test);
            } catch (const DivergenceError& e) {
                m.diverged = true;
                m.error = e.what();
                continue;
            }
            m.final_metrics = collect(m.spec, {}, m.id, snapshot_options());
        }
    };
    if (threads <= 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
}

void evaluate_population(Population& population, const Dataset& test) {
    for (auto& m : population.members) score(m, population, test);
}

}  // namespace cntnet
