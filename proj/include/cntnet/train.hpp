#pragma once

// Gaussian initialisation, minibatch SGD and population training for fully
// connected classifiers and autoencoders.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cntnet/matrix.hpp"
#include "cntnet/metrics.hpp"
#include "cntnet/netgraph.hpp"

namespace cntnet {

enum class Task { Classification, Reconstruction };
enum class Loss { CrossEntropy, MSE };

std::string_view to_string(Task task);
std::string_view to_string(Loss loss);
Task task_from_string(std::string_view name);
Loss loss_from_string(std::string_view name);

struct TrainConfig {
    Task task = Task::Classification;
    Loss loss = Loss::CrossEntropy;
    double learning_rate = 0.1;
    std::size_t batch_size = 64;
    std::size_t epochs = 20;
    double init_variance = 0.5;  // sigma^2 of the Gaussian initialisation
    std::uint64_t seed = 1;
};

/// Throws ParameterError when the config is inconsistent on its own or with
/// `spec`: classification needs cross-entropy and a softmax output,
/// reconstruction needs MSE, cross-entropy needs a softmax output.
void check_config(const TrainConfig& config, const NetworkSpec& spec);

/// Row i of `inputs` is one example; `targets` holds one-hot labels for
/// classification or the inputs themselves for reconstruction.
struct Dataset {
    Matrix inputs;
    Matrix targets;
    std::vector<int> labels;  // empty for reconstruction

    std::size_t size() const noexcept { return inputs.rows(); }
};

Dataset make_classification(Matrix inputs, std::vector<int> labels, std::size_t classes);
Dataset make_reconstruction(Matrix inputs);
Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

struct DatasetSplit {
    Dataset train;
    Dataset test;
};

/// Shuffles with `seed` and takes the first `train_count` rows for training
/// and the next `test_count` (0 = all remaining) for testing.
DatasetSplit split(const Dataset& data, std::size_t train_count, std::size_t test_count, std::uint64_t seed);

/// Every weight i.i.d. N(0, variance), every bias zero.
NetworkSpec init_gaussian(const std::vector<LayerSpec>& arch, double variance, std::uint64_t seed);

/// Mean per-example loss. Cross-entropy is -sum_k y_k log a_k; MSE is the
/// mean over outputs of (a_k - y_k)^2.
double batch_loss(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, Loss loss);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;
};

/// Backpropagated gradient of batch_loss(); `loss_out`, if given, receives the loss.
Gradients compute_gradients(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, Loss loss,
                            double* loss_out = nullptr);

struct StepResult {
    NetworkSpec spec;
    double loss;  // before the update
};

StepResult sgd_step(const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, const TrainConfig& config);

/// In-place variant used by the training loop. Returns the pre-update loss.
double sgd_step_inplace(NetworkSpec& spec, const Matrix& inputs, const Matrix& targets, const TrainConfig& config);

double evaluate_accuracy(const NetworkSpec& spec, const Dataset& data);
double evaluate_mse(const NetworkSpec& spec, const Dataset& data);

struct EpochRecord {
    std::size_t epoch;
    std::string member;
    double train_loss;
    double test_metric;  // accuracy for classification, MSE for reconstruction
};

struct Member {
    std::string id;
    std::uint64_t seed = 0;
    NetworkSpec spec;
    std::vector<MetricSample> initial_metrics;
    std::vector<MetricSample> final_metrics;
    std::vector<EpochRecord> curve;
    double test_accuracy = 0.0;
    double test_mse = 0.0;
    bool trained = false;
    bool diverged = false;
    std::string error;
};

struct Population {
    std::string id;
    std::vector<LayerSpec> arch;
    TrainConfig config;
    std::vector<Member> members;
};

/// Seed of member `index`; member initialisations differ only through it.
std::uint64_t member_seed(std::uint64_t population_seed, std::size_t index);

/// `size` Gaussian-initialised members named "<id>-000", "<id>-001", ...
Population make_population(const std::string& id, const std::vector<LayerSpec>& arch, const TrainConfig& config,
                           std::size_t size);

/// Trains one network in place; throws DivergenceError on a non-finite loss.
std::vector<EpochRecord> train_network(NetworkSpec& spec, const DatasetSplit& data, const TrainConfig& config,
                                       const std::string& member_id, std::uint64_t shuffle_seed);

/// Trains every member independently (in parallel up to `threads`, 0 = all
/// cores), snapshotting input-independent metrics before and after.
/// A diverged member is recorded, not fatal.
void train_population(Population& population, const DatasetSplit& data, std::size_t threads = 0);

/// Fills test_accuracy / test_mse of every member without training.
void evaluate_population(Population& population, const Dataset& test);

}  // namespace cntnet
