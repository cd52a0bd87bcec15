#pragma once

// The cntnet command line: init, train, analyze, theory-check, compare, replay.
//
// Every command writes config.json into its output directory; running
// `cntnet replay <config.json>` re-executes the command with exactly the
// resolved parameters.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cntnet/netgraph.hpp"
#include "cntnet/train.hpp"

namespace cntnet::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitNumeric = 3;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "CNTNET_OUT_DIR";

struct ArchOptions {
    std::string arch = "fc";  // fc | ae
    int depth = 3;            // hidden layers: 3 | 7
    std::string activation = "sigmoid";
    std::string output_activation;  // default: softmax (fc), sigmoid (ae)
    std::string preset;             // fc3 fc7 ae3 ae7 small medium big
    std::vector<std::size_t> layers;  // explicit widths, overrides arch/depth/preset
    std::size_t input_dim = 784;
    std::size_t classes = 10;
};

struct ResolvedArch {
    std::string name;
    std::vector<LayerSpec> layers;
    Task task;
    Loss loss;
};

/// Turns presets / arch+depth / explicit widths into concrete layers.
ResolvedArch resolve_architecture(const ArchOptions& options);

/// Hidden widths of the named presets, for documentation and tests.
std::vector<std::size_t> preset_widths(const std::string& preset, std::size_t input_dim, std::size_t classes);

struct InitOptions {
    ArchOptions arch;
    double sigma2 = 0.5;
    std::size_t n = 5;
    std::uint64_t seed = 1;
    std::string population_id;  // default: architecture name
    std::string format = "csv";
    std::size_t bins = 50;
    std::string out;
};

struct TrainOptions {
    std::string population;  // directory written by init
    std::string data;        // directory with an images/labels IDX pair
    std::size_t train_count = 8000;
    std::size_t test_count = 2000;
    std::uint64_t split_seed = 1;
    std::size_t epochs = 20;
    double learning_rate = 0.1;
    std::size_t batch_size = 64;
    std::size_t threads = 0;
    std::string out;
};

struct AnalyzeOptions {
    std::string population;
    std::string data;  // may be empty when samples == 0
    std::size_t samples = 300;
    std::uint64_t seed = 1;
    std::size_t bins = 50;
    std::string format = "csv";
    std::size_t scatter_inputs = 20;  // inputs per member exported to scatter.csv
    std::optional<double> sigma2;     // null for GOF; default: population init variance
    std::string out;
};

struct TheoryOptions {
    double sigma = 0.1;
    std::size_t in_degree = 32;
    std::size_t out_degree = 0;
    std::size_t width = 0;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    double significance = 0.01;
    std::size_t bins = 20;
    std::optional<double> sampling_sigma;
    std::string out;  // optional file for the JSON report
};

struct CompareOptions {
    std::vector<std::string> inputs;  // analyze output directories
    std::string out;
};

void cmd_init(const InitOptions& options, std::ostream& log);
void cmd_train(const TrainOptions& options, std::ostream& log);
void cmd_analyze(const AnalyzeOptions& options, std::ostream& log);
/// Returns the JSON report it prints.
std::string cmd_theory_check(const TheoryOptions& options, std::ostream& log);
void cmd_compare(const CompareOptions& options, std::ostream& log);
/// Re-runs the command recorded in a config.json echo; `out` overrides its output location.
void cmd_replay(const std::filesystem::path& config, const std::string& out, std::ostream& log);

/// Parses argv and runs; returns the process exit code. Errors are printed
/// to `err` as "error[<category>]: <message>".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Population directories (population.json + one weight file per member).
struct PopulationDir {
    Population population;
    std::vector<std::string> files;
    // Split used for training, if the population has been trained.
    std::optional<TrainOptions> training;
};

void save_population(const std::filesystem::path& dir, const PopulationDir& pop);
PopulationDir load_population(const std::filesystem::path& dir);

}  // namespace cntnet::cli
