#pragma once

// Binary and text formats: MNIST IDX, CIFAR-10 binary batches, the weight
// file, histogram reports.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cntnet/netgraph.hpp"
#include "cntnet/train.hpp"

namespace cntnet {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Unsigned-byte IDX tensor.
struct IdxTensor {
    std::uint32_t magic = 0;
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> data;

    /// data / 255, in [0, 1].
    std::vector<double> normalized() const;
};

/// Parses an unsigned-byte IDX file (big-endian header). Never reads past
/// `bytes`; malformed input throws ParseError with the failing offset.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);

/// Images file: magic 0x00000803 and shape (n, rows, cols).
IdxTensor parse_idx_images(std::span<const std::uint8_t> bytes);
/// Labels file: magic 0x00000801 and shape (n).
IdxTensor parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

struct MnistData {
    Matrix images;  // n x (rows * cols), pixels scaled to [0, 1]
    std::vector<int> labels;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Loads an images/labels IDX pair. `dir` must contain a file whose name
/// contains "images" and one whose name contains "labels" (for instance
/// train-images-idx3-ubyte and train-labels-idx1-ubyte); `prefix` narrows
/// the match when several pairs are present.
MnistData load_mnist(const std::filesystem::path& dir, const std::string& prefix = "");
MnistData load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR-10 binary batch: 3073-byte records (label, 3072 RGB bytes).
MnistData parse_cifar10(std::span<const std::uint8_t> bytes);

// Weight file:
//   "CNTW" | u32 LE manifest length M | M bytes JSON manifest | blob
// The manifest lists format version, storage precision, the layers with
// their shapes, activations and blob byte offsets. The blob holds
// little-endian float32 values, layer by layer, weights before bias,
// row-major with the source neuron as row.
inline constexpr int kWeightFormatMajor = 1;
inline constexpr int kWeightFormatMinor = 0;

std::vector<std::uint8_t> write_weights(const NetworkSpec& spec);

/// Throws ParseError on malformed input and StructuralError when the
/// decoded network violates an invariant (e.g. softmax on a hidden layer).
NetworkSpec read_weights(std::span<const std::uint8_t> bytes);

/// Parses without validating, for inspecting malformed networks.
NetworkSpec read_weights_unvalidated(std::span<const std::uint8_t> bytes);

struct Summary {
    double mean = 0.0;
    double variance = 0.0;  // population variance
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;

    bool operator==(const Summary&) const = default;
};

Summary summarize(std::span<const double> samples);

inline constexpr std::size_t kDefaultBins = 50;

/// Bins are [e_i, e_{i+1}) except the last, which is closed. Samples
/// outside an explicit range are tallied in underflow / overflow, so
/// sum(counts) + underflow + overflow == summary.count.
struct HistogramReport {
    std::string metric;
    std::optional<std::size_t> layer;
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::size_t underflow = 0;
    std::size_t overflow = 0;
    Summary summary;
    std::string population_id;

    bool operator==(const HistogramReport&) const = default;
};

struct Range {
    double lo;
    double hi;
};

/// Throws ParameterError on an empty or non-finite sample set, bins == 0
/// or an empty range. Without a range, [min, max] of the samples is used
/// (widened by 0.5 each side when all samples are equal).
HistogramReport histogram(std::span<const double> samples, std::size_t bins, std::optional<Range> range = std::nullopt);

enum class ReportFormat { CSV, JSON };

ReportFormat report_format_from_string(std::string_view name);
std::string_view extension(ReportFormat format);

std::string reports_to_csv(std::span<const HistogramReport> reports);
std::string reports_to_json(std::span<const HistogramReport> reports);
std::vector<HistogramReport> reports_from_json(const std::string& text);

/// Writes `reports` to `path`; throws IoError naming the path on failure.
void emit_report(std::span<const HistogramReport> reports, ReportFormat format, const std::filesystem::path& path);

/// Shortest round-trip decimal form of `v`, independent of locale.
std::string format_double(double v);

}  // namespace cntnet
