#include "cntnet/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cntnet/errors.hpp"

namespace cntnet {

using ordered_json = nlohmann::ordered_json;

namespace {

// Bounds-checked cursor over a byte buffer; every read past the end throws.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        if (n > remaining())
            throw ParseError(bytes_.size(), std::string("truncated ") + what + ": need " + std::to_string(n) +
                                                " bytes, " + std::to_string(remaining()) + " left");
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint32_t u32_be(const char* what) {
        const auto b = take(4, what);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    std::uint32_t u32_le(const char* what) {
        const auto b = take(4, what);
        return (std::uint32_t{b[3]} << 24) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[1]} << 8) | b[0];
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

bool mul_overflows(std::size_t a, std::size_t b, std::size_t& out) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) return true;
    out = a * b;
    return false;
}

}  // namespace

std::vector<double> IdxTensor::normalized() const {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i] / 255.0;
    return out;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    const auto magic = in.take(4, "IDX magic");
    if (magic[0] != 0 || magic[1] != 0)
        throw ParseError(0, "IDX magic must start with two zero bytes");
    if (magic[2] != 0x08) throw ParseError(2, "unsupported IDX element type 0x" + std::to_string(magic[2]));
    const std::size_t ndims = magic[3];
    if (ndims == 0 || ndims > 4) throw ParseError(3, "unsupported IDX rank " + std::to_string(ndims));

    IdxTensor t;
    t.magic = (std::uint32_t{magic[2]} << 8) | magic[3];
    std::size_t total = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        const std::size_t at = in.offset();
        const std::size_t dim = in.u32_be("IDX dimension");
        if (mul_overflows(total, dim, total)) throw ParseError(at, "IDX dimensions overflow");
        t.shape.push_back(dim);
    }
    if (total > in.remaining())
        throw ParseError(bytes.size(), "IDX payload truncated: header declares " + std::to_string(total) +
                                           " bytes, " + std::to_string(in.remaining()) + " present");
    const auto payload = in.take(total, "IDX payload");
    if (in.remaining() != 0)
        throw ParseError(in.offset(), std::to_string(in.remaining()) + " trailing bytes after IDX payload");
    t.data.assign(payload.begin(), payload.end());
    return t;
}

IdxTensor parse_idx_images(std::span<const std::uint8_t> bytes) {
    auto t = parse_idx(bytes);
    if (t.magic != kIdxImagesMagic || t.shape.size() != 3) throw ParseError(0, "not an IDX images file (magic 0x00000803)");
    return t;
}

IdxTensor parse_idx_labels(std::span<const std::uint8_t> bytes) {
    auto t = parse_idx(bytes);
    if (t.magic != kIdxLabelsMagic || t.shape.size() != 1) throw ParseError(0, "not an IDX labels file (magic 0x00000801)");
    return t;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError(path.string(), "read failed");
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

MnistData load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = parse_idx_images(read_file(images));
    const auto lab = parse_idx_labels(read_file(labels));
    if (img.shape[0] != lab.shape[0])
        throw ParseError(4, images.string() + " holds " + std::to_string(img.shape[0]) + " images but " +
                                labels.string() + " holds " + std::to_string(lab.shape[0]) + " labels");
    MnistData m;
    m.rows = img.shape[1];
    m.cols = img.shape[2];
    m.images = Matrix(img.shape[0], m.rows * m.cols, img.normalized());
    m.labels.assign(lab.data.begin(), lab.data.end());
    return m;
}

MnistData load_mnist(const std::filesystem::path& dir, const std::string& prefix) {
    std::error_code ec;
    std::vector<std::filesystem::path> images, labels;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        const auto name = entry.path().filename().string();
        if (!entry.is_regular_file() || name.rfind(prefix, 0) != 0) continue;
        if (name.find("images") != std::string::npos) images.push_back(entry.path());
        if (name.find("labels") != std::string::npos) labels.push_back(entry.path());
    }
    if (ec) throw IoError(dir.string(), ec.message());
    if (images.size() != 1 || labels.size() != 1)
        throw IoError(dir.string(), "expected exactly one '" + prefix + "*images*' and one '" + prefix +
                                        "*labels*' IDX file, found " + std::to_string(images.size()) + " and " +
                                        std::to_string(labels.size()));
    return load_mnist(images.front(), labels.front());
}

MnistData parse_cifar10(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t record = 3073;
    if (bytes.size() % record != 0)
        throw ParseError(bytes.size() - bytes.size() % record, "CIFAR-10 batch is not a whole number of 3073-byte records");
    const std::size_t n = bytes.size() / record;
    MnistData m;
    m.rows = 32;
    m.cols = 32;
    m.images = Matrix(n, 3072);
    for (std::size_t i = 0; i < n; ++i) {
        const auto rec = bytes.subspan(i * record, record);
        if (rec[0] > 9) throw ParseError(i * record, "CIFAR-10 label " + std::to_string(rec[0]) + " out of range");
        m.labels.push_back(rec[0]);
        auto row = m.images.row(i);
        for (std::size_t j = 0; j < 3072; ++j) row[j] = rec[1 + j] / 255.0;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Weight file

namespace {

constexpr char kWeightMagic[4] = {'C', 'N', 'T', 'W'};

struct TensorSlot {
    const char* name;
    std::vector<std::size_t> shape;
};

std::vector<TensorSlot> tensor_slots(const LayerSpec& layer) {
    switch (layer.kind) {
        case LayerKind::Dense:
            return {{"weights", {layer.in_dim, layer.out_dim}}, {"bias", {layer.out_dim}}};
        case LayerKind::Conv2D:
            return {{"weights", {layer.conv.kernel, layer.conv.kernel}}, {"bias", {1}}};
        case LayerKind::Recurrent: {
            const auto& r = layer.recurrent;
            return {{"weights", {r.input_dim, r.hidden_dim}},
                    {"recurrent", {r.hidden_dim, r.hidden_dim}},
                    {"bias", {r.hidden_dim}}};
        }
    }
    return {};
}

std::span<const double> slot_values(const LayerParams& p, std::string_view name) {
    if (name == "weights") return p.weights.values();
    if (name == "recurrent") return p.recurrent.values();
    return p.bias;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f32(std::span<const std::uint8_t> b) {
    const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
                               (std::uint32_t{b[3]} << 24);
    return static_cast<double>(std::bit_cast<float>(bits));
}

// Manifest dimensions are untrusted; cap them so shape products cannot overflow.
constexpr std::uint64_t kMaxDim = 1u << 24;

std::size_t get_dim(const ordered_json& layer, const char* key, std::size_t at) {
    if (!layer.contains(key) || !layer[key].is_number_unsigned())
        throw ParseError(at, std::string("layer field '") + key + "' missing or not a non-negative integer");
    const auto v = layer[key].get<std::uint64_t>();
    if (v > kMaxDim) throw ParseError(at, std::string("layer field '") + key + "' is implausibly large");
    return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<std::uint8_t> write_weights(const NetworkSpec& spec) {
    require_valid(spec);
    ordered_json manifest;
    manifest["format"] = "cntnet-weights";
    manifest["version"] = std::to_string(kWeightFormatMajor) + "." + std::to_string(kWeightFormatMinor);
    manifest["storage"] = "float32-le";
    std::size_t offset = 0;
    ordered_json layers = ordered_json::array();
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        ordered_json j;
        j["index"] = l;
        j["kind"] = std::string(to_string(layer.kind));
        j["activation"] = std::string(to_string(layer.activation));
        switch (layer.kind) {
            case LayerKind::Dense:
                j["in"] = layer.in_dim;
                j["out"] = layer.out_dim;
                break;
            case LayerKind::Conv2D:
                j["height"] = layer.conv.height;
                j["width"] = layer.conv.width;
                j["kernel"] = layer.conv.kernel;
                j["stride"] = layer.conv.stride;
                break;
            case LayerKind::Recurrent:
                j["input_dim"] = layer.recurrent.input_dim;
                j["hidden_dim"] = layer.recurrent.hidden_dim;
                j["horizon"] = layer.recurrent.horizon;
                break;
        }
        ordered_json tensors = ordered_json::array();
        for (const auto& slot : tensor_slots(layer)) {
            std::size_t count = 1;
            for (auto d : slot.shape) count *= d;
            tensors.push_back({{"name", slot.name}, {"shape", slot.shape}, {"offset", offset}});
            offset += count * 4;
        }
        j["tensors"] = std::move(tensors);
        layers.push_back(std::move(j));
    }
    manifest["layers"] = std::move(layers);
    manifest["blob_bytes"] = offset;

    const std::string text = manifest.dump();
    std::vector<std::uint8_t> out;
    out.reserve(8 + text.size() + offset);
    out.insert(out.end(), std::begin(kWeightMagic), std::end(kWeightMagic));
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    out.insert(out.end(), text.begin(), text.end());
    for (std::size_t l = 0; l < spec.layers.size(); ++l)
        for (const auto& slot : tensor_slots(spec.layers[l]))
            for (double v : slot_values(spec.params[l], slot.name)) put_f32(out, v);
    return out;
}

NetworkSpec read_weights_unvalidated(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    const auto magic = in.take(4, "weight file magic");
    if (!std::equal(magic.begin(), magic.end(), std::begin(kWeightMagic)))
        throw ParseError(0, "not a weight file (magic \"CNTW\" expected)");
    const std::size_t manifest_len = in.u32_le("manifest length");
    const std::size_t manifest_at = in.offset();
    const auto text = in.take(manifest_len, "manifest");
    const std::size_t blob_at = in.offset();

    ordered_json m;
    try {
        m = ordered_json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(manifest_at + (e.byte > 0 ? e.byte - 1 : 0), std::string("manifest is not valid JSON: ") + e.what());
    }

    NetworkSpec spec;
    try {
        if (!m.is_object() || m.value("format", "") != "cntnet-weights")
            throw ParseError(manifest_at, "manifest format tag missing");
        const std::string version = m.at("version").get<std::string>();
        int major = -1;
        const auto [ptr, ec] = std::from_chars(version.data(), version.data() + version.size(), major);
        if (ec != std::errc{} || ptr == version.data() || (ptr != version.data() + version.size() && *ptr != '.'))
            throw ParseError(manifest_at, "malformed version '" + version + "'");
        if (major != kWeightFormatMajor)
            throw ParseError(manifest_at, "unsupported weight format major version " + std::to_string(major));
        if (m.value("storage", "") != "float32-le") throw ParseError(manifest_at, "unsupported storage precision");
        if (!m.at("blob_bytes").is_number_unsigned()) throw ParseError(manifest_at, "blob_bytes must be unsigned");
        const auto blob_bytes = m.at("blob_bytes").get<std::uint64_t>();
        if (blob_bytes != in.remaining())
            throw ParseError(blob_at, "manifest declares " + std::to_string(blob_bytes) + " blob bytes, file holds " +
                                          std::to_string(in.remaining()));
        const auto& layers = m.at("layers");
        if (!layers.is_array() || layers.empty()) throw ParseError(manifest_at, "manifest has no layers");

        std::uint64_t expected_offset = 0;
        struct Pending {
            LayerSpec layer;
            std::vector<std::pair<std::string, std::uint64_t>> slots;  // name, offset
        };
        std::vector<Pending> pending;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& j = layers[l];
            if (!j.is_object()) throw ParseError(manifest_at, "layer entry is not an object");
            const auto kind = layer_kind_from_string(j.at("kind").get<std::string>());
            const auto act = activation_from_string(j.at("activation").get<std::string>());
            LayerSpec layer;
            switch (kind) {
                case LayerKind::Dense:
                    layer = LayerSpec::dense(get_dim(j, "in", manifest_at), get_dim(j, "out", manifest_at), act);
                    break;
                case LayerKind::Conv2D:
                    layer = LayerSpec::conv2d({get_dim(j, "height", manifest_at), get_dim(j, "width", manifest_at),
                                               get_dim(j, "kernel", manifest_at), get_dim(j, "stride", manifest_at)},
                                              act);
                    break;
                case LayerKind::Recurrent:
                    layer = LayerSpec::rnn({get_dim(j, "input_dim", manifest_at), get_dim(j, "hidden_dim", manifest_at),
                                            get_dim(j, "horizon", manifest_at)},
                                           act);
                    break;
            }
            const auto slots = tensor_slots(layer);
            const auto& tensors = j.at("tensors");
            if (!tensors.is_array() || tensors.size() != slots.size())
                throw ParseError(manifest_at, "layer " + std::to_string(l) + " declares the wrong number of tensors");
            Pending p{layer, {}};
            for (std::size_t s = 0; s < slots.size(); ++s) {
                const auto& t = tensors[s];
                if (t.at("name").get<std::string>() != slots[s].name)
                    throw ParseError(manifest_at, "layer " + std::to_string(l) + " tensor " + std::to_string(s) +
                                                      " should be '" + slots[s].name + "'");
                if (t.at("shape").get<std::vector<std::uint64_t>>() !=
                    std::vector<std::uint64_t>(slots[s].shape.begin(), slots[s].shape.end()))
                    throw ParseError(manifest_at, "layer " + std::to_string(l) + " tensor '" + slots[s].name +
                                                      "' shape disagrees with the layer dimensions");
                if (!t.at("offset").is_number_unsigned() || t.at("offset").get<std::uint64_t>() != expected_offset)
                    throw ParseError(manifest_at, "layer " + std::to_string(l) + " tensor '" + slots[s].name +
                                                      "' offset is not contiguous");
                std::uint64_t count = 1;
                for (auto d : slots[s].shape) count *= d;  // each dim <= 2^24, at most 2 dims
                p.slots.emplace_back(slots[s].name, expected_offset);
                expected_offset += count * 4;
                if (expected_offset > blob_bytes)
                    throw ParseError(blob_at, "declared tensors exceed the " + std::to_string(blob_bytes) + "-byte blob");
            }
            pending.push_back(std::move(p));
        }
        if (expected_offset != blob_bytes)
            throw ParseError(blob_at, "declared tensors cover " + std::to_string(expected_offset) + " of " +
                                          std::to_string(blob_bytes) + " blob bytes");

        const auto blob = bytes.subspan(blob_at);
        for (auto& p : pending) {
            LayerParams params = zero_params(p.layer);
            for (const auto& [name, off] : p.slots) {
                std::span<double> dst = name == "weights"     ? params.weights.values()
                                        : name == "recurrent" ? params.recurrent.values()
                                                              : std::span<double>(params.bias);
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = get_f32(blob.subspan(off + 4 * i, 4));
            }
            spec.layers.push_back(p.layer);
            spec.params.push_back(std::move(params));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_at, std::string("malformed manifest: ") + e.what());
    } catch (const ParameterError& e) {
        throw ParseError(manifest_at, std::string("malformed manifest: ") + e.what());
    }
    return spec;
}

NetworkSpec read_weights(std::span<const std::uint8_t> bytes) {
    auto spec = read_weights_unvalidated(bytes);
    require_valid(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Histograms and reports

Summary summarize(std::span<const double> samples) {
    Summary s;
    s.count = samples.size();
    if (samples.empty()) return s;
    s.min = s.max = samples.front();
    double sum = 0.0;
    for (double x : samples) {
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sum / static_cast<double>(samples.size());
    double ss = 0.0;
    for (double x : samples) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(samples.size());
    return s;
}

HistogramReport histogram(std::span<const double> samples, std::size_t bins, std::optional<Range> range) {
    if (samples.empty()) throw ParameterError("histogram of an empty sample set");
    if (bins == 0) throw ParameterError("histogram needs at least one bin");
    for (double x : samples)
        if (!std::isfinite(x)) throw ParameterError("histogram samples must be finite");
    HistogramReport h;
    h.summary = summarize(samples);
    Range r = range.value_or(Range{h.summary.min, h.summary.max});
    if (!range && r.lo == r.hi) r = {r.lo - 0.5, r.hi + 0.5};
    if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw ParameterError("histogram range must satisfy lo < hi");

    h.edges.resize(bins + 1);
    const double width = (r.hi - r.lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = r.lo + width * static_cast<double>(i);
    h.edges.back() = r.hi;
    h.counts.assign(bins, 0);
    for (double x : samples) {
        if (x < r.lo) {
            ++h.underflow;
            continue;
        }
        if (x > r.hi) {
            ++h.overflow;
            continue;
        }
        auto b = static_cast<std::size_t>((x - r.lo) / width);
        b = std::min(b, bins - 1);
        // Guard against rounding in the division: enforce e_b <= x < e_{b+1}.
        while (b > 0 && x < h.edges[b]) --b;
        while (b + 1 < bins && x >= h.edges[b + 1]) ++b;
        ++h.counts[b];
    }
    return h;
}

ReportFormat report_format_from_string(std::string_view name) {
    if (name == "csv") return ReportFormat::CSV;
    if (name == "json") return ReportFormat::JSON;
    throw ParameterError("unknown report format '" + std::string(name) + "'");
}

std::string_view extension(ReportFormat format) { return format == ReportFormat::CSV ? ".csv" : ".json"; }

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::string reports_to_csv(std::span<const HistogramReport> reports) {
    std::string out = "metric,layer,bin_left,bin_right,count,population_id\n";
    for (const auto& r : reports) {
        const std::string layer = r.layer ? std::to_string(*r.layer) : "";
        for (std::size_t b = 0; b < r.counts.size(); ++b) {
            out += r.metric + "," + layer + "," + format_double(r.edges[b]) + "," + format_double(r.edges[b + 1]) +
                   "," + std::to_string(r.counts[b]) + "," + r.population_id + "\n";
        }
    }
    return out;
}

namespace {

ordered_json report_to_json(const HistogramReport& r) {
    ordered_json j;
    j["metric"] = r.metric;
    j["layer"] = r.layer ? ordered_json(*r.layer) : ordered_json(nullptr);
    j["population_id"] = r.population_id;
    j["edges"] = r.edges;
    j["counts"] = r.counts;
    j["underflow"] = r.underflow;
    j["overflow"] = r.overflow;
    j["summary"] = {{"mean", r.summary.mean},
                    {"variance", r.summary.variance},
                    {"min", r.summary.min},
                    {"max", r.summary.max},
                    {"count", r.summary.count}};
    return j;
}

}  // namespace

std::string reports_to_json(std::span<const HistogramReport> reports) {
    ordered_json j;
    j["reports"] = ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
    return j.dump(1) + "\n";
}

std::vector<HistogramReport> reports_from_json(const std::string& text) {
    std::vector<HistogramReport> out;
    try {
        const auto j = ordered_json::parse(text);
        for (const auto& r : j.at("reports")) {
            HistogramReport h;
            h.metric = r.at("metric").get<std::string>();
            if (!r.at("layer").is_null()) h.layer = r.at("layer").get<std::size_t>();
            h.population_id = r.at("population_id").get<std::string>();
            h.edges = r.at("edges").get<std::vector<double>>();
            h.counts = r.at("counts").get<std::vector<std::size_t>>();
            h.underflow = r.at("underflow").get<std::size_t>();
            h.overflow = r.at("overflow").get<std::size_t>();
            const auto& s = r.at("summary");
            h.summary = {s.at("mean").get<double>(), s.at("variance").get<double>(), s.at("min").get<double>(),
                         s.at("max").get<double>(), s.at("count").get<std::size_t>()};
            out.push_back(std::move(h));
        }
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.byte, std::string("report is not valid JSON: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, std::string("malformed report: ") + e.what());
    }
    return out;
}

void emit_report(std::span<const HistogramReport> reports, ReportFormat format, const std::filesystem::path& path) {
    write_text(path, format == ReportFormat::CSV ? reports_to_csv(reports) : reports_to_json(reports));
}

}  // namespace cntnet
