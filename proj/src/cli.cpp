#include "cntnet/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cntnet/dataio.hpp"
#include "cntnet/errors.hpp"
#include "cntnet/forward.hpp"
#include "cntnet/lowering.hpp"
#include "cntnet/metrics.hpp"
#include "cntnet/rng.hpp"
#include "cntnet/theory.hpp"

namespace cntnet::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Architectures

std::vector<std::size_t> preset_widths(const std::string& preset, std::size_t input_dim, std::size_t classes) {
    // Hidden widths; Table-1 style tiers are 7 equal-width sigmoid layers.
    static const std::map<std::string, std::vector<std::size_t>> hidden = {
        {"fc3", {128, 64, 32}},
        {"fc7", {128, 96, 64, 48, 32, 24, 16}},
        {"ae3", {128, 64, 128}},
        {"ae7", {256, 128, 64, 32, 64, 128, 256}},
        {"small", {8, 8, 8, 8, 8, 8, 8}},
        {"medium", {32, 32, 32, 32, 32, 32, 32}},
        {"big", {128, 128, 128, 128, 128, 128, 128}},
    };
    const auto it = hidden.find(preset);
    if (it == hidden.end()) throw UsageError("unknown preset '" + preset + "'");
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), it->second.begin(), it->second.end());
    widths.push_back(preset.rfind("ae", 0) == 0 ? input_dim : classes);
    return widths;
}

ResolvedArch resolve_architecture(const ArchOptions& o) {
    std::string preset = o.preset;
    std::string kind = o.arch;
    if (!preset.empty()) {
        kind = preset.rfind("ae", 0) == 0 ? "ae" : "fc";
    } else if (o.layers.empty()) {
        if (o.depth != 3 && o.depth != 7) throw UsageError("--depth must be 3 or 7 (use --layers for other shapes)");
        preset = kind + std::to_string(o.depth);
    }
    if (kind != "fc" && kind != "ae") throw UsageError("--arch must be fc or ae");

    const auto widths = !o.layers.empty() ? o.layers : preset_widths(preset, o.input_dim, o.classes);
    if (widths.size() < 2) throw UsageError("an architecture needs at least an input and an output width");
    for (auto w : widths)
        if (w == 0) throw UsageError("layer widths must be positive");

    Activation hidden;
    try {
        hidden = activation_from_string(o.activation);
    } catch (const ParameterError& e) {
        throw UsageError(e.what());
    }
    if (hidden == Activation::Softmax) throw UsageError("softmax is only allowed on the output layer");
    std::string out_name = o.output_activation;
    if (out_name.empty()) out_name = kind == "fc" ? "softmax" : "sigmoid";
    Activation output;
    try {
        output = activation_from_string(out_name);
    } catch (const ParameterError& e) {
        throw UsageError(e.what());
    }

    ResolvedArch r;
    r.name = (preset.empty() ? kind + "-custom" : preset) + "-" + o.activation;
    r.task = kind == "fc" ? Task::Classification : Task::Reconstruction;
    r.loss = r.task == Task::Classification ? Loss::CrossEntropy : Loss::MSE;
    if (r.task == Task::Classification && output != Activation::Softmax)
        throw UsageError("classification networks end in softmax");
    r.layers = make_dense_network(widths, hidden, output).layers;
    return r;
}

// ---------------------------------------------------------------------------
// Option (de)serialisation for the config echo

namespace {

json to_json(const ArchOptions& a) {
    return {{"arch", a.arch},       {"depth", a.depth},         {"activation", a.activation},
            {"output_activation", a.output_activation}, {"preset", a.preset}, {"layers", a.layers},
            {"input_dim", a.input_dim}, {"classes", a.classes}};
}

ArchOptions arch_from_json(const json& j) {
    ArchOptions a;
    a.arch = j.at("arch").get<std::string>();
    a.depth = j.at("depth").get<int>();
    a.activation = j.at("activation").get<std::string>();
    a.output_activation = j.at("output_activation").get<std::string>();
    a.preset = j.at("preset").get<std::string>();
    a.layers = j.at("layers").get<std::vector<std::size_t>>();
    a.input_dim = j.at("input_dim").get<std::size_t>();
    a.classes = j.at("classes").get<std::size_t>();
    return a;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json to_json(const InitOptions& o) {
    return {{"arch", to_json(o.arch)}, {"sigma2", o.sigma2}, {"n", o.n},         {"seed", o.seed},
            {"population_id", o.population_id}, {"format", o.format}, {"bins", o.bins}, {"out", o.out}};
}

InitOptions init_from_json(const json& j) {
    InitOptions o;
    o.arch = arch_from_json(j.at("arch"));
    o.sigma2 = j.at("sigma2").get<double>();
    o.n = j.at("n").get<std::size_t>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.population_id = j.at("population_id").get<std::string>();
    o.format = j.at("format").get<std::string>();
    o.bins = j.at("bins").get<std::size_t>();
    o.out = j.at("out").get<std::string>();
    return o;
}

json to_json(const TrainOptions& o) {
    return {{"population", o.population}, {"data", o.data},          {"train_count", o.train_count},
            {"test_count", o.test_count}, {"split_seed", o.split_seed}, {"epochs", o.epochs},
            {"learning_rate", o.learning_rate}, {"batch_size", o.batch_size}, {"threads", o.threads},
            {"out", o.out}};
}

TrainOptions train_from_json(const json& j) {
    TrainOptions o;
    o.population = j.at("population").get<std::string>();
    o.data = j.at("data").get<std::string>();
    o.train_count = j.at("train_count").get<std::size_t>();
    o.test_count = j.at("test_count").get<std::size_t>();
    o.split_seed = j.at("split_seed").get<std::uint64_t>();
    o.epochs = j.at("epochs").get<std::size_t>();
    o.learning_rate = j.at("learning_rate").get<double>();
    o.batch_size = j.at("batch_size").get<std::size_t>();
    o.threads = j.at("threads").get<std::size_t>();
    o.out = j.at("out").get<std::string>();
    return o;
}

json to_json(const AnalyzeOptions& o) {
    return {{"population", o.population}, {"data", o.data},    {"samples", o.samples},
            {"seed", o.seed},             {"bins", o.bins},    {"format", o.format},
            {"scatter_inputs", o.scatter_inputs}, {"sigma2", optional_json(o.sigma2)}, {"out", o.out}};
}

AnalyzeOptions analyze_from_json(const json& j) {
    AnalyzeOptions o;
    o.population = j.at("population").get<std::string>();
    o.data = j.at("data").get<std::string>();
    o.samples = j.at("samples").get<std::size_t>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.bins = j.at("bins").get<std::size_t>();
    o.format = j.at("format").get<std::string>();
    o.scatter_inputs = j.at("scatter_inputs").get<std::size_t>();
    o.sigma2 = optional_from(j.at("sigma2"));
    o.out = j.at("out").get<std::string>();
    return o;
}

json to_json(const TheoryOptions& o) {
    return {{"sigma", o.sigma},     {"in_degree", o.in_degree}, {"out_degree", o.out_degree},
            {"width", o.width},     {"trials", o.trials},       {"seed", o.seed},
            {"significance", o.significance}, {"bins", o.bins}, {"sampling_sigma", optional_json(o.sampling_sigma)},
            {"out", o.out}};
}

TheoryOptions theory_from_json(const json& j) {
    TheoryOptions o;
    o.sigma = j.at("sigma").get<double>();
    o.in_degree = j.at("in_degree").get<std::size_t>();
    o.out_degree = j.at("out_degree").get<std::size_t>();
    o.width = j.at("width").get<std::size_t>();
    o.trials = j.at("trials").get<std::size_t>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.significance = j.at("significance").get<double>();
    o.bins = j.at("bins").get<std::size_t>();
    o.sampling_sigma = optional_from(j.at("sampling_sigma"));
    o.out = j.at("out").get<std::string>();
    return o;
}

json to_json(const CompareOptions& o) { return {{"inputs", o.inputs}, {"out", o.out}}; }

CompareOptions compare_from_json(const json& j) {
    CompareOptions o;
    o.inputs = j.at("inputs").get<std::vector<std::string>>();
    o.out = j.at("out").get<std::string>();
    return o;
}

fs::path output_dir(const std::string& requested, const std::string& fallback_leaf) {
    fs::path dir = requested;
    if (dir.empty()) {
        const char* env = std::getenv(kOutDirEnv);
        if (!env || !*env) throw UsageError("no output directory: pass --out or set " + std::string(kOutDirEnv));
        dir = fs::path(env) / fallback_leaf;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
    return dir;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    const auto bytes = read_file(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.byte, path.string() + " is not valid JSON");
    }
}

void write_config_echo(const fs::path& dir, const std::string& command, const json& options) {
    write_json(dir / "config.json", {{"command", command}, {"options", options}});
}

json gof_json(const GofResult& g) {
    return {{"statistic", g.statistic},   {"p_value", g.p_value}, {"sample_size", g.sample_size},
            {"significance", g.significance}, {"verdict", std::string(to_string(g.verdict))}, {"bins", g.bins}};
}

ReportFormat parse_format(const std::string& name) {
    try {
        return report_format_from_string(name);
    } catch (const ParameterError& e) {
        throw UsageError(e.what());
    }
}

// Pools metric samples across members, keyed by (metric, layer), skipping flagged values.
using Pool = std::map<std::pair<MetricKind, std::size_t>, std::vector<double>>;

void pool_samples(Pool& pool, const std::vector<MetricSample>& samples, std::size_t& flagged) {
    for (const auto& s : samples) {
        if (s.flagged) {
            ++flagged;
            continue;
        }
        pool[{s.metric, s.layer}].push_back(s.value);
    }
}

std::vector<HistogramReport> pool_histograms(const Pool& pool, std::size_t bins, const std::string& population_id) {
    std::vector<HistogramReport> out;
    for (const auto& [key, values] : pool) {
        if (values.empty()) continue;
        auto h = histogram(values, bins);
        h.metric = std::string(to_string(key.first));
        h.layer = key.second;
        h.population_id = population_id;
        out.push_back(std::move(h));
    }
    return out;
}

// Link weights against N(0, sigma^2) and first-layer-onward in-strengths
// against N(0, fan_in sigma^2), pooled over members.
json theory_gof(const std::vector<NetworkSpec>& members, double sigma2) {
    const double sigma = std::sqrt(sigma2);
    json out = json::array();
    if (members.empty()) return out;
    const auto& layers = members.front().layers;
    for (std::size_t g = 0; g < layers.size(); ++g) {
        std::vector<double> weights;
        for (const auto& m : members)
            weights.insert(weights.end(), m.params[g].weights.values().begin(), m.params[g].weights.values().end());
        json entry = {{"quantity", "link_weight"}, {"layer", g}, {"null", "normal"}, {"mean", 0.0},
                      {"variance", sigma2}, {"test", "ks"}};
        if (weights.size() < kMinKsSamples) {
            entry["result"] = nullptr;
            entry["skipped"] = "fewer than " + std::to_string(kMinKsSamples) + " samples";
        } else {
            entry["result"] = gof_json(ks_test(weights, link_weight_null(sigma)));
        }
        out.push_back(std::move(entry));
    }
    for (std::size_t l = 1; l <= layers.size(); ++l) {
        std::vector<double> strengths;
        std::size_t fan_in = 0;
        for (const auto& m : members) {
            const auto graph = lower(m);
            fan_in = graph.layer_size(l - 1);
            for (const auto& s : layer_strengths(graph, l)) strengths.push_back(s.in);
        }
        const auto null = node_strength_null(sigma, fan_in, 0);
        json entry = {{"quantity", "node_in_strength"}, {"layer", l}, {"null", "normal"}, {"mean", 0.0},
                      {"variance", null.variance()}, {"test", "ks"}};
        if (strengths.size() < kMinKsSamples) {
            entry["result"] = nullptr;
            entry["skipped"] = "fewer than " + std::to_string(kMinKsSamples) + " samples";
        } else {
            entry["result"] = gof_json(ks_test(strengths, null));
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::string member_file(const std::string& id) { return id + ".cntw"; }

json layers_json(const std::vector<LayerSpec>& layers) {
    json arr = json::array();
    for (const auto& l : layers) {
        if (l.kind != LayerKind::Dense) throw StructuralError("populations hold dense networks only");
        arr.push_back({{"kind", "dense"}, {"in", l.in_dim}, {"out", l.out_dim},
                       {"activation", std::string(to_string(l.activation))}});
    }
    return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Population directories

void save_population(const fs::path& dir, const PopulationDir& pd) {
    const auto& pop = pd.population;
    json j;
    j["id"] = pop.id;
    j["task"] = std::string(to_string(pop.config.task));
    j["loss"] = std::string(to_string(pop.config.loss));
    j["init_variance"] = pop.config.init_variance;
    j["seed"] = pop.config.seed;
    j["layers"] = layers_json(pop.arch);
    j["training"] = pd.training ? to_json(*pd.training) : json(nullptr);
    json members = json::array();
    for (std::size_t i = 0; i < pop.members.size(); ++i) {
        const auto& m = pop.members[i];
        const auto file = member_file(m.id);
        write_file(dir / file, write_weights(m.spec));
        json mj = {{"id", m.id}, {"seed", m.seed}, {"file", file}, {"trained", m.trained}, {"diverged", m.diverged}};
        mj["test_accuracy"] = m.trained && pop.config.task == Task::Classification ? json(m.test_accuracy) : json(nullptr);
        mj["test_mse"] = m.trained ? json(m.test_mse) : json(nullptr);
        mj["error"] = m.error;
        members.push_back(std::move(mj));
    }
    j["members"] = std::move(members);
    write_json(dir / "population.json", j);
}

PopulationDir load_population(const fs::path& dir) {
    const json j = read_json(dir / "population.json");
    PopulationDir pd;
    try {
        auto& pop = pd.population;
        pop.id = j.at("id").get<std::string>();
        pop.config.task = task_from_string(j.at("task").get<std::string>());
        pop.config.loss = loss_from_string(j.at("loss").get<std::string>());
        pop.config.init_variance = j.at("init_variance").get<double>();
        pop.config.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& l : j.at("layers"))
            pop.arch.push_back(LayerSpec::dense(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                                                activation_from_string(l.at("activation").get<std::string>())));
        if (!j.at("training").is_null()) {
            pd.training = train_from_json(j.at("training"));
            pop.config.epochs = pd.training->epochs;
            pop.config.learning_rate = pd.training->learning_rate;
            pop.config.batch_size = pd.training->batch_size;
        }
        for (const auto& mj : j.at("members")) {
            Member m;
            m.id = mj.at("id").get<std::string>();
            m.seed = mj.at("seed").get<std::uint64_t>();
            m.trained = mj.at("trained").get<bool>();
            m.diverged = mj.at("diverged").get<bool>();
            m.error = mj.at("error").get<std::string>();
            if (!mj.at("test_accuracy").is_null()) m.test_accuracy = mj.at("test_accuracy").get<double>();
            if (!mj.at("test_mse").is_null()) m.test_mse = mj.at("test_mse").get<double>();
            const auto file = mj.at("file").get<std::string>();
            m.spec = read_weights(read_file(dir / file));
            if (m.spec.layers != pop.arch)
                throw StructuralError(file + " does not match the population architecture");
            pd.files.push_back(file);
            pop.members.push_back(std::move(m));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, (dir / "population.json").string() + ": " + e.what());
    }
    return pd;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_init(const InitOptions& o, std::ostream& log) {
    if (!(o.sigma2 > 0.0) || !std::isfinite(o.sigma2)) throw UsageError("--sigma2 must be positive");
    if (o.n == 0) throw UsageError("--n must be at least 1");
    if (o.bins == 0) throw UsageError("--bins must be at least 1");
    const auto format = parse_format(o.format);
    const auto arch = resolve_architecture(o.arch);
    const auto dir = output_dir(o.out, "init");

    TrainConfig config;
    config.task = arch.task;
    config.loss = arch.loss;
    config.init_variance = o.sigma2;
    config.seed = o.seed;
    const std::string id = o.population_id.empty() ? arch.name : o.population_id;

    PopulationDir pd;
    pd.population = make_population(id, arch.layers, config, o.n);
    save_population(dir, pd);

    Pool pool;
    std::size_t flagged = 0;
    std::vector<NetworkSpec> specs;
    for (const auto& m : pd.population.members) {
        pool_samples(pool, collect(m.spec, {}, m.id), flagged);
        specs.push_back(m.spec);
    }
    const auto reports = pool_histograms(pool, o.bins, id);
    emit_report(reports, format, dir / ("initial_report" + std::string(extension(format))));
    write_json(dir / "theory_gof.json", {{"population_id", id},
                                         {"init_variance", o.sigma2},
                                         {"flagged_disparity", flagged},
                                         {"tests", theory_gof(specs, o.sigma2)}});
    write_config_echo(dir, "init", to_json(o));
    log << "initialised " << o.n << " networks (" << arch.name << ") in " << dir.string() << "\n";
}

void cmd_train(const TrainOptions& o, std::ostream& log) {
    if (o.population.empty()) throw UsageError("--population is required");
    if (o.data.empty()) throw UsageError("--data is required");
    if (o.epochs == 0 || o.batch_size == 0) throw UsageError("--epochs and --batch must be positive");
    auto pd = load_population(o.population);
    const auto dir = output_dir(o.out, "train");
    auto& pop = pd.population;
    pop.config.epochs = o.epochs;
    pop.config.learning_rate = o.learning_rate;
    pop.config.batch_size = o.batch_size;

    const auto mnist = load_mnist(fs::path(o.data));
    const Dataset data = pop.config.task == Task::Classification
                             ? make_classification(mnist.images, mnist.labels, pop.arch.back().out_dim)
                             : make_reconstruction(mnist.images);
    const auto splits = split(data, o.train_count, o.test_count, o.split_seed);
    train_population(pop, splits, o.threads);
    pd.training = o;
    save_population(dir, pd);

    std::string curve = "epoch,member,train_loss,test_metric\n";
    for (const auto& m : pop.members)
        for (const auto& r : m.curve)
            curve += std::to_string(r.epoch) + "," + r.member + "," + format_double(r.train_loss) + "," +
                     format_double(r.test_metric) + "\n";
    write_text(dir / "training_curve.csv", curve);
    write_config_echo(dir, "train", to_json(o));

    std::size_t diverged = 0;
    for (const auto& m : pop.members) {
        if (m.diverged) {
            ++diverged;
            log << m.id << ": diverged: " << m.error << "\n";
        } else if (pop.config.task == Task::Classification) {
            log << m.id << ": test accuracy " << m.test_accuracy << "\n";
        } else {
            log << m.id << ": test mse " << m.test_mse << "\n";
        }
    }
    if (diverged == pop.members.size()) throw DivergenceError(o.epochs, 0, "every member diverged");
}

void cmd_analyze(const AnalyzeOptions& o, std::ostream& log) {
    if (o.population.empty()) throw UsageError("--population is required");
    if (o.bins == 0) throw UsageError("--bins must be at least 1");
    const auto format = parse_format(o.format);
    const auto pd = load_population(o.population);
    const auto& pop = pd.population;
    const auto dir = output_dir(o.out, "analyze");

    std::vector<std::vector<double>> inputs;
    json notes = json::array();
    if (o.samples > 0) {
        if (o.data.empty()) throw UsageError("--data is required when --samples > 0");
        const auto mnist = load_mnist(fs::path(o.data));
        if (mnist.images.cols() != pop.arch.front().in_dim)
            throw StructuralError("dataset inputs have " + std::to_string(mnist.images.cols()) +
                                  " features, networks expect " + std::to_string(pop.arch.front().in_dim));
        // Evaluation split: the held-out rows of the training split when known, else everything.
        std::vector<std::size_t> pool(mnist.images.rows());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        if (pd.training) {
            auto engine = make_engine(pd.training->split_seed, 0x5EED);
            std::shuffle(pool.begin(), pool.end(), engine);
            const std::size_t train = std::min(pd.training->train_count, pool.size());
            pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(train));
            if (pd.training->test_count > 0 && pd.training->test_count < pool.size())
                pool.resize(pd.training->test_count);
        }
        if (o.samples > pool.size())
            throw UsageError("--samples " + std::to_string(o.samples) + " exceeds the " +
                             std::to_string(pool.size()) + " available evaluation inputs");
        auto engine = make_engine(o.seed, 0xA7A);
        std::shuffle(pool.begin(), pool.end(), engine);
        for (std::size_t i = 0; i < o.samples; ++i) {
            const auto row = mnist.images.row(pool[i]);
            inputs.emplace_back(row.begin(), row.end());
        }
    } else {
        notes.push_back("no input samples: neuron strength and activation are absent");
    }

    Pool metric_pool;
    std::size_t flagged = 0;
    std::vector<NetworkSpec> specs;
    std::string scatter = "population_id,network_id,layer,node,input_sample,node_strength,neuron_strength,neuron_activation\n";
    for (const auto& m : pop.members) {
        const auto samples = collect(m.spec, inputs, m.id);
        pool_samples(metric_pool, samples, flagged);
        specs.push_back(m.spec);

        const auto graph = lower(m.spec);
        const std::size_t scatter_n = std::min(o.scatter_inputs, inputs.size());
        for (std::size_t s = 0; s < scatter_n; ++s) {
            const auto trace = forward_unchecked(inputs[s], m.spec);
            for (std::size_t l = 0; l < m.spec.layers.size(); ++l) {
                const auto strengths = layer_strengths(graph, l + 1);
                for (std::size_t k = 0; k < strengths.size(); ++k)
                    scatter += pop.id + "," + m.id + "," + std::to_string(l + 1) + "," + std::to_string(k) + "," +
                               std::to_string(s) + "," + format_double(strengths[k].total) + "," +
                               format_double(trace.pre_activation[l][k]) + "," +
                               format_double(trace.activation[l][k]) + "\n";
            }
        }
    }
    if (flagged > 0) notes.push_back(std::to_string(flagged) + " node disparities were ill-conditioned and skipped");

    const auto reports = pool_histograms(metric_pool, o.bins, pop.id);
    emit_report(reports, format, dir / ("report" + std::string(extension(format))));
    if (format != ReportFormat::JSON) emit_report(reports, ReportFormat::JSON, dir / "report.json");
    write_text(dir / "scatter.csv", scatter);

    json metrics = json::array();
    for (const auto& r : reports)
        metrics.push_back({{"metric", r.metric},          {"layer", *r.layer},          {"mean", r.summary.mean},
                           {"variance", r.summary.variance}, {"min", r.summary.min},     {"max", r.summary.max},
                           {"count", r.summary.count}});

    std::size_t trained = 0;
    double acc = 0.0, mse = 0.0;
    for (const auto& m : pop.members) {
        if (!m.trained) continue;
        ++trained;
        acc += m.test_accuracy;
        mse += m.test_mse;
    }
    json summary;
    summary["population_id"] = pop.id;
    summary["task"] = std::string(to_string(pop.config.task));
    summary["members"] = pop.members.size();
    summary["trained_members"] = trained;
    summary["mean_accuracy"] =
        trained > 0 && pop.config.task == Task::Classification ? json(acc / static_cast<double>(trained)) : json(nullptr);
    summary["mean_test_mse"] = trained > 0 ? json(mse / static_cast<double>(trained)) : json(nullptr);
    summary["input_samples"] = inputs.size();
    summary["input_dependent_metrics"] = !inputs.empty();
    summary["flagged_disparity"] = flagged;
    summary["notes"] = notes;
    summary["metrics"] = metrics;
    const double sigma2 = o.sigma2.value_or(pop.config.init_variance);
    summary["gof"] = {{"init_variance", sigma2}, {"tests", theory_gof(specs, sigma2)}};
    write_json(dir / "summary.json", summary);
    write_config_echo(dir, "analyze", to_json(o));
    log << "analysed " << pop.members.size() << " networks over " << inputs.size() << " inputs into " << dir.string()
        << "\n";
}

std::string cmd_theory_check(const TheoryOptions& o, std::ostream& log) {
    MonteCarloConfig c;
    c.sigma = o.sigma;
    c.in_degree = o.in_degree;
    c.out_degree = o.out_degree;
    c.layer_width = o.width;
    c.trials = o.trials;
    c.seed = o.seed;
    c.significance = o.significance;
    c.bins = o.bins;
    c.sampling_sigma = o.sampling_sigma;
    const auto r = monte_carlo_check(c);

    json j;
    j["sigma"] = o.sigma;
    j["sampling_sigma"] = o.sampling_sigma.value_or(o.sigma);
    j["in_degree"] = o.in_degree;
    j["out_degree"] = o.out_degree;
    j["layer_width"] = r.layer_width;
    j["trials"] = o.trials;
    j["seed"] = o.seed;
    j["in_strength"] = gof_json(r.in_strength);
    j["fluctuation"] = gof_json(r.fluctuation);
    j["total_strength"] = gof_json(r.total_strength);
    j["in_strength_mean"] = r.in_strength_mean;
    j["in_strength_variance"] = r.in_strength_variance;
    j["expected_in_strength_variance"] = static_cast<double>(o.in_degree) * o.sigma * o.sigma;
    j["fluctuation_sq_mean"] = r.fluctuation_sq_mean;
    const std::string text = j.dump(2) + "\n";
    if (!o.out.empty()) {
        const fs::path path(o.out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_text(path, text);
        write_config_echo(path.has_parent_path() ? path.parent_path() : fs::path("."), "theory-check", to_json(o));
    }
    log << text;
    return text;
}

void cmd_compare(const CompareOptions& o, std::ostream& log) {
    if (o.inputs.size() < 2) throw UsageError("compare needs at least two analysis directories");
    const auto dir = output_dir(o.out, "compare");

    struct Side {
        std::string label;
        json summary;
        std::vector<HistogramReport> reports;
    };
    std::vector<Side> sides;
    for (std::size_t i = 0; i < o.inputs.size(); ++i) {
        Side s;
        s.summary = read_json(fs::path(o.inputs[i]) / "summary.json");
        s.reports = reports_from_json([&] {
            const auto bytes = read_file(fs::path(o.inputs[i]) / "report.json");
            return std::string(bytes.begin(), bytes.end());
        }());
        s.label = std::to_string(i) + ":" + s.summary.at("population_id").get<std::string>();
        sides.push_back(std::move(s));
    }

    auto kinds = [](const Side& s) {
        std::set<std::string> k;
        for (const auto& r : s.reports) k.insert(r.metric);
        return k;
    };
    const auto reference = kinds(sides.front());
    for (const auto& s : sides)
        if (kinds(s) != reference)
            throw UsageError("metric sets differ between " + sides.front().label + " and " + s.label);

    std::map<std::pair<std::string, std::size_t>, std::vector<const HistogramReport*>> rows;
    for (std::size_t i = 0; i < sides.size(); ++i)
        for (const auto& r : sides[i].reports) {
            auto& slot = rows[{r.metric, r.layer.value_or(0)}];
            slot.resize(sides.size(), nullptr);
            slot[i] = &r;
        }

    std::string csv = "metric,layer,population,task,accuracy,mean,variance,min,max,count,delta_mean,delta_variance\n";
    json jrows = json::array();
    for (const auto& [key, reps] : rows) {
        json entry;
        entry["metric"] = key.first;
        entry["layer"] = key.second;
        json cols = json::array();
        const HistogramReport* base = reps.front();
        for (std::size_t i = 0; i < sides.size(); ++i) {
            const auto& side = sides[i];
            const auto* r = reps[i];
            const json& acc = side.summary.at("mean_accuracy");
            const std::string task = side.summary.at("task").get<std::string>();
            json col = {{"population", side.label}, {"task", task}, {"accuracy", acc}};
            if (r) {
                const double dm = base ? r->summary.mean - base->summary.mean : 0.0;
                const double dv = base ? r->summary.variance - base->summary.variance : 0.0;
                col["mean"] = r->summary.mean;
                col["variance"] = r->summary.variance;
                col["min"] = r->summary.min;
                col["max"] = r->summary.max;
                col["count"] = r->summary.count;
                col["delta_mean"] = dm;
                col["delta_variance"] = dv;
                col["edges"] = r->edges;
                col["counts"] = r->counts;
                csv += key.first + "," + std::to_string(key.second) + "," + side.label + "," + task + "," +
                       (acc.is_null() ? std::string() : format_double(acc.get<double>())) + "," +
                       format_double(r->summary.mean) + "," + format_double(r->summary.variance) + "," +
                       format_double(r->summary.min) + "," + format_double(r->summary.max) + "," +
                       std::to_string(r->summary.count) + "," + format_double(dm) + "," + format_double(dv) + "\n";
            } else {
                col["mean"] = nullptr;
            }
            cols.push_back(std::move(col));
        }
        entry["populations"] = std::move(cols);
        jrows.push_back(std::move(entry));
    }

    json populations = json::array();
    for (const auto& s : sides)
        populations.push_back({{"population", s.label},
                               {"task", s.summary.at("task")},
                               {"accuracy", s.summary.at("mean_accuracy")},
                               {"test_mse", s.summary.at("mean_test_mse")}});
    write_text(dir / "comparison.csv", csv);
    write_json(dir / "comparison.json", {{"populations", populations}, {"rows", jrows}});
    write_config_echo(dir, "compare", to_json(o));
    for (const auto& s : sides) {
        log << s.label << " (" << s.summary.at("task").get<std::string>() << ")";
        if (!s.summary.at("mean_accuracy").is_null()) log << " accuracy " << s.summary.at("mean_accuracy").get<double>();
        log << "\n";
    }
}

void cmd_replay(const fs::path& config, const std::string& out, std::ostream& log) {
    const json j = read_json(config);
    try {
        const auto command = j.at("command").get<std::string>();
        const auto& opts = j.at("options");
        if (command == "init") {
            auto o = init_from_json(opts);
            if (!out.empty()) o.out = out;
            cmd_init(o, log);
        } else if (command == "train") {
            auto o = train_from_json(opts);
            if (!out.empty()) o.out = out;
            cmd_train(o, log);
        } else if (command == "analyze") {
            auto o = analyze_from_json(opts);
            if (!out.empty()) o.out = out;
            cmd_analyze(o, log);
        } else if (command == "theory-check") {
            auto o = theory_from_json(opts);
            if (!out.empty()) o.out = (fs::path(out) / "theory_check.json").string();
            cmd_theory_check(o, log);
        } else if (command == "compare") {
            auto o = compare_from_json(opts);
            if (!out.empty()) o.out = out;
            cmd_compare(o, log);
        } else {
            throw UsageError("config echo names unknown command '" + command + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, config.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Argument parsing

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Usage:
        case ErrorCategory::Structural:
        case ErrorCategory::Parameter: return kExitUsage;
        case ErrorCategory::Parse:
        case ErrorCategory::Io: return kExitIo;
        case ErrorCategory::Numeric: return kExitNumeric;
    }
    return kExitUsage;
}

void add_arch_options(CLI::App* cmd, ArchOptions& a) {
    cmd->add_option("--arch", a.arch, "fc (classification) or ae (reconstruction)")->capture_default_str();
    cmd->add_option("--depth", a.depth, "hidden layers: 3 or 7")->capture_default_str();
    cmd->add_option("--act", a.activation, "hidden activation: linear, relu, sigmoid")->capture_default_str();
    cmd->add_option("--output-act", a.output_activation, "output activation (default softmax for fc, sigmoid for ae)");
    cmd->add_option("--preset", a.preset, "fc3, fc7, ae3, ae7, small, medium, big");
    cmd->add_option("--layers", a.layers, "explicit widths, e.g. 784,64,10")->delimiter(',');
    cmd->add_option("--input-dim", a.input_dim)->capture_default_str();
    cmd->add_option("--classes", a.classes)->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"cntnet: neural networks as complex networks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cntnet 1.0");

    InitOptions init;
    auto* c_init = app.add_subcommand("init", "create a Gaussian-initialised population");
    add_arch_options(c_init, init.arch);
    c_init->add_option("--sigma2", init.sigma2, "initialisation variance")->capture_default_str();
    c_init->add_option("--n", init.n, "population size")->capture_default_str();
    c_init->add_option("--seed", init.seed)->capture_default_str();
    c_init->add_option("--population-id", init.population_id);
    c_init->add_option("--format", init.format, "csv or json")->capture_default_str();
    c_init->add_option("--bins", init.bins)->capture_default_str();
    c_init->add_option("--out", init.out, "output directory");

    TrainOptions train;
    auto* c_train = app.add_subcommand("train", "train every member of a population");
    c_train->add_option("--population", train.population)->required();
    c_train->add_option("--data", train.data, "directory with an images/labels IDX pair")->required();
    c_train->add_option("--train-count", train.train_count)->capture_default_str();
    c_train->add_option("--test-count", train.test_count)->capture_default_str();
    c_train->add_option("--split-seed", train.split_seed)->capture_default_str();
    c_train->add_option("--epochs", train.epochs)->capture_default_str();
    c_train->add_option("--lr", train.learning_rate)->capture_default_str();
    c_train->add_option("--batch", train.batch_size)->capture_default_str();
    c_train->add_option("--threads", train.threads, "0 = all cores")->capture_default_str();
    c_train->add_option("--out", train.out);

    AnalyzeOptions analyze;
    double analyze_sigma2 = 0.0;
    auto* c_analyze = app.add_subcommand("analyze", "compute metric histograms for a population");
    c_analyze->add_option("--population", analyze.population)->required();
    c_analyze->add_option("--data", analyze.data);
    c_analyze->add_option("--samples", analyze.samples, "inputs drawn from the evaluation split")->capture_default_str();
    c_analyze->add_option("--seed", analyze.seed)->capture_default_str();
    c_analyze->add_option("--bins", analyze.bins)->capture_default_str();
    c_analyze->add_option("--format", analyze.format)->capture_default_str();
    c_analyze->add_option("--scatter-inputs", analyze.scatter_inputs)->capture_default_str();
    auto* o_sigma2 = c_analyze->add_option("--sigma2", analyze_sigma2, "null variance (default: init variance)");
    c_analyze->add_option("--out", analyze.out);

    TheoryOptions theory;
    double sampling_sigma = 0.0;
    auto* c_theory = app.add_subcommand("theory-check", "Monte Carlo check of the untrained-network nulls");
    c_theory->add_option("--sigma", theory.sigma)->capture_default_str();
    c_theory->add_option("--in-degree", theory.in_degree)->capture_default_str();
    c_theory->add_option("--out-degree", theory.out_degree)->capture_default_str();
    c_theory->add_option("--width", theory.width, "nodes per layer (0 = in-degree)")->capture_default_str();
    c_theory->add_option("--trials", theory.trials)->capture_default_str();
    c_theory->add_option("--seed", theory.seed)->capture_default_str();
    c_theory->add_option("--significance", theory.significance)->capture_default_str();
    c_theory->add_option("--bins", theory.bins)->capture_default_str();
    auto* o_sampling = c_theory->add_option("--sampling-sigma", sampling_sigma, "draw weights with this sigma instead");
    c_theory->add_option("--out", theory.out, "write the JSON report to this file");

    CompareOptions compare;
    auto* c_compare = app.add_subcommand("compare", "compare analysed populations side by side");
    c_compare->add_option("inputs", compare.inputs, "analyze output directories")->required();
    c_compare->add_option("--out", compare.out);

    std::string replay_config, replay_out;
    auto* c_replay = app.add_subcommand("replay", "re-run a command from its config.json echo");
    c_replay->add_option("config", replay_config)->required();
    c_replay->add_option("--out", replay_out, "override the output location");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "cntnet 1.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error[usage]: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (c_init->parsed()) cmd_init(init, out);
        else if (c_train->parsed()) cmd_train(train, out);
        else if (c_analyze->parsed()) {
            if (o_sigma2->count() > 0) analyze.sigma2 = analyze_sigma2;
            cmd_analyze(analyze, out);
        } else if (c_theory->parsed()) {
            if (o_sampling->count() > 0) theory.sampling_sigma = sampling_sigma;
            cmd_theory_check(theory, out);
        } else if (c_compare->parsed()) cmd_compare(compare, out);
        else if (c_replay->parsed()) cmd_replay(replay_config, replay_out, out);
    } catch (const Error& e) {
        err << "error[" << to_string(e.category()) << "]: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const fs::filesystem_error& e) {
        err << "error[io]: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"cntnet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cntnet::cli
