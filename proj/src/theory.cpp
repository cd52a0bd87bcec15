#include "cntnet/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cntnet/errors.hpp"
#include "cntnet/metrics.hpp"
#include "cntnet/rng.hpp"

namespace cntnet {

NullDistribution NullDistribution::normal(double mean, double variance) {
    if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean))
        throw ParameterError("normal null needs a finite mean and a positive variance");
    return {Family::Normal, mean, variance};
}

NullDistribution NullDistribution::scaled_chi_squared(double dof, double scale) {
    if (!(dof >= 1.0) || !(scale > 0.0) || !std::isfinite(dof) || !std::isfinite(scale))
        throw ParameterError("scaled chi-squared null needs dof >= 1 and a positive scale");
    return {Family::ScaledChiSquared, dof, scale};
}

double NullDistribution::cdf(double x) const {
    if (std::isnan(x)) throw ParameterError("cdf of NaN");
    switch (family_) {
        case Family::Normal: return 0.5 * std::erfc(-(x - a_) / std::sqrt(2.0 * b_));
        case Family::ScaledChiSquared:
            if (x <= 0.0) return 0.0;
            if (std::isinf(x)) return 1.0;
            return boost::math::gamma_p(a_ / 2.0, x / (2.0 * b_));
    }
    return 0.0;
}

double NullDistribution::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("quantile needs p in (0, 1)");
    switch (family_) {
        case Family::Normal: return a_ - std::sqrt(2.0 * b_) * boost::math::erfc_inv(2.0 * p);
        case Family::ScaledChiSquared: return 2.0 * b_ * boost::math::gamma_p_inv(a_ / 2.0, p);
    }
    return 0.0;
}

double NullDistribution::mean() const { return family_ == Family::Normal ? a_ : a_ * b_; }

double NullDistribution::variance() const { return family_ == Family::Normal ? b_ : 2.0 * a_ * b_ * b_; }

std::string_view to_string(NullDistribution::Family family) {
    return family == NullDistribution::Family::Normal ? "normal" : "scaled_chi_squared";
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::Consistent ? "consistent" : "rejected"; }

NullDistribution link_weight_null(double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
    return NullDistribution::normal(0.0, sigma * sigma);
}

NullDistribution node_strength_null(double sigma, std::size_t in_degree, std::size_t out_degree) {
    if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
    const std::size_t k = in_degree + out_degree;
    if (k == 0) throw ParameterError("node strength null needs at least one incident link");
    return NullDistribution::normal(0.0, static_cast<double>(k) * sigma * sigma);
}

NullDistribution fluctuation_null(std::size_t n, double strength_variance) {
    if (n < 2) throw ParameterError("fluctuation needs at least 2 nodes per layer, got " + std::to_string(n));
    if (!(strength_variance > 0.0)) throw ParameterError("strength variance must be positive");
    return NullDistribution::scaled_chi_squared(static_cast<double>(n - 1), strength_variance / static_cast<double>(n));
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw ParameterError("KS statistic of an empty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double kolmogorov_survival(double lambda) {
    constexpr double tol = 1e-10;
    if (!(lambda > 0.0)) return 1.0;
    double q;
    if (lambda < 1.18) {
        // P(K <= l) = sqrt(2 pi) / l * sum_k exp(-(2k-1)^2 pi^2 / (8 l^2)); converges fast for small l.
        const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double sum = 0.0;
        for (int k = 1; k < 1000; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(-odd * odd * c);
            sum += term;
            if (term < tol) break;
        }
        q = 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    } else {
        double sum = 0.0;
        for (int k = 1; k < 1000; ++k) {
            const double term = std::exp(-2.0 * k * k * lambda * lambda);
            sum += (k % 2 == 1) ? term : -term;
            if (term < tol) break;
        }
        q = 2.0 * sum;
    }
    return std::clamp(q, 0.0, 1.0);
}

namespace {

Verdict decide(double p, double significance) { return p < significance ? Verdict::Rejected : Verdict::Consistent; }

void check_significance(double significance) {
    if (!(significance > 0.0 && significance < 1.0)) throw ParameterError("significance must lie in (0, 1)");
}

void check_finite(std::span<const double> samples) {
    for (double x : samples)
        if (!std::isfinite(x)) throw ParameterError("goodness-of-fit samples must be finite");
}

}  // namespace

GofResult ks_test(std::span<const double> samples, const NullDistribution& null, double significance) {
    check_significance(significance);
    if (samples.size() < kMinKsSamples)
        throw ParameterError("KS test needs at least " + std::to_string(kMinKsSamples) + " samples, got " +
                             std::to_string(samples.size()));
    check_finite(samples);
    GofResult r;
    r.sample_size = samples.size();
    r.significance = significance;
    r.statistic = ks_statistic(samples, [&](double x) { return null.cdf(x); });
    r.p_value = kolmogorov_survival(std::sqrt(static_cast<double>(samples.size())) * r.statistic);
    r.verdict = decide(r.p_value, significance);
    return r;
}

GofResult chi2_gof(std::span<const double> samples, const NullDistribution& null, std::size_t bins,
                   double significance) {
    check_significance(significance);
    check_finite(samples);
    const std::size_t n = samples.size();
    const std::size_t max_bins = n / 5;
    const std::size_t used = std::min(bins, max_bins);
    if (used < 2)
        throw ParameterError("chi-squared test cannot form 2 bins with >= 5 expected counts from " +
                             std::to_string(n) + " samples and " + std::to_string(bins) + " requested bins");

    std::vector<std::size_t> counts(used, 0);
    for (double x : samples) {
        const double u = null.cdf(x);
        auto b = static_cast<std::size_t>(u * static_cast<double>(used));
        counts[std::min(b, used - 1)] += 1;
    }
    const double expected = static_cast<double>(n) / static_cast<double>(used);
    double stat = 0.0;
    for (std::size_t c : counts) {
        const double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    GofResult r;
    r.statistic = stat;
    r.sample_size = n;
    r.significance = significance;
    r.bins = used;
    r.p_value = std::clamp(boost::math::gamma_q((static_cast<double>(used) - 1.0) / 2.0, stat / 2.0), 0.0, 1.0);
    r.verdict = decide(r.p_value, significance);
    return r;
}

std::vector<double> sample_in_strengths(double sigma, std::size_t in_degree, std::size_t count, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
    auto engine = make_engine(seed);
    std::normal_distribution<double> weight(0.0, sigma);
    std::vector<double> out(count);
    for (auto& s : out) {
        double acc = 0.0;
        for (std::size_t i = 0; i < in_degree; ++i) acc += weight(engine);
        s = acc;
    }
    return out;
}

MonteCarloReport monte_carlo_check(const MonteCarloConfig& config) {
    if (!(config.sigma > 0.0)) throw ParameterError("sigma must be positive");
    if (config.sampling_sigma && !(*config.sampling_sigma > 0.0)) throw ParameterError("sampling sigma must be positive");
    if (config.trials < kMinMonteCarloTrials)
        throw ParameterError("monte carlo check needs at least " + std::to_string(kMinMonteCarloTrials) +
                             " trials, got " + std::to_string(config.trials));
    if (config.in_degree == 0) throw ParameterError("in-degree must be at least 1");
    const std::size_t width = config.layer_width == 0 ? config.in_degree : config.layer_width;
    const double strength_var = static_cast<double>(config.in_degree) * config.sigma * config.sigma;
    const auto fluct_null = fluctuation_null(width, strength_var);
    const double draw_sigma = config.sampling_sigma.value_or(config.sigma);

    std::vector<double> in_strengths;
    std::vector<double> totals;
    std::vector<double> fluct_sq;
    in_strengths.reserve(config.trials * width);
    totals.reserve(config.trials * width);
    fluct_sq.reserve(config.trials);

    std::vector<double> layer_in(width);
    for (std::size_t t = 0; t < config.trials; ++t) {
        auto engine = make_engine(config.seed, t);
        std::normal_distribution<double> weight(0.0, draw_sigma);
        // Incoming matrix is I x width: column k feeds node k.
        std::fill(layer_in.begin(), layer_in.end(), 0.0);
        for (std::size_t i = 0; i < config.in_degree; ++i)
            for (std::size_t k = 0; k < width; ++k) layer_in[k] += weight(engine);
        for (std::size_t k = 0; k < width; ++k) {
            double out = 0.0;
            for (std::size_t j = 0; j < config.out_degree; ++j) out += weight(engine);
            in_strengths.push_back(layer_in[k]);
            totals.push_back(layer_in[k] + out);
        }
        const double y = fluctuation(layer_in);
        fluct_sq.push_back(y * y);
    }

    MonteCarloReport report;
    report.layer_width = width;
    report.in_strength = ks_test(in_strengths, NullDistribution::normal(0.0, strength_var), config.significance);
    report.fluctuation = chi2_gof(fluct_sq, fluct_null, config.bins, config.significance);
    report.total_strength = ks_test(totals, node_strength_null(config.sigma, config.in_degree, config.out_degree),
                                    config.significance);

    double mean = 0.0;
    for (double s : in_strengths) mean += s;
    mean /= static_cast<double>(in_strengths.size());
    double var = 0.0;
    for (double s : in_strengths) var += (s - mean) * (s - mean);
    report.in_strength_mean = mean;
    report.in_strength_variance = var / static_cast<double>(in_strengths.size());
    double fm = 0.0;
    for (double f : fluct_sq) fm += f;
    report.fluctuation_sq_mean = fm / static_cast<double>(fluct_sq.size());
    return report;
}

}  // namespace cntnet
