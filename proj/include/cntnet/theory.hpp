#pragma once

// Analytic null distributions of the metrics of untrained Gaussian-initialised
// networks, plus the goodness-of-fit machinery used to test them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace cntnet {

class NullDistribution {
public:
    enum class Family { Normal, ScaledChiSquared };

    static NullDistribution normal(double mean, double variance);
    /// scale * X with X ~ chi^2(dof).
    static NullDistribution scaled_chi_squared(double dof, double scale);

    Family family() const noexcept { return family_; }
    // Normal: (mean, variance). ScaledChiSquared: (dof, scale).
    double first() const noexcept { return a_; }
    double second() const noexcept { return b_; }

    double cdf(double x) const;
    double quantile(double p) const;
    double mean() const;
    double variance() const;

private:
    NullDistribution(Family f, double a, double b) : family_(f), a_(a), b_(b) {}

    Family family_;
    double a_;
    double b_;
};

std::string_view to_string(NullDistribution::Family family);

enum class Verdict { Consistent, Rejected };

std::string_view to_string(Verdict verdict);

struct GofResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t sample_size = 0;
    double significance = 0.01;
    Verdict verdict = Verdict::Consistent;
    std::size_t bins = 0;  // chi-squared test only
};

inline constexpr double kDefaultSignificance = 0.01;

/// Link weights w ~ N(0, sigma^2).
NullDistribution link_weight_null(double sigma);

/// Node strength with I incoming and J outgoing links: N(0, (I + J) sigma^2).
NullDistribution node_strength_null(double sigma, std::size_t in_degree, std::size_t out_degree);

/// Squared fluctuation Y^2 of n i.i.d. strengths of common variance v:
/// n Y^2 / v ~ chi^2(n - 1), i.e. Y^2 ~ (v / n) chi^2(n - 1).
NullDistribution fluctuation_null(std::size_t n, double strength_variance);

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
/// `samples` and `cdf`.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

/// P(K > lambda) for the limiting Kolmogorov distribution.
double kolmogorov_survival(double lambda);

inline constexpr std::size_t kMinKsSamples = 8;

/// KS test with the asymptotic p-value at lambda = sqrt(n) * D.
GofResult ks_test(std::span<const double> samples, const NullDistribution& null,
                  double significance = kDefaultSignificance);

/// Pearson chi-squared test on `bins` bins that are equiprobable under the
/// null. Bins are merged (their count reduced) until every expected count is
/// at least 5; fewer than 2 bins is an error.
GofResult chi2_gof(std::span<const double> samples, const NullDistribution& null, std::size_t bins,
                   double significance = kDefaultSignificance);

struct MonteCarloConfig {
    double sigma = 0.1;            // declared weight standard deviation
    std::size_t in_degree = 32;    // I
    std::size_t out_degree = 0;    // J
    std::size_t layer_width = 0;   // nodes per sampled layer; 0 means I
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    double significance = kDefaultSignificance;
    std::size_t bins = 20;
    std::optional<double> sampling_sigma;  // draw with a different sigma (power checks)
};

inline constexpr std::size_t kMinMonteCarloTrials = 100;

struct MonteCarloReport {
    GofResult in_strength;      // KS vs N(0, I sigma^2)
    GofResult fluctuation;      // chi-squared vs fluctuation_null(n, I sigma^2)
    GofResult total_strength;   // KS vs node_strength_null(sigma, I, J)
    std::size_t layer_width = 0;
    double in_strength_mean = 0.0;
    double in_strength_variance = 0.0;
    double fluctuation_sq_mean = 0.0;
};

/// Samples `trials` untrained layers and tests their in-strengths and
/// squared fluctuations against the analytic nulls.
MonteCarloReport monte_carlo_check(const MonteCarloConfig& config);

/// In-strengths of `count` independent nodes with `in_degree` N(0, sigma^2)
/// incoming weights each.
std::vector<double> sample_in_strengths(double sigma, std::size_t in_degree, std::size_t count, std::uint64_t seed);

}  // namespace cntnet
