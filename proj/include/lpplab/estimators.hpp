/*
   Copyright 2026 The lpplab Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include "lpplab/errors.hpp"
#include "lpplab/random_source.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lpplab {

struct TwoTimeSample;

/// Streaming moments of one scalar (Welford / Chan).
class ScalarMoments {
public:
    void add(double x);
    void merge(const ScalarMoments& other);

    std::int64_t count() const { return n_; }
    double mean() const { return mean_; }
    double m2() const { return m2_; }
    /// Unbiased; throws StateError below two samples.
    double variance() const;
    double std_error() const;

private:
    std::int64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Co-moments of (l_tau, l_1) and of d = l_1 - l_tau. Accumulators carry a
/// tag naming the observable; merging different tags is a domain error.
class MomentAccumulator {
public:
    MomentAccumulator() = default;
    explicit MomentAccumulator(std::string tag) : tag_(std::move(tag)) {}

    void update(double l_tau, double l_1);
    void update(const TwoTimeSample& s);
    void merge(const MomentAccumulator& other);

    const std::string& tag() const { return tag_; }
    std::int64_t count() const { return n_; }
    double mean_tau() const { return mean_tau_; }
    double mean_1() const { return mean_1_; }
    double mean_diff() const { return mean_d_; }
    double m2_tau() const { return m2_tau_; }
    double m2_1() const { return m2_1_; }
    double m11() const { return m11_; }
    double m2_diff() const { return m2_d_; }

    /// Unbiased (n - 1) estimates; throw StateError below two samples.
    double var_tau() const;
    double var_1() const;
    double cov() const;
    double var_diff() const;

private:
    double denominator() const;

    std::string tag_;
    std::int64_t n_ = 0;
    double mean_tau_ = 0.0;
    double mean_1_ = 0.0;
    double mean_d_ = 0.0;
    double m2_tau_ = 0.0;
    double m2_1_ = 0.0;
    double m11_ = 0.0;
    double m2_d_ = 0.0;
};

MomentAccumulator acc_merge(MomentAccumulator a, const MomentAccumulator& b);

/// cov - (var_tau / 2 + var_1 / 2 - var_diff / 2).
double cov_identity_residual(const MomentAccumulator& acc);
/// Magnitude the residual is compared against: the largest of the four
/// second-moment estimates.
double cov_identity_scale(const MomentAccumulator& acc);

struct EstimateWithCI {
    double point = 0.0;
    double se = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double confidence = 0.95;
    std::string method;
};

/// Two-sided standard normal quantile for the given central confidence.
double normal_z(double confidence);
EstimateWithCI normal_ci(double point, double se, double confidence);

namespace detail {
/// Unbiased index in [0, n) from counter (b, k) under `seed`.
inline std::size_t resample_index(std::uint64_t seed, std::uint64_t b, std::uint64_t k, std::size_t n)
{
    const auto r = threefry2x64(b, k, seed, 0x626f6f7473747261ULL);
    return static_cast<std::size_t>((static_cast<unsigned __int128>(r[0]) * n) >> 64);
}
double type7_quantile(std::span<const double> sorted, double p);
} // namespace detail

/// Percentile bootstrap: `resamples` resamples drawn from a counter-based
/// stream, so the interval depends only on (samples, seed). The reported
/// interval is widened to contain the point estimate if needed.
template <class T>
EstimateWithCI bootstrap_ci(std::span<const T> samples, const std::function<double(std::span<const T>)>& statistic,
                            int resamples, double confidence, std::uint64_t seed)
{
    if (samples.empty())
        throw StateError("bootstrap_ci: no samples");
    if (resamples < 200)
        throw std::invalid_argument("bootstrap_ci: at least 200 resamples are required");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("bootstrap_ci: confidence must lie in (0, 1)");

    EstimateWithCI est;
    est.point = statistic(samples);
    est.confidence = confidence;
    est.method = "percentile-bootstrap B=" + std::to_string(resamples);

    const std::size_t n = samples.size();
    std::vector<T> draw(n);
    std::vector<double> stats(static_cast<std::size_t>(resamples));
    ScalarMoments spread;
    for (int b = 0; b < resamples; ++b) {
        for (std::size_t k = 0; k < n; ++k)
            draw[k] = samples[detail::resample_index(seed, static_cast<std::uint64_t>(b), k, n)];
        stats[static_cast<std::size_t>(b)] = statistic(std::span<const T>(draw));
        spread.add(stats[static_cast<std::size_t>(b)]);
    }
    std::sort(stats.begin(), stats.end());
    est.se = std::sqrt(spread.variance());
    est.lo = std::min(est.point, detail::type7_quantile(stats, (1.0 - confidence) / 2.0));
    est.hi = std::max(est.point, detail::type7_quantile(stats, (1.0 + confidence) / 2.0));
    return est;
}

/// sup_x |F_n(x) - F(x)|, with both one-sided gaps checked at every jump.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);
/// Asymptotic Kolmogorov p-value with Stephens' finite-n correction.
double ks_pvalue(double d, std::size_t n);
/// Per-test level that keeps the family-wise level `alpha` over m tests.
double sidak_level(double alpha, int m);

double lag1_autocorrelation(std::span<const double> xs);

/// Exceedance counts #{x > threshold} on a fixed ascending grid.
class TailHistogram {
public:
    explicit TailHistogram(std::vector<double> thresholds);

    void add(double x);
    void merge(const TailHistogram& other);

    const std::vector<double>& thresholds() const { return thresholds_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    std::int64_t total() const { return total_; }
    double fraction(std::size_t k) const;

private:
    std::vector<double> thresholds_;
    std::vector<std::int64_t> counts_;
    std::int64_t total_ = 0;
};

/// Throws std::domain_error when `threshold` is not a grid value.
double tail_fraction(const TailHistogram& hist, double threshold);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};

/// Least squares of log y on log x.
SlopeFit loglog_slope(std::span<const std::pair<double, double>> points);

} // namespace lpplab
