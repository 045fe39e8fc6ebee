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

#include "lpplab/estimators.hpp"

#include "lpplab/observables.hpp"

#include <boost/math/distributions/normal.hpp>

#include <numeric>
#include <sstream>

namespace lpplab {

// --- ScalarMoments ------------------------------------------------------

void ScalarMoments::add(double x)
{
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
}

void ScalarMoments::merge(const ScalarMoments& o)
{
    if (o.n_ == 0)
        return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double d = o.mean_ - mean_;
    mean_ += d * nb / n;
    m2_ += o.m2_ + d * d * na * nb / n;
    n_ += o.n_;
}

double ScalarMoments::variance() const
{
    if (n_ < 2)
        throw StateError("variance needs at least two samples");
    return m2_ / static_cast<double>(n_ - 1);
}

double ScalarMoments::std_error() const { return std::sqrt(variance() / static_cast<double>(n_)); }

// --- MomentAccumulator --------------------------------------------------

void MomentAccumulator::update(double l_tau, double l_1)
{
    ++n_;
    const double n = static_cast<double>(n_);
    const double dx = l_tau - mean_tau_;
    const double dy = l_1 - mean_1_;
    mean_tau_ += dx / n;
    mean_1_ += dy / n;
    m2_tau_ += dx * (l_tau - mean_tau_);
    m2_1_ += dy * (l_1 - mean_1_);
    m11_ += dx * (l_1 - mean_1_);
    const double d = l_1 - l_tau;
    const double dd = d - mean_d_;
    mean_d_ += dd / n;
    m2_d_ += dd * (d - mean_d_);
}

void MomentAccumulator::update(const TwoTimeSample& s) { update(s.l_tau, s.l_1); }

void MomentAccumulator::merge(const MomentAccumulator& o)
{
    if (!tag_.empty() && !o.tag_.empty() && tag_ != o.tag_)
        throw std::domain_error("cannot merge accumulators of different observables: '" + tag_ + "' and '" +
                                o.tag_ + "'");
    if (tag_.empty())
        tag_ = o.tag_;
    if (o.n_ == 0)
        return;
    if (n_ == 0) {
        const std::string tag = tag_;
        *this = o;
        tag_ = tag;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double w = na * nb / n;
    const double dx = o.mean_tau_ - mean_tau_;
    const double dy = o.mean_1_ - mean_1_;
    const double dd = o.mean_d_ - mean_d_;
    mean_tau_ += dx * nb / n;
    mean_1_ += dy * nb / n;
    mean_d_ += dd * nb / n;
    m2_tau_ += o.m2_tau_ + dx * dx * w;
    m2_1_ += o.m2_1_ + dy * dy * w;
    m11_ += o.m11_ + dx * dy * w;
    m2_d_ += o.m2_d_ + dd * dd * w;
    n_ += o.n_;
}

double MomentAccumulator::denominator() const
{
    if (n_ < 2)
        throw StateError("moment estimates need at least two samples (have " + std::to_string(n_) + ")");
    return static_cast<double>(n_ - 1);
}

double MomentAccumulator::var_tau() const { return m2_tau_ / denominator(); }
double MomentAccumulator::var_1() const { return m2_1_ / denominator(); }
double MomentAccumulator::cov() const { return m11_ / denominator(); }
double MomentAccumulator::var_diff() const { return m2_d_ / denominator(); }

MomentAccumulator acc_merge(MomentAccumulator a, const MomentAccumulator& b)
{
    a.merge(b);
    return a;
}

double cov_identity_residual(const MomentAccumulator& acc)
{
    return acc.cov() - (0.5 * acc.var_tau() + 0.5 * acc.var_1() - 0.5 * acc.var_diff());
}

double cov_identity_scale(const MomentAccumulator& acc)
{
    return std::max({std::abs(acc.var_tau()), std::abs(acc.var_1()), std::abs(acc.var_diff()), std::abs(acc.cov())});
}

// --- confidence intervals ----------------------------------------------

double normal_z(double confidence)
{
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("confidence must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + confidence / 2.0);
}

EstimateWithCI normal_ci(double point, double se, double confidence)
{
    const double z = normal_z(confidence);
    return {point, se, point - z * se, point + z * se, confidence, "normal"};
}

double detail::type7_quantile(std::span<const double> sorted, double p)
{
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(h));
    if (k + 1 >= sorted.size())
        return sorted.back();
    return sorted[k] + (h - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
}

// --- distribution diagnostics ------------------------------------------

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf)
{
    if (samples.empty())
        throw StateError("ks_statistic: no samples");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double f = cdf(x[k]);
        d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
    }
    return d;
}

double ks_pvalue(double d, std::size_t n)
{
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 0.2)
        return 1.0;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        q += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-17)
            break;
    }
    return std::clamp(q, 0.0, 1.0);
}

double sidak_level(double alpha, int m)
{
    if (m < 1 || !(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("sidak_level: need alpha in (0,1) and m >= 1");
    return 1.0 - std::pow(1.0 - alpha, 1.0 / m);
}

double lag1_autocorrelation(std::span<const double> xs)
{
    if (xs.size() < 3)
        throw StateError("lag1_autocorrelation: need at least three values");
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        den += (xs[k] - mean) * (xs[k] - mean);
        if (k + 1 < xs.size())
            num += (xs[k] - mean) * (xs[k + 1] - mean);
    }
    if (den == 0.0)
        throw std::domain_error("lag1_autocorrelation: constant sequence");
    return num / den;
}

// --- TailHistogram ------------------------------------------------------

TailHistogram::TailHistogram(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)), counts_(thresholds_.size(), 0)
{
    if (thresholds_.empty())
        throw std::invalid_argument("TailHistogram: empty threshold grid");
    if (!std::is_sorted(thresholds_.begin(), thresholds_.end()) ||
        std::adjacent_find(thresholds_.begin(), thresholds_.end()) != thresholds_.end())
        throw std::invalid_argument("TailHistogram: thresholds must be strictly increasing");
}

void TailHistogram::add(double x)
{
    ++total_;
    // Thresholds below x are exceeded.
    const auto end = std::lower_bound(thresholds_.begin(), thresholds_.end(), x);
    for (auto it = thresholds_.begin(); it != end; ++it)
        ++counts_[static_cast<std::size_t>(it - thresholds_.begin())];
}

void TailHistogram::merge(const TailHistogram& o)
{
    if (o.thresholds_ != thresholds_)
        throw std::domain_error("TailHistogram: cannot merge different threshold grids");
    for (std::size_t k = 0; k < counts_.size(); ++k)
        counts_[k] += o.counts_[k];
    total_ += o.total_;
}

double TailHistogram::fraction(std::size_t k) const
{
    if (total_ == 0)
        throw StateError("TailHistogram: no samples");
    return static_cast<double>(counts_.at(k)) / static_cast<double>(total_);
}

double tail_fraction(const TailHistogram& hist, double threshold)
{
    const auto& t = hist.thresholds();
    for (std::size_t k = 0; k < t.size(); ++k)
        if (std::abs(t[k] - threshold) <= 1e-12 * std::max(1.0, std::abs(threshold)))
            return hist.fraction(k);
    std::ostringstream msg;
    msg << "tail_fraction: threshold " << threshold << " is not on the histogram grid";
    throw std::domain_error(msg.str());
}

// --- regression ---------------------------------------------------------

SlopeFit loglog_slope(std::span<const std::pair<double, double>> points)
{
    if (points.size() < 3)
        throw std::invalid_argument("loglog_slope: at least three points are required");
    std::vector<double> lx;
    std::vector<double> ly;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0)) {
            std::ostringstream msg;
            msg << "loglog_slope: nonpositive coordinate in (" << x << ", " << y << ")";
            throw std::domain_error(msg.str());
        }
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("loglog_slope: all x coordinates coincide");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        const double r = ly[k] - fit.intercept - fit.slope * lx[k];
        ss += r * r;
    }
    fit.stderr_slope = std::sqrt(ss / (n - 2.0) / sxx);
    return fit;
}

} // namespace lpplab
