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

#include "doctest.h"

#include "lpplab/estimators.hpp"
#include "lpplab/observables.hpp"
#include "lpplab/weights.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace lpplab;

namespace {

double mean_of(std::span<const double> xs)
{
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

MomentAccumulator accumulate(const std::vector<std::pair<double, double>>& xs, std::size_t lo, std::size_t hi)
{
    MomentAccumulator a("frame");
    for (std::size_t k = lo; k < hi; ++k)
        a.update(xs[k].first, xs[k].second);
    return a;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)); }

} // namespace

TEST_CASE("accumulator updates")
{
    MomentAccumulator one;
    one.update(3.0, 4.0);
    CHECK(one.count() == 1);
    CHECK(one.m2_tau() == 0.0);
    CHECK(one.m2_1() == 0.0);
    CHECK_THROWS_AS(one.var_tau(), StateError);
    CHECK_THROWS_AS(cov_identity_residual(one), StateError);

    MomentAccumulator two;
    two.update(1.0, 1.0);
    two.update(2.0, 2.0);
    CHECK(two.cov() == 0.5);
    CHECK(two.var_tau() == 0.5);
    CHECK(two.var_1() == 0.5);
    CHECK(two.m11() / 2.0 == 0.25);
    CHECK(two.var_diff() == 0.0);
    CHECK(cov_identity_residual(two) == 0.0);

    std::mt19937_64 gen(1);
    std::normal_distribution<double> g;
    MomentAccumulator big;
    for (int k = 0; k < 1'000'000; ++k) {
        const double x = g(gen);
        big.update(x, g(gen));
    }
    CHECK(std::abs(big.cov()) < 0.004);

    TwoTimeSample s;
    s.l_tau = 1.5;
    s.l_1 = -0.5;
    MomentAccumulator from_sample;
    from_sample.update(s);
    CHECK(from_sample.mean_diff() == -2.0);
}

TEST_CASE("accumulator merges")
{
    MomentAccumulator a("x");
    a.update(1.0, 1.0);
    a.update(2.0, 2.0);
    MomentAccumulator b("x");
    b.update(3.0, 3.0);
    const auto m = acc_merge(a, b);
    CHECK(m.count() == 3);
    CHECK(m.mean_tau() == 2.0);
    CHECK(m.m2_tau() == 2.0);
    CHECK(m.m2_1() == 2.0);

    const auto with_empty = acc_merge(a, MomentAccumulator("x"));
    CHECK(with_empty.count() == a.count());
    CHECK(with_empty.m2_tau() == a.m2_tau());
    CHECK(acc_merge(MomentAccumulator(), a).m11() == a.m11());
    CHECK_THROWS_AS(acc_merge(a, MomentAccumulator("y")), std::domain_error);

    std::mt19937_64 gen(2);
    std::normal_distribution<double> g(3.0, 2.0);
    std::vector<std::pair<double, double>> xs(1000);
    for (auto& [x, y] : xs) {
        x = g(gen);
        y = 0.6 * x + g(gen);
    }
    const auto whole = accumulate(xs, 0, xs.size());
    const auto p = accumulate(xs, 0, 137);
    const auto q = accumulate(xs, 137, 600);
    const auto r = accumulate(xs, 600, 1000);
    const auto left = acc_merge(acc_merge(p, q), r);
    const auto right = acc_merge(p, acc_merge(q, r));
    const auto swapped = acc_merge(r, acc_merge(q, p));
    for (const auto* t : {&left, &right, &swapped}) {
        CHECK(t->count() == 1000);
        CHECK(close(t->mean_tau(), whole.mean_tau(), 1e-12));
        CHECK(close(t->cov(), whole.cov(), 1e-12));
        CHECK(close(t->var_tau(), whole.var_tau(), 1e-12));
        CHECK(close(t->var_1(), whole.var_1(), 1e-12));
        CHECK(close(t->var_diff(), whole.var_diff(), 1e-12));
    }
    CHECK(close(acc_merge(p, q).cov(), acc_merge(q, p).cov(), 1e-12));
}

TEST_CASE("covariance identity residual")
{
    std::mt19937_64 gen(3);
    std::normal_distribution<double> g;
    for (double offset : {0.0, 1e3, 1e8}) {
        MomentAccumulator a;
        for (int k = 0; k < 10000; ++k) {
            const double x = offset + g(gen);
            a.update(x, offset + 0.3 * (x - offset) + g(gen));
        }
        const double tol = offset >= 1e8 ? 1e-6 : 1e-10;
        CHECK(std::abs(cov_identity_residual(a)) < tol * cov_identity_scale(a));
    }
    MomentAccumulator same;
    for (int k = 0; k < 100; ++k) {
        const double x = g(gen);
        same.update(x, x);
    }
    CHECK(cov_identity_residual(same) == doctest::Approx(0.0).epsilon(1e-14).scale(same.var_1()));
    CHECK(same.cov() == doctest::Approx(same.var_1()).epsilon(1e-14));
}

TEST_CASE("bootstrap intervals")
{
    const std::function<double(std::span<const double>)> mean = mean_of;
    const std::vector<double> constant(50, 2.5);
    const auto c = bootstrap_ci<double>(constant, mean, 200, 0.95, 1);
    CHECK(c.lo == 2.5);
    CHECK(c.hi == 2.5);

    std::mt19937_64 gen(4);
    std::normal_distribution<double> g;
    std::vector<double> xs(10000);
    for (auto& x : xs)
        x = g(gen);
    const auto e = bootstrap_ci<double>(xs, mean, 400, 0.95, 7);
    CHECK(e.hi - e.lo == doctest::Approx(2 * 1.96 / 100).epsilon(0.2));
    CHECK(e.lo <= e.point);
    CHECK(e.point <= e.hi);
    const auto again = bootstrap_ci<double>(xs, mean, 400, 0.95, 7);
    CHECK(again.lo == e.lo);
    CHECK(again.hi == e.hi);

    CHECK_THROWS_AS(bootstrap_ci<double>(std::vector<double>{}, mean, 200, 0.95, 1), StateError);
    CHECK_THROWS_AS(bootstrap_ci<double>(xs, mean, 199, 0.95, 1), std::invalid_argument);

    const double n1 = 100, n2 = 1600;
    auto width = [&](int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v)
            x = g(gen);
        const auto est = bootstrap_ci<double>(v, mean, 400, 0.95, 9);
        return est.hi - est.lo;
    };
    CHECK(width(static_cast<int>(n1)) / width(static_cast<int>(n2)) == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("bootstrap coverage on Gaussian data")
{
    const std::function<double(std::span<const double>)> mean = mean_of;
    std::mt19937_64 gen(5);
    std::normal_distribution<double> g(1.0, 3.0);
    int covered = 0;
    const int trials = 2000;
    std::vector<double> v(100);
    for (int t = 0; t < trials; ++t) {
        for (auto& x : v)
            x = g(gen);
        const auto e = bootstrap_ci<double>(v, mean, 200, 0.95, static_cast<std::uint64_t>(t));
        covered += e.lo <= 1.0 && 1.0 <= e.hi;
    }
    CHECK(static_cast<double>(covered) / trials == doctest::Approx(0.95).epsilon(0.02 / 0.95));
}

TEST_CASE("normal intervals")
{
    CHECK(normal_z(0.95) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(normal_z(0.99) == doctest::Approx(2.575829).epsilon(1e-6));
    const auto e = normal_ci(1.0, 0.1, 0.95);
    CHECK(e.lo == doctest::Approx(1.0 - 0.1959964));
    CHECK(e.method == "normal");
}

TEST_CASE("Kolmogorov-Smirnov")
{
    const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const std::vector<double> three{0.1, 0.5, 0.9};
    CHECK(ks_statistic(three, uniform) == doctest::Approx(7.0 / 30.0));
    const std::vector<double> median{0.5};
    CHECK(ks_statistic(median, uniform) == 0.5);

    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> u;
        std::vector<double> xs(10000);
        for (auto& x : xs)
            x = u(gen);
        const double d = ks_statistic(xs, uniform);
        rejections += d >= 1.63 / 100.0;
    }
    CHECK(rejections <= 2);

    CHECK(ks_pvalue(0.0, 100) == 1.0);
    CHECK(ks_pvalue(1.36 / std::sqrt(1e6), 1'000'000) == doctest::Approx(0.05).epsilon(0.05));
    CHECK(ks_pvalue(1.63 / std::sqrt(1e6), 1'000'000) == doctest::Approx(0.01).epsilon(0.1));
    CHECK(sidak_level(1e-3, 1) == doctest::Approx(1e-3));
    CHECK(sidak_level(1e-3, 20) == doctest::Approx(1.0 - std::pow(0.999, 0.05)));
}

TEST_CASE("bulk weights pass the exponential KS test across seeds")
{
    const auto exp_cdf = [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); };
    const int seeds = 20;
    const double level = sidak_level(1e-3, seeds);
    int failures = 0;
    for (int s = 0; s < seeds; ++s) {
        const WeightField f(RandomSource(static_cast<std::uint64_t>(1000 + s), 0), Droplet{});
        std::vector<double> w;
        w.reserve(100000);
        for (std::int64_t i = 1; i <= 1000; ++i)
            for (std::int64_t j = 1; j <= 100; ++j)
                w.push_back(f.bulk_weight_at({i, j}));
        failures += ks_pvalue(ks_statistic(w, exp_cdf), w.size()) < level;
    }
    CHECK(failures == 0);
}

TEST_CASE("lag-one autocorrelation")
{
    std::vector<double> alt;
    for (int k = 0; k < 100; ++k)
        alt.push_back(k % 2 ? 1.0 : -1.0);
    CHECK(lag1_autocorrelation(alt) == doctest::Approx(-0.99));
    CHECK_THROWS_AS(lag1_autocorrelation(std::vector<double>(10, 1.0)), std::domain_error);
}

TEST_CASE("tail histograms")
{
    TailHistogram h({0.5, 1.5, 2.5, 3.5});
    for (double x : {1.0, 2.0, 3.0})
        h.add(x);
    CHECK(tail_fraction(h, 2.5) == doctest::Approx(1.0 / 3.0));
    CHECK(tail_fraction(h, 0.5) == 1.0);
    CHECK(tail_fraction(h, 3.5) == 0.0);
    CHECK_THROWS_AS(tail_fraction(h, 2.0), std::domain_error);
    for (std::size_t k = 1; k < h.thresholds().size(); ++k)
        CHECK(h.fraction(k) <= h.fraction(k - 1));
    TailHistogram other({0.5, 1.5, 2.5, 3.5});
    other.add(4.0);
    h.merge(other);
    CHECK(tail_fraction(h, 3.5) == 0.25);
    CHECK_THROWS_AS(h.merge(TailHistogram({1.0})), std::domain_error);
    CHECK_THROWS_AS(TailHistogram({2.0, 1.0}), std::invalid_argument);
}

TEST_CASE("log-log slope")
{
    const std::vector<std::pair<double, double>> power{{1.0, 1.0}, {std::pow(2.0, 1.5), 2.0}, {8.0, 4.0}};
    const auto fit = loglog_slope(power);
    CHECK(fit.slope == doctest::Approx(2.0 / 3.0));
    CHECK(fit.stderr_slope == doctest::Approx(0.0).scale(1.0));
    const std::vector<std::pair<double, double>> flat{{1.0, 5.0}, {2.0, 5.0}, {7.0, 5.0}};
    CHECK(loglog_slope(flat).slope == doctest::Approx(0.0).scale(1.0));
    const std::vector<std::pair<double, double>> linear{{0.1, 0.3}, {2.0, 6.0}, {7.0, 21.0}, {9.0, 27.0}};
    CHECK(loglog_slope(linear).slope == doctest::Approx(1.0));
    const std::vector<std::pair<double, double>> two{{1.0, 1.0}, {2.0, 2.0}};
    CHECK_THROWS_AS(loglog_slope(two), std::invalid_argument);
    const std::vector<std::pair<double, double>> bad{{1.0, 1.0}, {2.0, 0.0}, {3.0, 1.0}};
    CHECK_THROWS_AS(loglog_slope(bad), std::domain_error);
}
