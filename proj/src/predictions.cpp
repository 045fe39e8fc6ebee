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

#include "lpplab/predictions.hpp"

#include "lpplab/errors.hpp"
#include "lpplab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lpplab {

namespace {

constexpr const char* table_format = "lpplab-stat-var/1";

double unbiased_variance(std::span<const double> xs)
{
    ScalarMoments m;
    for (double x : xs)
        m.add(x);
    return m.variance();
}

} // namespace

// --- StatVarTable -------------------------------------------------------

StatVarTable::StatVarTable(std::vector<StatVarEntry> entries, StatVarProvenance provenance)
    : entries_(std::move(entries)), provenance_(std::move(provenance))
{
    if (entries_.empty())
        throw std::invalid_argument("StatVarTable: no entries");
    for (std::size_t k = 0; k < entries_.size(); ++k) {
        const auto& e = entries_[k];
        if (k > 0 && !(e.w > entries_[k - 1].w))
            throw std::invalid_argument("StatVarTable: w-grid must be strictly increasing");
        if (!(e.v > 0.0))
            throw std::invalid_argument("StatVarTable: V(" + std::to_string(e.w) + ") must be positive");
        if (!(e.ci_lo <= e.v && e.v <= e.ci_hi) || !(e.se >= 0.0))
            throw std::invalid_argument("StatVarTable: entry at w = " + std::to_string(e.w) +
                                        " has an inconsistent confidence interval");
    }
}

StatVarTable StatVarTable::from_json(const nlohmann::json& j)
{
    if (j.value("format", std::string()) != table_format)
        throw ConfigError("calibration file: expected format '" + std::string(table_format) + "'");
    StatVarProvenance p;
    p.n_ref = j.at("N_ref").get<std::int64_t>();
    p.replicas = j.at("replicas").get<std::int64_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.created = j.at("created").get<std::string>();
    p.confidence = j.at("confidence").get<double>();
    p.method = j.value("method", std::string());
    p.model = j.value("model", p.model);
    std::vector<StatVarEntry> entries;
    for (const auto& e : j.at("entries")) {
        entries.push_back({e.at("w").get<double>(), e.at("V").get<double>(), e.at("ci_lo").get<double>(),
                           e.at("ci_hi").get<double>(), e.at("se").get<double>()});
    }
    return StatVarTable(std::move(entries), std::move(p));
}

StatVarTable StatVarTable::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read calibration file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("calibration file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json StatVarTable::to_json() const
{
    nlohmann::json j;
    j["format"] = table_format;
    j["model"] = provenance_.model;
    j["N_ref"] = provenance_.n_ref;
    j["replicas"] = provenance_.replicas;
    j["seed"] = provenance_.seed;
    j["created"] = provenance_.created;
    j["confidence"] = provenance_.confidence;
    j["method"] = provenance_.method;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries_) {
        j["entries"].push_back({{"w", e.w},
                                {"V", e.v},
                                {"ci_lo", e.ci_lo},
                                {"ci_hi", e.ci_hi},
                                {"se", e.se},
                                {"N_ref", provenance_.n_ref},
                                {"replicas", provenance_.replicas},
                                {"seed", provenance_.seed},
                                {"created", provenance_.created}});
    }
    return j;
}

void StatVarTable::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write calibration file " + path.string());
    out << to_json().dump(2) << '\n';
    if (!out)
        throw IoError("failed writing calibration file " + path.string());
}

EstimateWithCI StatVarTable::at(double w) const
{
    constexpr double slack = 1e-12;
    if (!(w >= w_min() - slack && w <= w_max() + slack)) {
        std::ostringstream msg;
        msg << "V(" << w << ") requested outside the calibrated range [" << w_min() << ", " << w_max()
            << "]; extend the calibration grid to cover w = " << w;
        throw std::domain_error(msg.str());
    }
    std::size_t k = 0;
    while (k + 2 < entries_.size() && entries_[k + 1].w <= w)
        ++k;
    EstimateWithCI est;
    est.confidence = provenance_.confidence;
    est.method = "calibrated";
    if (entries_.size() == 1) {
        const auto& e = entries_[0];
        est.point = e.v;
        est.se = e.se;
        est.lo = e.ci_lo;
        est.hi = e.ci_hi;
        return est;
    }
    const auto& a = entries_[k];
    const auto& b = entries_[k + 1];
    const double t = std::clamp((w - a.w) / (b.w - a.w), 0.0, 1.0);
    est.point = (1.0 - t) * a.v + t * b.v;
    est.se = (1.0 - t) * a.se + t * b.se;
    est.lo = (1.0 - t) * a.ci_lo + t * b.ci_lo;
    est.hi = (1.0 - t) * a.ci_hi + t * b.ci_hi;
    return est;
}

// --- calibration --------------------------------------------------------

std::vector<Point> calibration_targets(std::int64_t n_ref, std::span<const double> w_grid)
{
    std::vector<Point> out;
    for (double w : w_grid)
        out.push_back(endpoint_of(CharacteristicFrame(n_ref, 1.0, 0.0, w), Endpoint::one));
    return out;
}

std::vector<double> calibration_sample(const RandomSource& source, std::int64_t n_ref, std::span<const double> w_grid)
{
    const WeightField field(source, StationaryA{0.5});
    const auto targets = calibration_targets(n_ref, w_grid);
    const auto r = sweep(field, Region::covering(field, targets));
    std::vector<double> out;
    out.reserve(targets.size());
    for (const Point& t : targets)
        out.push_back(rescale(r.final_front.at(t.i), n_ref, 1.0));
    return out;
}

StatVarTable stat_var_table_from_samples(std::span<const double> w_grid, const std::vector<std::vector<double>>& rows,
                                         StatVarProvenance provenance, int bootstrap_resamples)
{
    if (rows.size() < 2)
        throw StateError("calibration needs at least two replicas");
    const std::function<double(std::span<const double>)> variance = unbiased_variance;
    std::vector<StatVarEntry> entries;
    std::vector<double> column(rows.size());
    for (std::size_t c = 0; c < w_grid.size(); ++c) {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != w_grid.size())
                throw std::invalid_argument("calibration row has the wrong number of columns");
            column[r] = rows[r][c];
        }
        const auto est = bootstrap_ci<double>(column, variance, bootstrap_resamples, provenance.confidence,
                                              provenance.seed ^ (0x9e3779b97f4a7c15ULL * (c + 1)));
        entries.push_back({w_grid[c], est.point, est.lo, est.hi, est.se});
        provenance.method = est.method + " of the unbiased variance";
    }
    provenance.replicas = static_cast<std::int64_t>(rows.size());
    return StatVarTable(std::move(entries), std::move(provenance));
}

StatVarTable calibrate_stat_var(std::span<const double> w_grid, std::int64_t n_ref, std::int64_t replicas,
                                std::uint64_t seed, const std::string& created)
{
    if (replicas < 1000)
        throw std::invalid_argument("calibrate_stat_var: at least 1000 replicas are required, got " +
                                    std::to_string(replicas));
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(replicas));
    for (std::int64_t r = 0; r < replicas; ++r)
        rows.push_back(calibration_sample(RandomSource(seed, static_cast<std::uint64_t>(r)), n_ref, w_grid));
    StatVarProvenance p;
    p.n_ref = n_ref;
    p.seed = seed;
    p.created = created;
    return stat_var_table_from_samples(w_grid, rows, p);
}

// --- formulas -----------------------------------------------------------

EstimateWithCI corollary_rhs(double tau, double w_tau, double w_1, const StatVarTable& table)
{
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("corollary_rhs: tau must lie in [0, 1]");
    std::vector<std::pair<double, double>> terms; // (argument, coefficient)
    auto add = [&](double coefficient, double argument) {
        if (coefficient == 0.0)
            return;
        for (auto& [arg, c] : terms) {
            if (std::abs(arg - argument) <= 1e-12) {
                c += coefficient;
                return;
            }
        }
        terms.emplace_back(argument, coefficient);
    };
    const double a = std::cbrt(tau * tau);
    const double b = std::cbrt((1.0 - tau) * (1.0 - tau));
    if (a > 0.0)
        add(0.5 * a, w_tau / a);
    add(0.5, w_1);
    if (b > 0.0)
        add(-0.5 * b, (w_1 - w_tau) / b);

    double point = 0.0;
    double se = 0.0;
    for (const auto& [arg, c] : terms) {
        if (std::abs(c) < 1e-15)
            continue;
        const auto v = table.at(arg);
        point += c * v.point;
        se += std::abs(c) * v.se;
    }
    auto est = normal_ci(point, se, table.provenance().confidence);
    est.method = "calibrated, propagated";
    return est;
}

EstimateWithCI tau1_target(double tau, double wt_tau, double wt_1, const StatVarTable& table)
{
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("tau1_target: tau must lie in (0, 1)");
    const double c = std::cbrt((1.0 - tau) * (1.0 - tau));
    const auto v = table.at(wt_1 - wt_tau);
    return {c * v.point, c * v.se, c * v.lo, c * v.hi, v.confidence, "calibrated, scaled"};
}

nlohmann::json to_json(const CheckReport& r)
{
    auto est = [](const EstimateWithCI& e) {
        return nlohmann::json{{"point", e.point}, {"se", e.se},         {"lo", e.lo},
                              {"hi", e.hi},       {"confidence", e.confidence}, {"method", e.method}};
    };
    return {{"name", r.name},
            {"inputs", r.inputs},
            {"observed", est(r.observed)},
            {"target", est(r.target)},
            {"rule", r.rule},
            {"passed", r.passed},
            {"samples", r.samples},
            {"note", r.note}};
}

CheckReport tau0_target(std::span<const double> taus, std::span<const EstimateWithCI> covs, double w_hat)
{
    if (taus.size() != covs.size())
        throw std::invalid_argument("tau0_target: one covariance per tau is required");
    if (taus.size() < 3)
        throw std::invalid_argument("tau0_target: at least three tau values are required");
    CheckReport rep;
    rep.name = "small-tau covariance exponent";
    rep.rule = "log-log slope of Cov against tau in [0.55, 0.80]";
    rep.target = {2.0 / 3.0, 0.0, 0.55, 0.80, 1.0, "exponent window"};
    std::vector<double> plateau;
    std::vector<std::pair<double, double>> points;
    bool positive = true;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        plateau.push_back(covs[k].point / std::cbrt(taus[k] * taus[k]));
        positive = positive && covs[k].point > 0.0;
        points.emplace_back(taus[k], covs[k].point);
    }
    const double mean = std::accumulate(plateau.begin(), plateau.end(), 0.0) / static_cast<double>(plateau.size());
    const auto [lo, hi] = std::minmax_element(plateau.begin(), plateau.end());
    rep.inputs = {{"tau", std::vector<double>(taus.begin(), taus.end())},
                  {"w_hat", w_hat},
                  {"plateau_values", plateau},
                  {"plateau", mean},
                  {"plateau_spread", *hi - *lo}};
    if (!positive) {
        rep.note = "nonpositive covariance estimate; the exponent is undefined";
        rep.passed = false;
        return rep;
    }
    const auto fit = loglog_slope(points);
    rep.observed = normal_ci(fit.slope, fit.stderr_slope, 0.95);
    rep.observed.method = "least squares";
    rep.passed = fit.slope >= 0.55 && fit.slope <= 0.80;
    return rep;
}

// --- comparison lemmas --------------------------------------------------

void ComparisonTally::merge(const ComparisonTally& o)
{
    replicas += o.replicas;
    pairs_checked += o.pairs_checked;
    upper_hypothesis += o.upper_hypothesis;
    lower_hypothesis += o.lower_hypothesis;
    violations += o.violations;
    worst_excess = std::max(worst_excess, o.worst_excess);
}

std::vector<std::pair<Point, Point>> staircase_pairs(std::int64_t n, std::int64_t step, int steps)
{
    if (step < 1 || steps < 1 || n < step * steps)
        throw std::invalid_argument("staircase_pairs: staircase leaves the quadrant");
    std::vector<Point> pts;
    Point p{n - steps * step, n + steps * step};
    pts.push_back(p);
    for (int k = 0; k < 2 * steps; ++k) {
        p.i += step;
        pts.push_back(p);
        p.j -= step;
        pts.push_back(p);
    }
    std::vector<std::pair<Point, Point>> pairs;
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b)
            pairs.emplace_back(pts[a], pts[b]);
    return pairs;
}

namespace {

struct TracedValues {
    std::map<std::pair<std::int64_t, std::int64_t>, double> value;
    std::optional<DirectionTape> tape;

    double at(Point p) const { return value.at({p.i, p.j}); }
};

TracedValues trace_values(const WeightField& field, std::span<const Point> targets)
{
    TracedValues out;
    std::multimap<std::int64_t, Point> by_level;
    for (const Point& t : targets)
        by_level.emplace(t.level(), t);
    SweepOptions opts;
    opts.tape = true;
    opts.observer = [&](const FrontView& f) {
        auto [a, b] = by_level.equal_range(f.level);
        for (auto it = a; it != b; ++it)
            out.value[{it->second.i, it->second.j}] = f.at(it->second.i);
    };
    out.tape = std::move(sweep(field, Region::covering(field, targets), opts).tape);
    return out;
}

} // namespace

ComparisonTally comparison_violations(const WeightField& stationary, const WeightField& other,
                                      std::span<const std::pair<Point, Point>> pairs)
{
    if (!(stationary.source() == other.source()))
        throw std::invalid_argument("comparison_violations: the models are not coupled (different random sources); "
                                    "the comparison is pathwise");
    const bool point_case =
        std::holds_alternative<StationaryA>(stationary.ic()) && std::holds_alternative<Droplet>(other.ic());
    const bool line_case = std::holds_alternative<StationaryB>(stationary.ic()) && other.from_line();
    if (!point_case && !line_case)
        throw std::invalid_argument(
            "comparison_violations: compare droplet with StationaryA or a line start with StationaryB");
    if (line_case && stationary.window() != other.window())
        throw std::invalid_argument("comparison_violations: line models must share the truncation window");

    std::vector<Point> targets;
    for (const auto& [p, q] : pairs) {
        if (!(0 <= p.i && p.i <= q.i && p.j >= q.j && q.j >= 0)) {
            std::ostringstream msg;
            msg << "comparison_violations: " << p << ", " << q << " is not a down-right pair in Z^2_+";
            throw std::invalid_argument(msg.str());
        }
        targets.push_back(p);
        targets.push_back(q);
    }
    ComparisonTally tally;
    tally.replicas = 1;
    if (pairs.empty())
        return tally;

    const TracedValues s = trace_values(stationary, targets);
    const TracedValues o = trace_values(other, targets);
    auto z = [](const TracedValues& t, Point p, const InitialCondition& ic) { return exit_point(t.tape, p, ic).z; };

    for (const auto& [p, q] : pairs) {
        ++tally.pairs_checked;
        const double d_other = o.at(q) - o.at(p);
        const double d_stat = s.at(q) - s.at(p);
        const double tol =
            1e-9 * std::max({1.0, std::abs(o.at(p)), std::abs(o.at(q)), std::abs(s.at(p)), std::abs(s.at(q))});
        bool upper = false;
        bool lower = false;
        if (point_case) {
            upper = z(s, p, stationary.ic()) >= 0;
            lower = z(s, q, stationary.ic()) <= 0;
        } else {
            upper = z(s, p, stationary.ic()) >= z(o, q, other.ic());
            lower = z(s, q, stationary.ic()) <= z(o, p, other.ic());
        }
        if (upper) {
            ++tally.upper_hypothesis;
            const double excess = d_other - d_stat;
            tally.worst_excess = std::max(tally.worst_excess, excess);
            tally.violations += excess > tol;
        }
        if (lower) {
            ++tally.lower_hypothesis;
            const double excess = d_stat - d_other;
            tally.worst_excess = std::max(tally.worst_excess, excess);
            tally.violations += excess > tol;
        }
    }
    return tally;
}

} // namespace lpplab
