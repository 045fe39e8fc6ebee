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

#include "lpplab/runner.hpp"

#include "lpplab/errors.hpp"
#include "lpplab/observables.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#ifndef LPPLAB_VERSION
#define LPPLAB_VERSION "unknown"
#endif

namespace lpplab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<ExperimentKind, std::string>> kind_names{
    {ExperimentKind::two_time, "two-time"},   {ExperimentKind::calibrate, "calibrate"},
    {ExperimentKind::compare_lemma, "compare-lemma"}, {ExperimentKind::exit_tails, "exit-tails"},
    {ExperimentKind::tau1_scan, "tau1-scan"}, {ExperimentKind::tau0_scan, "tau0-scan"},
    {ExperimentKind::height_demo, "height-demo"}};

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// --- config field access ------------------------------------------------

[[noreturn]] void field_error(const std::string& field, const std::string& what)
{
    throw ConfigError("config field '" + field + "': " + what);
}

double number(const json& j, const std::string& key, std::optional<double> fallback)
{
    if (!j.contains(key)) {
        if (!fallback)
            field_error(key, "required");
        return *fallback;
    }
    if (!j[key].is_number())
        field_error(key, "expected a number, got " + j[key].dump());
    return j[key].get<double>();
}

std::int64_t integer(const json& j, const std::string& key, std::optional<std::int64_t> fallback)
{
    if (!j.contains(key)) {
        if (!fallback)
            field_error(key, "required");
        return *fallback;
    }
    if (!j[key].is_number_integer())
        field_error(key, "expected an integer, got " + j[key].dump());
    return j[key].get<std::int64_t>();
}

std::vector<double> number_list(const json& j, const std::string& key, std::optional<std::vector<double>> fallback)
{
    if (!j.contains(key)) {
        if (!fallback)
            field_error(key, "required");
        return *fallback;
    }
    const json& v = j[key];
    if (v.is_number())
        return {v.get<double>()};
    if (!v.is_array() || v.empty())
        field_error(key, "expected a number or a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number())
            field_error(key, "expected numbers, got " + x.dump());
        out.push_back(x.get<double>());
    }
    return out;
}

std::string text(const json& j, const std::string& key, const std::string& fallback)
{
    if (!j.contains(key))
        return fallback;
    if (!j[key].is_string())
        field_error(key, "expected a string, got " + j[key].dump());
    return j[key].get<std::string>();
}

void check_range(const std::string& field, const std::vector<double>& xs, double lo, double hi, bool lo_open,
                 bool hi_open)
{
    for (double x : xs) {
        const bool ok =
            std::isfinite(x) && (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
        if (!ok) {
            std::ostringstream msg;
            msg << "value " << x << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
            field_error(field, msg.str());
        }
    }
}

void check_increasing(const std::string& field, const std::vector<double>& xs)
{
    for (std::size_t k = 1; k < xs.size(); ++k)
        if (!(xs[k] > xs[k - 1]))
            field_error(field, "values must be strictly increasing");
}

std::vector<double> parse_w_grid(const json& j)
{
    if (!j.contains("w_grid")) {
        std::vector<double> grid;
        for (int k = -12; k <= 12; ++k)
            grid.push_back(0.25 * k);
        return grid;
    }
    const json& g = j["w_grid"];
    if (g.is_object()) {
        const double lo = number(g, "min", std::nullopt);
        const double hi = number(g, "max", std::nullopt);
        const double step = number(g, "step", std::nullopt);
        if (!(step > 0.0) || !(hi >= lo))
            field_error("w_grid", "needs min <= max and step > 0");
        const auto count = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9));
        std::vector<double> grid;
        for (std::int64_t k = 0; k <= count; ++k)
            grid.push_back(lo + step * static_cast<double>(k));
        return grid;
    }
    auto grid = number_list(j, "w_grid", std::nullopt);
    check_increasing("w_grid", grid);
    return grid;
}

std::string today()
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

InitialCondition config_ic(const ExperimentConfig& c)
{
    return parse_ic(c.ic, c.rho, c.sigma);
}

/// Checks that E_tau, E_1 (and I(u) for `us`) stay inside the start region.
void check_geometry(const std::string& field, const ExperimentConfig& c, double tau, double w_tau, double w_1,
                    const std::vector<double>& us = {})
{
    try {
        const CharacteristicFrame f(c.n, tau, w_tau, w_1, starts_from_line(config_ic(c)) ? -c.window : 0);
        (void)endpoint_of(f, Endpoint::tau);
        (void)endpoint_of(f, Endpoint::one);
        for (double u : us)
            (void)endpoint_of(f, u);
    } catch (const std::exception& e) {
        field_error(field, e.what());
    }
}

// --- numeric helpers ----------------------------------------------------

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t sub_seed(std::uint64_t seed, const std::string& label)
{
    return seed ^ fnv1a(label);
}

using Samples = std::vector<std::vector<double>>;

constexpr std::size_t leaf_size = 256;

/// Reduces leaves of `leaf_size` consecutive replicas pairwise, level by
/// level, so the result depends only on the replica order.
template <class Acc>
Acc tree_reduce(std::size_t n, const std::function<Acc(std::size_t, std::size_t)>& leaf)
{
    std::vector<Acc> level;
    for (std::size_t lo = 0; lo < n; lo += leaf_size)
        level.push_back(leaf(lo, std::min(n, lo + leaf_size)));
    if (level.empty())
        return leaf(0, 0);
    while (level.size() > 1) {
        std::vector<Acc> next;
        for (std::size_t k = 0; k + 1 < level.size(); k += 2) {
            Acc a = level[k];
            a.merge(level[k + 1]);
            next.push_back(std::move(a));
        }
        if (level.size() % 2 == 1)
            next.push_back(level.back());
        level = std::move(next);
    }
    return level.front();
}

MomentAccumulator moments(const Samples& rows, std::size_t c_tau, std::size_t c_1, const std::string& tag)
{
    return tree_reduce<MomentAccumulator>(rows.size(), [&](std::size_t lo, std::size_t hi) {
        MomentAccumulator a(tag);
        for (std::size_t r = lo; r < hi; ++r)
            a.update(rows[r][c_tau], rows[r][c_1]);
        return a;
    });
}

TailHistogram exceedances(const Samples& rows, std::size_t column, const std::vector<double>& thresholds)
{
    return tree_reduce<TailHistogram>(rows.size(), [&](std::size_t lo, std::size_t hi) {
        TailHistogram h(thresholds);
        for (std::size_t r = lo; r < hi; ++r)
            h.add(rows[r][column]);
        return h;
    });
}

double unbiased_cov(std::span<const std::array<double, 2>> xs)
{
    MomentAccumulator a;
    for (const auto& x : xs)
        a.update(x[0], x[1]);
    return a.cov();
}

double unbiased_var(std::span<const double> xs)
{
    ScalarMoments m;
    for (double x : xs)
        m.add(x);
    return m.variance();
}

EstimateWithCI cov_estimate(const ExperimentConfig& c, const Samples& rows, std::size_t c_tau, std::size_t c_1,
                            const std::string& label)
{
    std::vector<std::array<double, 2>> pairs;
    pairs.reserve(rows.size());
    for (const auto& r : rows)
        pairs.push_back({r[c_tau], r[c_1]});
    return bootstrap_ci<std::array<double, 2>>(pairs, unbiased_cov, c.bootstrap, c.confidence,
                                               sub_seed(c.seed, label));
}

EstimateWithCI var_diff_estimate(const ExperimentConfig& c, const Samples& rows, std::size_t c_tau, std::size_t c_1,
                                 const std::string& label)
{
    std::vector<double> d;
    d.reserve(rows.size());
    for (const auto& r : rows)
        d.push_back(r[c_1] - r[c_tau]);
    return bootstrap_ci<double>(d, unbiased_var, c.bootstrap, c.confidence, sub_seed(c.seed, label));
}

std::string fmt(double x)
{
    return format_double(x);
}

std::string fmt_int(std::int64_t x)
{
    return std::to_string(x);
}

json estimate_json(const EstimateWithCI& e)
{
    return {{"point", e.point}, {"se", e.se}, {"lo", e.lo}, {"hi", e.hi}, {"confidence", e.confidence},
            {"method", e.method}};
}

CheckReport identity_report(const std::vector<MomentAccumulator>& accs)
{
    CheckReport rep;
    rep.name = "covariance identity";
    rep.rule = "|cov - (var_tau + var_1 - var_diff) / 2| < 1e-10 * scale on every accumulator";
    rep.target = {0.0, 0.0, 0.0, 1e-10, 1.0, "exact"};
    double worst = 0.0;
    for (const auto& a : accs) {
        if (a.count() < 2)
            continue;
        const double scale = std::max(cov_identity_scale(a), std::numeric_limits<double>::min());
        worst = std::max(worst, std::abs(cov_identity_residual(a)) / scale);
        rep.samples = std::max(rep.samples, a.count());
    }
    rep.observed = {worst, 0.0, worst, worst, 1.0, "relative residual"};
    rep.inputs = {{"accumulators", accs.size()}};
    rep.passed = worst < 1e-10;
    return rep;
}

bool within_combined(const EstimateWithCI& a, const EstimateWithCI& b, double k)
{
    return std::abs(a.point - b.point) <= k * std::hypot(a.se, b.se);
}

std::string join_flags(const std::vector<std::string>& flags)
{
    std::string out;
    for (const auto& f : flags)
        out += (out.empty() ? "" : ";") + f;
    return out;
}

} // namespace

// --- public helpers -----------------------------------------------------

std::string kind_name(ExperimentKind kind)
{
    for (const auto& [k, name] : kind_names)
        if (k == kind)
            return name;
    return "unknown";
}

ExperimentKind parse_kind(const std::string& name)
{
    for (const auto& [k, n] : kind_names)
        if (n == name)
            return k;
    std::string all;
    for (const auto& [k, n] : kind_names)
        all += (all.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment kind '" + name + "' (expected one of " + all + ")");
}

std::string format_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k)
            out << (k ? "," : "") << cells[k];
        out << '\n';
    };
    line(header);
    for (const auto& r : rows)
        line(r);
    out.flush();
    if (!out)
        throw IoError("failed writing " + path.string());
}

json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": not valid JSON: " + e.what());
    }
}

std::string config_hash(const ExperimentConfig& config)
{
    json canonical = config.echo;
    canonical.erase("replicas");
    canonical.erase("workers");
    canonical.erase("out");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical.dump())));
    return buf;
}

bool RunResult::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const CheckReport& r) { return r.passed; });
}

// --- config -------------------------------------------------------------

ExperimentConfig parse_config(ExperimentKind kind, const json& j)
{
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");

    const std::set<std::string> run_keys{"replicas", "seed", "workers", "out", "bootstrap", "confidence"};
    const std::set<std::string> model_keys{"N", "ic", "rho", "sigma", "window"};
    std::set<std::string> allowed = run_keys;
    auto allow = [&](std::initializer_list<std::string> keys) { allowed.insert(keys.begin(), keys.end()); };
    switch (kind) {
    case ExperimentKind::two_time:
        allowed.insert(model_keys.begin(), model_keys.end());
        allow({"tau", "w_tau", "w_1", "table"});
        break;
    case ExperimentKind::calibrate:
        allow({"N_ref", "w_grid", "created"});
        break;
    case ExperimentKind::compare_lemma:
        allowed.insert(model_keys.begin(), model_keys.end());
        allow({"step", "steps"});
        break;
    case ExperimentKind::exit_tails:
        allowed.insert(model_keys.begin(), model_keys.end());
        allow({"tau", "w_1", "M", "kappa"});
        break;
    case ExperimentKind::tau1_scan:
        allowed.insert(model_keys.begin(), model_keys.end());
        allow({"tau", "wt_tau", "wt_1", "table"});
        break;
    case ExperimentKind::tau0_scan:
        allowed.insert(model_keys.begin(), model_keys.end());
        allow({"tau", "w_hat"});
        break;
    case ExperimentKind::height_demo:
        allow({"ic", "rho", "sigma", "window", "t_max", "observe"});
        break;
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            field_error(key, "unknown field for kind " + kind_name(kind));
    }

    ExperimentConfig c;
    c.kind = kind;
    json& e = c.echo;
    e["kind"] = kind_name(kind);

    c.replicas = integer(j, "replicas", std::nullopt);
    if (c.replicas < 0)
        field_error("replicas", "must be >= 0");
    if (j.contains("seed") && !(j["seed"].is_number_unsigned() ||
                                (j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0)))
        field_error("seed", "expected a nonnegative integer");
    c.seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : 0;
    const auto workers = integer(j, "workers", 1);
    if (workers < 1 || workers > 1024)
        field_error("workers", "must lie in [1, 1024]");
    c.workers = static_cast<int>(workers);
    const auto boot = integer(j, "bootstrap", 1000);
    if (boot < 200 || boot > 100000)
        field_error("bootstrap", "must lie in [200, 100000]");
    c.bootstrap = static_cast<int>(boot);
    c.confidence = number(j, "confidence", 0.95);
    check_range("confidence", {c.confidence}, 0.0, 1.0, true, true);
    e["replicas"] = c.replicas;
    e["seed"] = c.seed;
    e["workers"] = c.workers;
    e["bootstrap"] = c.bootstrap;
    e["confidence"] = c.confidence;

    if (kind == ExperimentKind::calibrate) {
        c.n_ref = integer(j, "N_ref", std::nullopt);
        if (c.n_ref < 2000)
            field_error("N_ref", "must be >= 2000");
        c.w_grid = parse_w_grid(j);
        for (double w : c.w_grid) {
            try {
                (void)calibration_targets(c.n_ref, std::vector<double>{w});
            } catch (const std::exception& ex) {
                field_error("w_grid", ex.what());
            }
        }
        if (c.replicas < 1000)
            field_error("replicas", "calibration needs at least 1000 replicas");
        c.created = text(j, "created", today());
        c.ic = "stationary-a";
        c.n = c.n_ref;
        e["N_ref"] = c.n_ref;
        e["w_grid"] = c.w_grid;
        e["created"] = c.created;
        return c;
    }

    c.ic = text(j, "ic", kind == ExperimentKind::tau0_scan ? "droplet" : "flat");
    c.rho = number(j, "rho", 0.5);
    c.sigma = number(j, "sigma", 1.0);
    InitialCondition ic;
    try {
        ic = parse_ic(c.ic, c.rho, c.sigma);
        validate_ic(ic);
    } catch (const std::exception& ex) {
        field_error("ic", ex.what());
    }
    e["ic"] = c.ic;
    e["rho"] = c.rho;
    e["sigma"] = c.sigma;
    const bool line = starts_from_line(ic);

    if (kind == ExperimentKind::height_demo) {
        if (!line)
            field_error("ic", "height evolution needs a line start (flat, stationary-b, random-sigma)");
        c.t_max = integer(j, "t_max", std::nullopt);
        c.observe = integer(j, "observe", 0);
        if (c.t_max < 1)
            field_error("t_max", "must be >= 1");
        if (c.observe < 0)
            field_error("observe", "must be >= 0");
        c.window = integer(j, "window", (c.observe + c.t_max + 1) / 2);
        if (2 * c.window < c.observe + c.t_max)
            field_error("window", "needs 2 window >= observe + t_max");
        e["t_max"] = c.t_max;
        e["observe"] = c.observe;
        e["window"] = c.window;
        return c;
    }

    c.n = integer(j, "N", std::nullopt);
    if (c.n < 2)
        field_error("N", "must be >= 2");
    c.window = line ? integer(j, "window", default_window(c.n)) : 0;
    if (line && c.window < 1)
        field_error("window", "must be >= 1");
    e["N"] = c.n;
    e["window"] = c.window;

    switch (kind) {
    case ExperimentKind::two_time: {
        c.taus = number_list(j, "tau", std::nullopt);
        check_range("tau", c.taus, 0.0, 1.0, true, false);
        c.w_tau = number_list(j, "w_tau", std::vector<double>{0.0});
        c.w_1 = number_list(j, "w_1", std::vector<double>{0.0});
        for (double tau : c.taus)
            for (double wt : c.w_tau)
                for (double w1 : c.w_1)
                    check_geometry("w_tau", c, tau, wt, w1);
        e["tau"] = c.taus;
        e["w_tau"] = c.w_tau;
        e["w_1"] = c.w_1;
        break;
    }
    case ExperimentKind::compare_lemma: {
        if (c.ic == "stationary-a" || c.ic == "stationary-b")
            field_error("ic", "compare a droplet or a line start (flat, random-sigma) against its stationary model");
        c.steps = static_cast<int>(integer(j, "steps", 3));
        c.step = integer(j, "step", std::max<std::int64_t>(1, c.n / 10));
        if (c.steps < 1 || c.step < 1 || c.step * c.steps > c.n)
            field_error("step", "needs step >= 1, steps >= 1 and step * steps <= N");
        e["step"] = c.step;
        e["steps"] = c.steps;
        break;
    }
    case ExperimentKind::exit_tails: {
        if (!line)
            field_error("ic", "exit points need a line start (flat, stationary-b, random-sigma)");
        c.taus = number_list(j, "tau", std::vector<double>{0.5});
        if (c.taus.size() != 1)
            field_error("tau", "exit-tails takes a single tau");
        check_range("tau", c.taus, 0.0, 1.0, true, false);
        c.w_1 = number_list(j, "w_1", std::vector<double>{0.0});
        if (c.w_1.size() != 1)
            field_error("w_1", "exit-tails takes a single w_1");
        c.m_grid = number_list(j, "M", std::vector<double>{1, 2, 3, 4, 5});
        check_range("M", c.m_grid, 0.0, std::numeric_limits<double>::max(), true, false);
        check_increasing("M", c.m_grid);
        c.kappa = j.contains("kappa") ? number_list(j, "kappa", std::nullopt) : std::vector<double>{};
        const double kappa_max = 0.5 * std::cbrt(static_cast<double>(c.n));
        check_range("kappa", c.kappa, 0.0, kappa_max, true, true);
        std::vector<double> us{0.0};
        for (double m : c.m_grid) {
            us.push_back(m);
            us.push_back(-m);
        }
        check_geometry("M", c, c.taus[0], 0.0, c.w_1[0], us);
        e["tau"] = c.taus;
        e["w_1"] = c.w_1;
        e["M"] = c.m_grid;
        e["kappa"] = c.kappa;
        break;
    }
    case ExperimentKind::tau1_scan: {
        c.taus = number_list(j, "tau", std::nullopt);
        check_range("tau", c.taus, 0.0, 1.0, true, true);
        check_increasing("tau", c.taus);
        if (c.taus.size() < 3)
            field_error("tau", "the exponent fit needs at least three tau values");
        c.w_tau = {number(j, "wt_tau", 0.0)};
        c.w_1 = {number(j, "wt_1", 0.0)};
        for (double tau : c.taus) {
            const double s = std::cbrt((1 - tau) * (1 - tau));
            check_geometry("wt_1", c, tau, c.w_tau[0] * s, c.w_1[0] * s);
        }
        e["tau"] = c.taus;
        e["wt_tau"] = c.w_tau[0];
        e["wt_1"] = c.w_1[0];
        break;
    }
    case ExperimentKind::tau0_scan: {
        if (c.ic != "droplet")
            field_error("ic", "the small-tau scan is defined for the droplet");
        c.taus = number_list(j, "tau", std::nullopt);
        check_range("tau", c.taus, 0.0, 1.0, true, true);
        check_increasing("tau", c.taus);
        if (c.taus.size() < 3)
            field_error("tau", "the exponent fit needs at least three tau values");
        c.w_tau = number_list(j, "w_hat", std::vector<double>{0.0});
        for (double tau : c.taus)
            for (double wh : c.w_tau)
                check_geometry("w_hat", c, tau, wh * std::cbrt(tau * tau), 0.0);
        e["tau"] = c.taus;
        e["w_hat"] = c.w_tau;
        break;
    }
    default:
        break;
    }

    if (j.contains("table")) {
        c.table = text(j, "table", "");
        if (c.table->empty())
            field_error("table", "empty path");
        e["table"] = c.table->string();
    }
    return c;
}

// --- experiment plans ---------------------------------------------------

namespace {

struct Outcome {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<CheckReport> checks;
    std::vector<std::string> flags;
    json extra = json::object();
    /// Additional JSON artifacts, by file name in the output directory.
    std::vector<std::pair<std::string, json>> files;
};

struct Plan {
    std::vector<std::string> columns;
    std::function<std::vector<double>(std::uint64_t replica)> sample;
    std::function<void(const Samples& rows, Outcome& out)> finish;
};

std::optional<StatVarTable> load_table(const ExperimentConfig& c)
{
    if (!c.table)
        return std::nullopt;
    return StatVarTable::load(*c.table);
}

double characteristic_offset(const ExperimentConfig& c, double tau, double w_1)
{
    return c.ic == "droplet" ? tau * w_1 : w_1;
}

std::string cell_label(double tau, double w_tau, double w_1)
{
    return "tau=" + format_double(tau) + " w_tau=" + format_double(w_tau) + " w_1=" + format_double(w_1);
}

// two-time ------------------------------------------------------------------

struct Cell {
    double tau;
    double w_tau;
    double w_1;
};

Plan two_time_plan(const ExperimentConfig& c, const std::string& hash)
{
    std::vector<Cell> cells;
    for (double tau : c.taus)
        for (double wt : c.w_tau)
            for (double w1 : c.w_1)
                cells.push_back({tau, wt, w1});
    constexpr std::size_t width = 5; // l_tau, l_1, u_star, exit, touched

    Plan plan;
    for (std::size_t k = 0; k < cells.size(); ++k)
        for (const char* name : {"l_tau", "l_1", "u_star", "exit", "touched"})
            plan.columns.push_back(std::string(name) + "_" + std::to_string(k));

    plan.sample = [c, cells](std::uint64_t r) {
        const WeightField field(RandomSource(c.seed, r), config_ic(c), c.window);
        std::vector<double> row(cells.size() * width, nan);
        std::vector<double> done;
        for (const Cell& head : cells) {
            if (std::find(done.begin(), done.end(), head.w_1) != done.end())
                continue;
            done.push_back(head.w_1);
            std::vector<CharacteristicFrame> frames;
            std::vector<std::size_t> index;
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (cells[k].w_1 != head.w_1)
                    continue;
                frames.push_back(CharacteristicFrame::for_field(field, c.n, cells[k].tau, cells[k].w_tau, head.w_1));
                index.push_back(k);
            }
            const auto samples = two_time_samples(field, frames, true);
            for (std::size_t s = 0; s < samples.size(); ++s) {
                double* out = row.data() + index[s] * width;
                out[0] = samples[s].l_tau;
                out[1] = samples[s].l_1;
                out[2] = samples[s].u_star;
                out[3] = samples[s].exit ? static_cast<double>(samples[s].exit->z) / frames[s].spatial_unit() : nan;
                out[4] = samples[s].window_touched ? 1.0 : 0.0;
            }
        }
        return row;
    };

    plan.finish = [c, cells, hash](const Samples& rows, Outcome& out) {
        out.header = {"N",        "tau",    "w_tau",   "w_1",    "ic",        "replicas",  "mean_l_tau",
                      "mean_l1",  "var_l_tau", "var_l1", "cov",     "var_diff", "cov_ci_lo", "cov_ci_hi"};
        for (int m = 1; m <= 5; ++m)
            out.header.push_back("crossing_exceed_M" + std::to_string(m));
        out.header.push_back("flags");
        out.header.push_back("config_hash");
        if (rows.size() < 2) {
            out.flags.push_back("fewer than two replicas: no statistics");
            return;
        }
        const auto table = load_table(c);
        const bool stationary = c.ic == "stationary-a" || c.ic == "stationary-b";
        std::vector<MomentAccumulator> accs;
        json cells_json = json::array();
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const Cell& cell = cells[k];
            const std::size_t base = k * width;
            const std::string label = cell_label(cell.tau, cell.w_tau, cell.w_1);
            const auto acc = moments(rows, base, base + 1, label);
            accs.push_back(acc);
            const auto cov = cov_estimate(c, rows, base, base + 1, "cov " + label);

            Samples dev(rows.size(), std::vector<double>(1));
            std::int64_t touched = 0;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                dev[r][0] = std::abs(rows[r][base + 2] - characteristic_offset(c, cell.tau, cell.w_1));
                touched += rows[r][base + 4] != 0.0;
            }
            const auto tails = exceedances(dev, 0, {1, 2, 3, 4, 5});
            std::vector<std::string> flags;
            if (touched > 0)
                flags.push_back("window_touched=" + std::to_string(touched));

            std::vector<std::string> line{fmt_int(c.n),         fmt(cell.tau),        fmt(cell.w_tau),
                                          fmt(cell.w_1),        c.ic,                 fmt_int(acc.count()),
                                          fmt(acc.mean_tau()),  fmt(acc.mean_1()),    fmt(acc.var_tau()),
                                          fmt(acc.var_1()),     fmt(acc.cov()),       fmt(acc.var_diff()),
                                          fmt(cov.lo),          fmt(cov.hi)};
            for (std::size_t m = 0; m < 5; ++m)
                line.push_back(fmt(tails.fraction(m)));
            line.push_back(join_flags(flags));
            line.push_back(hash);
            out.rows.push_back(std::move(line));
            cells_json.push_back({{"tau", cell.tau}, {"w_tau", cell.w_tau}, {"w_1", cell.w_1},
                                  {"cov", estimate_json(cov)}, {"window_touched", touched}});
            if (touched > 0)
                out.flags.push_back(label + ": window_touched=" + std::to_string(touched));

            if (table && stationary) {
                CheckReport rep;
                rep.name = "stationary covariance formula (" + label + ")";
                rep.inputs = {{"tau", cell.tau}, {"w_tau", cell.w_tau}, {"w_1", cell.w_1},
                              {"table_N_ref", table->provenance().n_ref}};
                rep.observed = cov;
                rep.samples = acc.count();
                rep.rule = "|cov - target| <= 3 * sqrt(se_cov^2 + se_target^2)";
                try {
                    rep.target = corollary_rhs(cell.tau, cell.w_tau, cell.w_1, *table);
                    rep.passed = within_combined(rep.observed, rep.target, 3.0);
                } catch (const std::domain_error& ex) {
                    rep.note = ex.what();
                    rep.passed = false;
                }
                out.checks.push_back(std::move(rep));
            }
        }
        out.checks.insert(out.checks.begin(), identity_report(accs));
        out.extra["cells"] = cells_json;
    };
    return plan;
}

// calibrate -----------------------------------------------------------------

Plan calibrate_plan(const ExperimentConfig& c, const std::string& hash)
{
    Plan plan;
    for (std::size_t k = 0; k < c.w_grid.size(); ++k)
        plan.columns.push_back("l_" + std::to_string(k));
    plan.sample = [c](std::uint64_t r) { return calibration_sample(RandomSource(c.seed, r), c.n_ref, c.w_grid); };
    plan.finish = [c, hash](const Samples& rows, Outcome& out) {
        out.header = {"w", "V", "ci_lo", "ci_hi", "se", "mean", "mean_ci_lo", "mean_ci_hi", "N_ref", "replicas",
                      "config_hash"};
        if (rows.size() < 2) {
            out.flags.push_back("fewer than two replicas: no statistics");
            return;
        }
        StatVarProvenance prov;
        prov.n_ref = c.n_ref;
        prov.seed = c.seed;
        prov.created = c.created;
        prov.confidence = c.confidence;
        const auto table = stat_var_table_from_samples(c.w_grid, rows, prov, c.bootstrap);
        out.files.emplace_back("stat_var_table.json", table.to_json());

        std::vector<EstimateWithCI> means;
        for (std::size_t k = 0; k < c.w_grid.size(); ++k) {
            const auto m = tree_reduce<ScalarMoments>(rows.size(), [&](std::size_t lo, std::size_t hi) {
                ScalarMoments s;
                for (std::size_t r = lo; r < hi; ++r)
                    s.add(rows[r][k]);
                return s;
            });
            means.push_back(normal_ci(m.mean(), m.std_error(), 0.99));
            const auto& e = table.entries()[k];
            out.rows.push_back({fmt(e.w), fmt(e.v), fmt(e.ci_lo), fmt(e.ci_hi), fmt(e.se), fmt(means[k].point),
                                fmt(means[k].lo), fmt(means[k].hi), fmt_int(c.n_ref), fmt_int(std::ssize(rows)),
                                hash});
        }

        const auto zero = std::find(c.w_grid.begin(), c.w_grid.end(), 0.0);
        if (zero != c.w_grid.end()) {
            const auto& m = means[static_cast<std::size_t>(zero - c.w_grid.begin())];
            CheckReport rep;
            rep.name = "stationary mean";
            rep.inputs = {{"N_ref", c.n_ref}, {"w", 0.0}};
            rep.observed = m;
            rep.target = {0.0, 0.0, 0.0, 0.0, 0.99, "exact: E L(N,N) = 4N"};
            rep.rule = "rescaled mean 0 inside the 99% CI";
            rep.passed = m.lo <= 0.0 && 0.0 <= m.hi;
            rep.samples = std::ssize(rows);
            out.checks.push_back(rep);
        }

        std::vector<std::pair<std::size_t, std::size_t>> mirrored;
        for (std::size_t a = 0; a < c.w_grid.size(); ++a)
            for (std::size_t b = 0; b < c.w_grid.size(); ++b)
                if (c.w_grid[a] > 0.0 && std::abs(c.w_grid[a] + c.w_grid[b]) < 1e-12)
                    mirrored.emplace_back(a, b);
        if (!mirrored.empty()) {
            const double alpha = sidak_level(0.01, static_cast<int>(mirrored.size()));
            const double z = normal_z(1.0 - alpha);
            CheckReport rep;
            rep.name = "reflection symmetry";
            rep.rule = "|V(w) - V(-w)| <= z * sqrt(se(w)^2 + se(-w)^2), Sidak-corrected 99% over all pairs";
            rep.passed = true;
            double worst = 0.0;
            for (const auto& [a, b] : mirrored) {
                const auto& ea = table.entries()[a];
                const auto& eb = table.entries()[b];
                const double ratio = std::abs(ea.v - eb.v) / std::hypot(ea.se, eb.se);
                worst = std::max(worst, ratio);
                rep.passed = rep.passed && ratio <= z;
            }
            rep.observed = {worst, 0.0, worst, worst, 1.0, "largest standardized difference"};
            rep.target = {0.0, 0.0, 0.0, z, 1.0 - alpha, "normal"};
            rep.inputs = {{"pairs", mirrored.size()}};
            rep.samples = std::ssize(rows);
            out.checks.push_back(rep);
        }
    };
    return plan;
}

// compare-lemma -------------------------------------------------------------

Plan compare_plan(const ExperimentConfig& c, const std::string& hash)
{
    Plan plan;
    plan.columns = {"pairs_checked", "upper_hypothesis", "lower_hypothesis", "violations", "worst_excess"};
    const auto pairs = staircase_pairs(c.n, c.step, c.steps);
    plan.sample = [c, pairs](std::uint64_t r) {
        const RandomSource src(c.seed, r);
        const InitialCondition ic = config_ic(c);
        const WeightField other(src, ic, c.window);
        const WeightField stationary = c.ic == "droplet" ? WeightField(src, StationaryA{c.rho})
                                                         : WeightField(src, StationaryB{c.rho}, c.window);
        const auto t = comparison_violations(stationary, other, pairs);
        return std::vector<double>{static_cast<double>(t.pairs_checked), static_cast<double>(t.upper_hypothesis),
                                   static_cast<double>(t.lower_hypothesis), static_cast<double>(t.violations),
                                   t.worst_excess};
    };
    plan.finish = [c, hash, npairs = pairs.size()](const Samples& rows, Outcome& out) {
        out.header = {"ic",         "stationary", "N",          "rho",         "replicas",
                      "pairs_checked", "upper_hypothesis", "lower_hypothesis", "violations", "worst_excess",
                      "config_hash"};
        ComparisonTally t;
        for (const auto& r : rows) {
            ComparisonTally one;
            one.replicas = 1;
            one.pairs_checked = static_cast<std::int64_t>(r[0]);
            one.upper_hypothesis = static_cast<std::int64_t>(r[1]);
            one.lower_hypothesis = static_cast<std::int64_t>(r[2]);
            one.violations = static_cast<std::int64_t>(r[3]);
            one.worst_excess = r[4];
            t.merge(one);
        }
        const std::string stationary = c.ic == "droplet" ? "stationary-a" : "stationary-b";
        out.rows.push_back({c.ic, stationary, fmt_int(c.n), fmt(c.rho), fmt_int(t.replicas),
                            fmt_int(t.pairs_checked), fmt_int(t.upper_hypothesis), fmt_int(t.lower_hypothesis),
                            fmt_int(t.violations), fmt(t.worst_excess), hash});
        CheckReport rep;
        rep.name = "comparison lemma (" + c.ic + " vs " + stationary + ")";
        rep.inputs = {{"N", c.n}, {"rho", c.rho}, {"pairs_per_replica", npairs}, {"step", c.step},
                      {"steps", c.steps}, {"upper_hypothesis", t.upper_hypothesis},
                      {"lower_hypothesis", t.lower_hypothesis}};
        rep.observed = {static_cast<double>(t.violations), 0.0, static_cast<double>(t.violations),
                        static_cast<double>(t.violations), 1.0, "count"};
        rep.target = {0.0, 0.0, 0.0, 0.0, 1.0, "exact"};
        rep.rule = "exactly 0 violations";
        rep.passed = t.violations == 0;
        rep.samples = t.replicas;
        rep.note = "worst excess " + format_double(t.worst_excess);
        out.checks.push_back(rep);
    };
    return plan;
}

// exit-tails ----------------------------------------------------------------

CheckReport localization_report(const std::string& what, const std::vector<double>& m, const std::vector<double>& f,
                                std::int64_t n)
{
    CheckReport rep;
    rep.name = "localization: " + what;
    rep.rule = "fractions strictly decreasing in M and below C exp(-c M^2) with least-squares c > 0";
    rep.samples = n;
    bool strictly = true;
    for (std::size_t k = 1; k < f.size(); ++k)
        strictly = strictly && f[k] < f[k - 1];

    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f[k] > 0.0)
            pts.emplace_back(m[k] * m[k], std::log(f[k]));
    double c = nan;
    if (pts.size() >= 2) {
        double mx = 0.0;
        double my = 0.0;
        for (const auto& [x, y] : pts) {
            mx += x;
            my += y;
        }
        mx /= static_cast<double>(pts.size());
        my /= static_cast<double>(pts.size());
        double sxy = 0.0;
        double sxx = 0.0;
        for (const auto& [x, y] : pts) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
        }
        c = -sxy / sxx;
    }
    bool below = std::isfinite(c);
    double prefactor = nan;
    if (below) {
        prefactor = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k)
            prefactor = std::max(prefactor, f[k] * std::exp(c * m[k] * m[k]));
        for (std::size_t k = 0; k < f.size(); ++k)
            below = below && f[k] <= prefactor * std::exp(-c * m[k] * m[k]) * (1 + 1e-12);
    }
    rep.inputs = {{"M", m}, {"fractions", f}, {"strictly_decreasing", strictly}, {"c", c},
                  {"prefactor", prefactor}};
    rep.observed = {c, 0.0, c, c, 1.0, "least-squares decay rate"};
    rep.target = {0.0, 0.0, 0.0, std::numeric_limits<double>::infinity(), 1.0, "c > 0"};
    rep.passed = strictly && below && c > 0.0;
    const auto zero = std::find(f.begin(), f.end(), 0.0);
    if (zero != f.end()) {
        rep.note = "no exceedance observed from M = " + format_double(m[static_cast<std::size_t>(zero - f.begin())]) +
                   " on; the resolution is 1/" + std::to_string(n);
    }
    return rep;
}

Plan exit_tails_plan(const ExperimentConfig& c, const std::string& hash)
{
    Plan plan;
    plan.columns = {"exit_dev", "crossing_dev"};
    for (std::size_t a = 0; a < c.kappa.size(); ++a)
        for (std::size_t b = 0; b < c.m_grid.size(); ++b)
            plan.columns.push_back("omega_c_" + std::to_string(a) + "_" + std::to_string(b));

    plan.sample = [c](std::uint64_t r) {
        const RandomSource src(c.seed, r);
        const InitialCondition ic = config_ic(c);
        const WeightField field(src, ic, c.window);
        const double tau = c.taus[0];
        const double w_1 = c.w_1[0];
        const CharacteristicFrame frame(c.n, tau, 0.0, w_1, -c.window);
        const double unit = frame.spatial_unit();
        const Point e1 = endpoint_of(frame, Endpoint::one);
        const Point i0 = endpoint_of(frame, 0.0);
        std::vector<Point> targets{e1, i0};
        for (double m : c.m_grid) {
            targets.push_back(endpoint_of(frame, m));
            targets.push_back(endpoint_of(frame, -m));
        }
        SweepOptions opts;
        opts.tape = true;
        const auto swept = sweep(field, Region::covering(field, targets), opts);
        const auto& tape = swept.tape;

        std::vector<double> row;
        row.push_back(std::abs(static_cast<double>(exit_point(tape, e1, ic).z) / unit - w_1));
        const Point cross = tape->crossing(e1, frame.tau_level());
        row.push_back(std::abs(static_cast<double>(cross.i - frame.tau_diagonal()) / unit - w_1));

        std::vector<std::int64_t> z_plus_m;
        std::vector<std::int64_t> z_minus_m;
        for (double m : c.m_grid) {
            z_plus_m.push_back(exit_point(tape, endpoint_of(frame, m), ic).z);
            z_minus_m.push_back(exit_point(tape, endpoint_of(frame, -m), ic).z);
        }
        const std::vector<Point> origin{i0};
        for (double kappa : c.kappa) {
            const double shift = kappa / std::cbrt(static_cast<double>(c.n));
            const WeightField plus(src, StationaryB{0.5 + shift}, c.window);
            const WeightField minus(src, StationaryB{0.5 - shift}, c.window);
            const auto sp = sweep(plus, Region::covering(plus, origin), opts);
            const auto sm = sweep(minus, Region::covering(minus, origin), opts);
            const auto zp = exit_point(sp.tape, i0, plus.ic()).z;
            const auto zm = exit_point(sm.tape, i0, minus.ic()).z;
            for (std::size_t b = 0; b < c.m_grid.size(); ++b)
                row.push_back(zp >= z_plus_m[b] && zm <= z_minus_m[b] ? 0.0 : 1.0);
        }
        return row;
    };

    plan.finish = [c, hash](const Samples& rows, Outcome& out) {
        out.header = {"ic", "N", "tau", "w_1", "M", "kappa", "replicas", "exit_exceed", "crossing_exceed", "omega_c",
                      "config_hash"};
        if (rows.empty()) {
            out.flags.push_back("no replicas");
            return;
        }
        const auto exit_tail = exceedances(rows, 0, c.m_grid);
        const auto cross_tail = exceedances(rows, 1, c.m_grid);
        std::vector<double> fe;
        std::vector<double> fc;
        const auto n = static_cast<std::int64_t>(rows.size());
        for (std::size_t b = 0; b < c.m_grid.size(); ++b) {
            fe.push_back(exit_tail.fraction(b));
            fc.push_back(cross_tail.fraction(b));
            auto row = [&](const std::string& kappa, double omega) {
                out.rows.push_back({c.ic, fmt_int(c.n), fmt(c.taus[0]), fmt(c.w_1[0]), fmt(c.m_grid[b]), kappa,
                                    fmt_int(n), fmt(fe[b]), fmt(fc[b]), omega == omega ? fmt(omega) : "", hash});
            };
            if (c.kappa.empty())
                row("", nan);
            for (std::size_t a = 0; a < c.kappa.size(); ++a) {
                double count = 0.0;
                for (const auto& r : rows)
                    count += r[2 + a * c.m_grid.size() + b];
                row(fmt(c.kappa[a]), count / static_cast<double>(n));
            }
        }
        if (c.m_grid.size() >= 2) {
            out.checks.push_back(localization_report("exit point", c.m_grid, fe, n));
            out.checks.push_back(localization_report("crossing point", c.m_grid, fc, n));
        }
    };
    return plan;
}

// tau1-scan -----------------------------------------------------------------

Plan tau1_plan(const ExperimentConfig& c, const std::string& hash)
{
    Plan plan;
    for (std::size_t k = 0; k < c.taus.size(); ++k)
        for (const char* name : {"l_tau", "l_1", "touched"})
            plan.columns.push_back(std::string(name) + "_" + std::to_string(k));
    const bool line = starts_from_line(config_ic(c));

    plan.sample = [c, line](std::uint64_t r) {
        const WeightField field(RandomSource(c.seed, r), config_ic(c), c.window);
        std::vector<double> row(3 * c.taus.size(), nan);
        std::map<double, std::vector<std::size_t>> by_w1;
        std::vector<CharacteristicFrame> frames;
        for (std::size_t k = 0; k < c.taus.size(); ++k) {
            const double s = std::cbrt((1 - c.taus[k]) * (1 - c.taus[k]));
            frames.push_back(CharacteristicFrame::for_field(field, c.n, c.taus[k], c.w_tau[0] * s, c.w_1[0] * s));
            by_w1[frames.back().w_1()].push_back(k);
        }
        for (const auto& [w1, ks] : by_w1) {
            (void)w1;
            std::vector<CharacteristicFrame> group;
            for (std::size_t k : ks)
                group.push_back(frames[k]);
            const auto samples = two_time_samples(field, group, line);
            for (std::size_t s = 0; s < ks.size(); ++s) {
                row[3 * ks[s]] = samples[s].l_tau;
                row[3 * ks[s] + 1] = samples[s].l_1;
                row[3 * ks[s] + 2] = samples[s].window_touched ? 1.0 : 0.0;
            }
        }
        return row;
    };

    plan.finish = [c, hash](const Samples& rows, Outcome& out) {
        out.header = {"N",          "tau",        "wt_tau",        "wt_1",   "ic",        "replicas",
                      "var_diff",   "var_diff_se", "var_diff_ci_lo", "var_diff_ci_hi", "target", "target_ci_lo",
                      "target_ci_hi", "flags",     "config_hash"};
        if (rows.size() < 2) {
            out.flags.push_back("fewer than two replicas: no statistics");
            return;
        }
        const auto table = load_table(c);
        std::vector<MomentAccumulator> accs;
        std::vector<std::pair<double, double>> points;
        for (std::size_t k = 0; k < c.taus.size(); ++k) {
            const double tau = c.taus[k];
            const std::string label = "tau=" + format_double(tau);
            accs.push_back(moments(rows, 3 * k, 3 * k + 1, label));
            const auto vd = var_diff_estimate(c, rows, 3 * k, 3 * k + 1, "var_diff " + label);
            points.emplace_back(1.0 - tau, vd.point);
            std::int64_t touched = 0;
            for (const auto& r : rows)
                touched += r[3 * k + 2] != 0.0;
            std::vector<std::string> flags;
            if (touched > 0) {
                flags.push_back("window_touched=" + std::to_string(touched));
                out.flags.push_back(label + ": window_touched=" + std::to_string(touched));
            }
            std::vector<std::string> line{fmt_int(c.n), fmt(tau),      fmt(c.w_tau[0]), fmt(c.w_1[0]), c.ic,
                                          fmt_int(std::ssize(rows)), fmt(vd.point), fmt(vd.se), fmt(vd.lo),
                                          fmt(vd.hi)};
            if (table) {
                try {
                    const auto t = tau1_target(tau, c.w_tau[0], c.w_1[0], *table);
                    line.insert(line.end(), {fmt(t.point), fmt(t.lo), fmt(t.hi)});
                } catch (const std::domain_error& ex) {
                    line.insert(line.end(), {"", "", ""});
                    flags.push_back("target_unavailable");
                }
            } else {
                line.insert(line.end(), {"", "", ""});
            }
            line.push_back(join_flags(flags));
            line.push_back(hash);
            out.rows.push_back(std::move(line));
        }
        out.checks.push_back(identity_report(accs));

        CheckReport rep;
        rep.name = "near-one variance exponent";
        rep.rule = "log-log slope of Var(l_1 - l_tau) against 1 - tau in [0.55, 0.80]";
        rep.target = {2.0 / 3.0, 0.0, 0.55, 0.80, 1.0, "exponent window"};
        rep.samples = std::ssize(rows);
        rep.inputs = {{"tau", c.taus}, {"wt_tau", c.w_tau[0]}, {"wt_1", c.w_1[0]}, {"ic", c.ic}};
        bool positive = true;
        for (const auto& [x, y] : points)
            positive = positive && y > 0.0;
        if (positive) {
            const auto fit = loglog_slope(points);
            rep.observed = normal_ci(fit.slope, fit.stderr_slope, 0.95);
            rep.observed.method = "least squares";
            rep.passed = fit.slope >= 0.55 && fit.slope <= 0.80;
        } else {
            rep.note = "nonpositive variance estimate";
        }
        out.checks.push_back(rep);
    };
    return plan;
}

// tau0-scan -----------------------------------------------------------------

Plan tau0_plan(const ExperimentConfig& c, const std::string& hash)
{
    struct Entry {
        double tau;
        double w_hat;
    };
    std::vector<Entry> entries;
    for (double wh : c.w_tau)
        for (double tau : c.taus)
            entries.push_back({tau, wh});

    Plan plan;
    for (std::size_t k = 0; k < entries.size(); ++k)
        for (const char* name : {"l_tau", "l_1"})
            plan.columns.push_back(std::string(name) + "_" + std::to_string(k));

    plan.sample = [c, entries](std::uint64_t r) {
        const WeightField field(RandomSource(c.seed, r), config_ic(c), c.window);
        std::vector<CharacteristicFrame> frames;
        for (const auto& e : entries)
            frames.push_back(CharacteristicFrame::for_field(field, c.n, e.tau, e.w_hat * std::cbrt(e.tau * e.tau), 0.0));
        const auto samples = two_time_samples(field, frames, false);
        std::vector<double> row;
        for (const auto& s : samples) {
            row.push_back(s.l_tau);
            row.push_back(s.l_1);
        }
        return row;
    };

    plan.finish = [c, entries, hash](const Samples& rows, Outcome& out) {
        out.header = {"N",      "tau",       "w_hat",     "ic",     "replicas", "cov",
                      "cov_se", "cov_ci_lo", "cov_ci_hi", "plateau", "config_hash"};
        if (rows.size() < 2) {
            out.flags.push_back("fewer than two replicas: no statistics");
            return;
        }
        std::vector<MomentAccumulator> accs;
        std::map<double, std::vector<EstimateWithCI>> by_w;
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& e = entries[k];
            const std::string label = "tau=" + format_double(e.tau) + " w_hat=" + format_double(e.w_hat);
            accs.push_back(moments(rows, 2 * k, 2 * k + 1, label));
            const auto cov = cov_estimate(c, rows, 2 * k, 2 * k + 1, "cov " + label);
            by_w[e.w_hat].push_back(cov);
            out.rows.push_back({fmt_int(c.n), fmt(e.tau), fmt(e.w_hat), c.ic, fmt_int(std::ssize(rows)),
                                fmt(cov.point), fmt(cov.se), fmt(cov.lo), fmt(cov.hi),
                                fmt(cov.point / std::cbrt(e.tau * e.tau)), hash});
        }
        out.checks.push_back(identity_report(accs));
        json plateaus = json::array();
        for (const auto& [wh, covs] : by_w) {
            auto rep = tau0_target(c.taus, covs, wh);
            rep.samples = std::ssize(rows);
            plateaus.push_back({{"w_hat", wh}, {"plateau", rep.inputs["plateau"]},
                                {"plateau_spread", rep.inputs["plateau_spread"]}, {"slope", estimate_json(rep.observed)}});
            if (wh == 0.0)
                out.checks.push_back(std::move(rep));
        }
        out.extra["plateaus"] = plateaus;
    };
    return plan;
}

// height-demo ---------------------------------------------------------------

Plan height_plan(const ExperimentConfig& c, const std::string& hash)
{
    Plan plan;
    const std::int64_t width = 2 * c.observe + 1;
    for (std::int64_t t = 0; t <= c.t_max; ++t)
        for (std::int64_t x = -c.observe; x <= c.observe; ++x)
            plan.columns.push_back("h_" + std::to_string(t) + "_" + std::to_string(x));
    plan.sample = [c](std::uint64_t r) {
        const WeightField field(RandomSource(c.seed, r), config_ic(c), c.window);
        std::vector<double> row;
        for (const auto& snap : height_evolve(field, c.t_max, c.observe))
            for (std::int64_t x = -c.observe; x <= c.observe; ++x)
                row.push_back(snap.at(x));
        return row;
    };
    plan.finish = [c, hash, width](const Samples& rows, Outcome& out) {
        out.header = {"t", "x", "replicas", "mean_h", "var_h", "config_hash"};
        for (std::int64_t t = 0; t <= c.t_max; ++t) {
            for (std::int64_t x = -c.observe; x <= c.observe; ++x) {
                const auto col = static_cast<std::size_t>(t * width + x + c.observe);
                ScalarMoments m;
                bool finite = !rows.empty();
                for (const auto& r : rows) {
                    finite = finite && std::isfinite(r[col]);
                    m.add(r[col]);
                }
                if (!finite)
                    continue;
                out.rows.push_back({fmt_int(t), fmt_int(x), fmt_int(m.count()), fmt(m.mean()),
                                    m.count() >= 2 ? fmt(m.variance()) : "", hash});
            }
        }
    };
    return plan;
}

Plan make_plan(const ExperimentConfig& c, const std::string& hash)
{
    switch (c.kind) {
    case ExperimentKind::two_time:
        return two_time_plan(c, hash);
    case ExperimentKind::calibrate:
        return calibrate_plan(c, hash);
    case ExperimentKind::compare_lemma:
        return compare_plan(c, hash);
    case ExperimentKind::exit_tails:
        return exit_tails_plan(c, hash);
    case ExperimentKind::tau1_scan:
        return tau1_plan(c, hash);
    case ExperimentKind::tau0_scan:
        return tau0_plan(c, hash);
    case ExperimentKind::height_demo:
        return height_plan(c, hash);
    }
    throw std::logic_error("unhandled experiment kind");
}

// --- persistence --------------------------------------------------------

void write_samples(const fs::path& path, const std::vector<std::string>& columns, const Samples& rows)
{
    std::vector<std::string> header{"replica"};
    header.insert(header.end(), columns.begin(), columns.end());
    std::vector<std::vector<std::string>> cells;
    cells.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<std::string> line{std::to_string(r)};
        for (double x : rows[r])
            line.push_back(format_double(x));
        cells.push_back(std::move(line));
    }
    write_csv(path, header, cells);
}

Samples read_samples(const fs::path& path, const std::vector<std::string>& columns, std::int64_t expected)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read samples " + path.string());
    std::string line;
    std::getline(in, line);
    std::string want = "replica";
    for (const auto& c : columns)
        want += "," + c;
    if (line != want)
        throw ConfigError("samples file " + path.string() + " does not match the experiment's columns");
    Samples rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<double> row;
        std::size_t pos = line.find(',');
        const auto id = std::strtoll(line.substr(0, pos).c_str(), nullptr, 10);
        if (id != static_cast<long long>(rows.size()))
            throw ConfigError("samples file " + path.string() + ": replica ids out of order");
        while (pos != std::string::npos) {
            const std::size_t next = line.find(',', pos + 1);
            row.push_back(std::strtod(line.substr(pos + 1, next - pos - 1).c_str(), nullptr));
            pos = next;
        }
        if (row.size() != columns.size())
            throw ConfigError("samples file " + path.string() + ": wrong number of fields in replica " +
                              std::to_string(id));
        rows.push_back(std::move(row));
    }
    if (static_cast<std::int64_t>(rows.size()) != expected)
        throw ConfigError("samples file " + path.string() + " holds " + std::to_string(rows.size()) +
                          " replicas, the manifest records " + std::to_string(expected));
    return rows;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    out.flush();
    if (!out)
        throw IoError("failed writing " + path.string());
}

Samples run_replicas(const Plan& plan, std::uint64_t first, std::int64_t count, int workers, json& shards)
{
    Samples rows(static_cast<std::size_t>(count));
    const int k_workers = static_cast<int>(std::min<std::int64_t>(workers, std::max<std::int64_t>(count, 1)));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k_workers));
    auto work = [&](int w) {
        try {
            for (std::int64_t r = w; r < count; r += k_workers)
                rows[static_cast<std::size_t>(r)] = plan.sample(first + static_cast<std::uint64_t>(r));
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    };
    if (k_workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < k_workers; ++w)
            threads.emplace_back(work, w);
        for (auto& t : threads)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    shards = json::array();
    for (int w = 0; w < k_workers; ++w) {
        const std::int64_t n = count > w ? (count - w + k_workers - 1) / k_workers : 0;
        shards.push_back({{"worker", w}, {"first_replica", first + static_cast<std::uint64_t>(w)},
                          {"stride", k_workers}, {"count", n}});
    }
    return rows;
}

} // namespace

// --- run ----------------------------------------------------------------

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options)
{
    const auto started = std::chrono::steady_clock::now();
    const std::string hash = config_hash(config);
    const Plan plan = make_plan(config, hash);

    Samples rows;
    std::int64_t resumed = 0;
    if (options.resume) {
        const json old = read_json_file(*options.resume);
        const std::string old_hash = old.value("config_hash", std::string());
        if (old_hash != hash)
            throw ConfigError("config hash mismatch: manifest " + options.resume->string() + " has " + old_hash +
                              ", the current config hashes to " + hash + "; refusing to resume");
        resumed = old.at("high_water_mark").get<std::int64_t>();
        const fs::path samples = options.resume->parent_path() / old.at("outputs").at("samples").get<std::string>();
        rows = read_samples(samples, plan.columns, resumed);
    }

    json shards;
    auto fresh = run_replicas(plan, static_cast<std::uint64_t>(resumed), config.replicas, config.workers, shards);
    rows.insert(rows.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));

    Outcome outcome;
    plan.finish(rows, outcome);

    std::error_code ec;
    fs::create_directories(options.out, ec);
    if (ec)
        throw IoError("cannot create output directory " + options.out.string() + ": " + ec.message());

    RunResult result;
    result.replicas = static_cast<std::int64_t>(rows.size());
    result.csv = options.out / (kind_name(config.kind) + ".csv");
    result.samples = options.out / "samples.csv";
    result.manifest = options.out / "manifest.json";
    result.checks = outcome.checks;

    write_samples(result.samples, plan.columns, rows);
    write_csv(result.csv, outcome.header, outcome.rows);
    json outputs = {{"csv", result.csv.filename().string()}, {"samples", result.samples.filename().string()}};
    for (const auto& [name, content] : outcome.files) {
        write_json(options.out / name, content);
        outputs[fs::path(name).stem().string()] = name;
    }

    json checks = json::array();
    for (const auto& c : outcome.checks)
        checks.push_back(to_json(c));
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const json manifest = {{"format", "lpplab-manifest/1"},
                           {"kind", kind_name(config.kind)},
                           {"config", config.echo},
                           {"config_hash", hash},
                           {"code_version", LPPLAB_VERSION},
                           {"master_seed", config.seed},
                           {"replica_seeding", "replica r uses key (master_seed, r)"},
                           {"replicas", result.replicas},
                           {"high_water_mark", result.replicas},
                           {"sample_counts", {{"resumed", resumed}, {"new", config.replicas}, {"total", result.replicas}}},
                           {"workers", config.workers},
                           {"worker_shards", shards},
                           {"wall_time_seconds", wall},
                           {"flags", outcome.flags},
                           {"checks", checks},
                           {"passed", result.passed()},
                           {"outputs", outputs},
                           {"extra", outcome.extra}};
    write_json(result.manifest, manifest);
    return result;
}

} // namespace lpplab
