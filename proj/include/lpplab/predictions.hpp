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

#include "lpplab/engine.hpp"
#include "lpplab/estimators.hpp"
#include "lpplab/weights.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lpplab {

struct StatVarEntry {
    double w = 0.0;
    double v = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double se = 0.0;
};

struct StatVarProvenance {
    std::int64_t n_ref = 0;
    std::int64_t replicas = 0;
    std::uint64_t seed = 0;
    std::string created;
    double confidence = 0.95;
    std::string method;
    std::string model = "stationary-a rho=0.5";
};

/// Calibrated variances V(w) of the rescaled stationary one-point value,
/// linearly interpolated on an increasing w-grid.
class StatVarTable {
public:
    StatVarTable(std::vector<StatVarEntry> entries, StatVarProvenance provenance);

    static StatVarTable from_json(const nlohmann::json& j);
    static StatVarTable load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void save(const std::filesystem::path& path) const;

    const std::vector<StatVarEntry>& entries() const { return entries_; }
    const StatVarProvenance& provenance() const { return provenance_; }
    double w_min() const { return entries_.front().w; }
    double w_max() const { return entries_.back().w; }

    /// Throws std::domain_error outside [w_min, w_max], naming the grid
    /// extension that would be needed.
    EstimateWithCI at(double w) const;

private:
    std::vector<StatVarEntry> entries_;
    StatVarProvenance provenance_;
};

/// Targets on the last level of an N-sweep: offsets round(w (2N)^{2/3}).
std::vector<Point> calibration_targets(std::int64_t n_ref, std::span<const double> w_grid);
/// One replica: rescaled L at every grid offset, from one sweep of the
/// rho = 1/2 stationary model on Z^2_+.
std::vector<double> calibration_sample(const RandomSource& source, std::int64_t n_ref, std::span<const double> w_grid);
/// Table from per-replica samples (rows: replicas, columns: grid).
StatVarTable stat_var_table_from_samples(std::span<const double> w_grid, const std::vector<std::vector<double>>& rows,
                                         StatVarProvenance provenance, int bootstrap_resamples = 1000);
/// Serial calibration; refuses fewer than 1000 replicas.
StatVarTable calibrate_stat_var(std::span<const double> w_grid, std::int64_t n_ref, std::int64_t replicas,
                                std::uint64_t seed, const std::string& created);

/// Right-hand side of the stationary two-time covariance formula in terms
/// of V. Terms with equal arguments are combined before the error is
/// propagated and zero coefficients are skipped.
EstimateWithCI corollary_rhs(double tau, double w_tau, double w_1, const StatVarTable& table);
/// (1 - tau)^{2/3} V(w~_1 - w~_tau).
EstimateWithCI tau1_target(double tau, double wt_tau, double wt_1, const StatVarTable& table);

struct CheckReport {
    std::string name;
    nlohmann::json inputs = nlohmann::json::object();
    EstimateWithCI observed;
    EstimateWithCI target;
    std::string rule;
    bool passed = false;
    std::int64_t samples = 0;
    std::string note;
};

nlohmann::json to_json(const CheckReport& report);

/// Small-tau droplet check: the plateau c = mean Cov / tau^{2/3} and the
/// log-log slope of Cov against tau, which must lie in [0.55, 0.80].
/// Refuses fewer than three tau values.
CheckReport tau0_target(std::span<const double> taus, std::span<const EstimateWithCI> covs, double w_hat);

struct ComparisonTally {
    std::int64_t replicas = 0;
    std::int64_t pairs_checked = 0;
    /// Pairs where the hypothesis of the upper (resp. lower) bound held.
    std::int64_t upper_hypothesis = 0;
    std::int64_t lower_hypothesis = 0;
    std::int64_t violations = 0;
    double worst_excess = 0.0;

    void merge(const ComparisonTally& other);
};

/// Points p <= q in the down-right order (p.i <= q.i, p.j >= q.j) from a
/// staircase through (n, n) with `steps` corners of size `step` each side.
std::vector<std::pair<Point, Point>> staircase_pairs(std::int64_t n, std::int64_t step, int steps);

/// Pathwise increment comparison of a model against its coupled stationary
/// version on one realization: droplet against StationaryA, or a line
/// start against StationaryB. Both fields must come from the same
/// RandomSource (and window). A violation is an increment exceeding the
/// bound by more than 1e-9 |L|.
ComparisonTally comparison_violations(const WeightField& stationary, const WeightField& other,
                                      std::span<const std::pair<Point, Point>> pairs);

} // namespace lpplab
