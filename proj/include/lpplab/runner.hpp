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

#include "lpplab/predictions.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lpplab {

enum class ExperimentKind { two_time, calibrate, compare_lemma, exit_tails, tau1_scan, tau0_scan, height_demo };

std::string kind_name(ExperimentKind kind);
/// Throws ConfigError for an unknown kind.
ExperimentKind parse_kind(const std::string& name);

/// Validated experiment parameters. `echo` is the normalized configuration
/// with every default filled in; it is what the hash and manifest see.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::two_time;
    nlohmann::json echo = nlohmann::json::object();

    std::int64_t n = 0;
    std::string ic = "flat";
    double rho = 0.5;
    double sigma = 1.0;
    std::int64_t window = 0;
    std::int64_t replicas = 0;
    std::uint64_t seed = 0;
    int workers = 1;
    int bootstrap = 1000;
    double confidence = 0.95;

    /// two-time, tau1-scan, tau0-scan; exit-tails uses taus[0].
    std::vector<double> taus;
    /// two-time: w_tau and w_1 grids. tau1-scan: wt_tau, wt_1 (one value
    /// each). tau0-scan: w_hat grid in w_tau. exit-tails: w_1[0].
    std::vector<double> w_tau{0.0};
    std::vector<double> w_1{0.0};
    std::vector<double> m_grid{1, 2, 3, 4, 5};
    std::vector<double> kappa;

    /// calibrate
    std::int64_t n_ref = 0;
    std::vector<double> w_grid;
    std::string created;

    /// compare-lemma
    std::int64_t step = 0;
    int steps = 3;

    /// height-demo
    std::int64_t t_max = 0;
    std::int64_t observe = 0;

    std::optional<std::filesystem::path> table;
};

/// Validates every field up front; ConfigError names the offending field.
ExperimentConfig parse_config(ExperimentKind kind, const nlohmann::json& j);
/// IoError when unreadable, ConfigError when not valid JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical echo without replicas, workers and out,
/// as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct RunOptions {
    std::filesystem::path out = ".";
    /// Manifest of an earlier run; replica ids continue from its
    /// high-water mark and config.replicas more are added.
    std::optional<std::filesystem::path> resume;
};

struct RunResult {
    std::filesystem::path csv;
    std::filesystem::path manifest;
    std::filesystem::path samples;
    std::int64_t replicas = 0;
    std::vector<CheckReport> checks;

    bool passed() const;
};

/// Deterministic given (config, seed): replica r draws from
/// RandomSource(seed, r) whatever the worker count, and all statistics are
/// computed from the per-replica samples in replica order.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// 17 significant digits, round-trip exact; "nan", "inf", "-inf" otherwise.
std::string format_double(double x);

/// LF line endings, header always written. Throws IoError.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

} // namespace lpplab
