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

#include "lpplab/errors.hpp"
#include "lpplab/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int exit_config = 2;
constexpr int exit_check = 3;
constexpr int exit_io = 4;

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Monte Carlo lab for exponential last-passage percolation"};
    std::string kind;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> replicas;
    std::optional<int> workers;
    std::string out = ".";
    std::string resume;
    app.add_option("kind", kind,
                   "two-time | calibrate | compare-lemma | exit-tails | tau1-scan | tau0-scan | height-demo")
        ->required();
    app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--replicas", replicas, "replicas to run (with --resume: additional replicas)");
    app.add_option("--out", out, "output directory");
    app.add_option("--workers", workers, "worker threads");
    app.add_option("--resume", resume, "manifest of a run to extend");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        nlohmann::json j = lpplab::read_json_file(config_path);
        if (!j.is_object())
            throw lpplab::ConfigError("config must be a JSON object");
        if (seed)
            j["seed"] = *seed;
        if (replicas)
            j["replicas"] = *replicas;
        if (workers)
            j["workers"] = *workers;
        const auto config = lpplab::parse_config(lpplab::parse_kind(kind), j);

        lpplab::RunOptions options;
        options.out = out;
        if (!resume.empty())
            options.resume = resume;
        const auto result = lpplab::run_experiment(config, options);

        std::cout << lpplab::kind_name(config.kind) << ": " << result.replicas << " replicas, config "
                  << lpplab::config_hash(config) << "\n"
                  << "  csv      " << result.csv.string() << "\n"
                  << "  manifest " << result.manifest.string() << "\n";
        for (const auto& check : result.checks) {
            std::cout << "  [" << (check.passed ? "PASS" : "FAIL") << "] " << check.name << ": observed "
                      << check.observed.point << ", rule: " << check.rule;
            if (!check.note.empty())
                std::cout << " (" << check.note << ")";
            std::cout << "\n";
        }
        return result.passed() ? 0 : exit_check;
    } catch (const lpplab::ConfigError& e) {
        std::cerr << "lpplab: " << e.what() << "\n";
        return exit_config;
    } catch (const lpplab::IoError& e) {
        std::cerr << "lpplab: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "lpplab: " << e.what() << "\n";
        return 1;
    }
}
