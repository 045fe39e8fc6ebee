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

#include "lpplab/errors.hpp"
#include "lpplab/runner.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lpplab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("lpplab_test_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(ExperimentKind kind, const json& j)
{
    try {
        (void)parse_config(kind, j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

json small_two_time()
{
    return {{"N", 40}, {"ic", "flat"}, {"tau", {0.5, 0.75}}, {"w_1", {0.0, 0.25}}, {"replicas", 60}, {"seed", 5},
            {"bootstrap", 200}};
}

RunResult run(const json& j, ExperimentKind kind, const fs::path& out, std::optional<fs::path> resume = {})
{
    RunOptions o;
    o.out = out;
    o.resume = resume;
    return run_experiment(parse_config(kind, j), o);
}

} // namespace

TEST_CASE("number formatting round-trips")
{
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 4.0 * std::atan(1.0)})
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("csv writing")
{
    const auto dir = scratch("csv");
    fs::create_directories(dir);
    write_csv(dir / "empty.csv", {"a", "b"}, {});
    CHECK(slurp(dir / "empty.csv") == "a,b\n");
    write_csv(dir / "rows.csv", {"a", "b"}, {{"1", "2"}, {"3", "4"}});
    CHECK(slurp(dir / "rows.csv") == "a,b\n1,2\n3,4\n");
    CHECK_THROWS_AS(write_csv(dir / "missing" / "x.csv", {"a"}, {}), IoError);
    fs::remove_all(dir);
}

TEST_CASE("kinds")
{
    CHECK(parse_kind("two-time") == ExperimentKind::two_time);
    CHECK(kind_name(ExperimentKind::tau0_scan) == "tau0-scan");
    CHECK_THROWS_AS(parse_kind("three-time"), ConfigError);
}

TEST_CASE("config validation names the field")
{
    auto j = small_two_time();
    CHECK(config_error(ExperimentKind::two_time, j).empty());

    auto bad = j;
    bad["tau"] = {0.5, 1.5};
    CHECK(config_error(ExperimentKind::two_time, bad).find("'tau'") != std::string::npos);
    bad = j;
    bad["N"] = "many";
    CHECK(config_error(ExperimentKind::two_time, bad).find("'N'") != std::string::npos);
    bad = j;
    bad.erase("replicas");
    CHECK(config_error(ExperimentKind::two_time, bad).find("'replicas'") != std::string::npos);
    bad = j;
    bad["colour"] = "blue";
    CHECK(config_error(ExperimentKind::two_time, bad).find("'colour'") != std::string::npos);
    bad = j;
    bad["ic"] = "stationary-b";
    bad["rho"] = 1.5;
    CHECK(config_error(ExperimentKind::two_time, bad).find("'ic'") != std::string::npos);
    bad = j;
    bad["ic"] = "droplet";
    bad["w_1"] = 3.0;
    CHECK(config_error(ExperimentKind::two_time, bad).find("'w_tau'") != std::string::npos);

    CHECK(config_error(ExperimentKind::calibrate, {{"N_ref", 1000}, {"replicas", 1000}}).find("'N_ref'") !=
          std::string::npos);
    CHECK(config_error(ExperimentKind::calibrate, {{"N_ref", 2000}, {"replicas", 999}}).find("'replicas'") !=
          std::string::npos);
    CHECK(config_error(ExperimentKind::tau1_scan, {{"N", 100}, {"tau", {0.8, 0.9}}, {"replicas", 10}})
              .find("'tau'") != std::string::npos);
    CHECK(config_error(ExperimentKind::tau0_scan, {{"N", 100}, {"ic", "flat"}, {"tau", {0.1, 0.2, 0.3}},
                                                   {"replicas", 10}})
              .find("'ic'") != std::string::npos);
    CHECK(config_error(ExperimentKind::exit_tails, {{"N", 100}, {"ic", "droplet"}, {"replicas", 10}})
              .find("'ic'") != std::string::npos);
    CHECK(config_error(ExperimentKind::exit_tails, {{"N", 100}, {"kappa", 3.0}, {"replicas", 10}})
              .find("'kappa'") != std::string::npos);
    CHECK(config_error(ExperimentKind::compare_lemma, {{"N", 100}, {"step", 50}, {"replicas", 10}})
              .find("'step'") != std::string::npos);
    CHECK(config_error(ExperimentKind::height_demo, {{"t_max", 10}, {"observe", 10}, {"window", 5}, {"replicas", 1}})
              .find("'window'") != std::string::npos);
}

TEST_CASE("config defaults and hash")
{
    const auto c = parse_config(ExperimentKind::two_time, small_two_time());
    CHECK(c.window == default_window(40));
    CHECK(c.echo["window"] == default_window(40));
    CHECK(c.seed == 5);
    const auto cal = parse_config(ExperimentKind::calibrate, {{"N_ref", 2000}, {"replicas", 1000}});
    CHECK(cal.w_grid.size() == 25);
    CHECK(cal.w_grid.front() == -3.0);
    CHECK(cal.w_grid.back() == 3.0);

    auto j = small_two_time();
    const auto h = config_hash(c);
    CHECK(h.size() == 16);
    j["replicas"] = 7;
    j["workers"] = 4;
    CHECK(config_hash(parse_config(ExperimentKind::two_time, j)) == h);
    j["seed"] = 6;
    CHECK(config_hash(parse_config(ExperimentKind::two_time, j)) != h);
}

TEST_CASE("two-time run emits one row per cell")
{
    const auto dir = scratch("two_time");
    const auto r = run(small_two_time(), ExperimentKind::two_time, dir);
    CHECK(r.passed());
    CHECK(r.replicas == 60);
    const auto csv = slurp(r.csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("crossing_exceed_M5,flags,config_hash\n") != std::string::npos);
    CHECK(csv.find('\r') == std::string::npos);
    const auto m = json::parse(slurp(r.manifest));
    CHECK(m["replicas"] == 60);
    CHECK(m["checks"][0]["name"] == "covariance identity");
    fs::remove_all(dir);
}

TEST_CASE("worker count does not change the output")
{
    const auto a = scratch("w1");
    const auto b = scratch("w3");
    auto j = small_two_time();
    const auto r1 = run(j, ExperimentKind::two_time, a);
    j["workers"] = 3;
    const auto r3 = run(j, ExperimentKind::two_time, b);
    CHECK(slurp(r1.csv) == slurp(r3.csv));
    CHECK(slurp(r1.samples) == slurp(r3.samples));
    auto m1 = json::parse(slurp(r1.manifest));
    auto m3 = json::parse(slurp(r3.manifest));
    for (auto* m : {&m1, &m3}) {
        for (const char* key : {"wall_time_seconds", "workers", "worker_shards", "config"})
            m->erase(key);
    }
    CHECK(m1 == m3);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("resume continues the replica sequence")
{
    const auto fresh_dir = scratch("fresh");
    const auto part_dir = scratch("part");
    auto j = small_two_time();
    const auto fresh = run(j, ExperimentKind::two_time, fresh_dir);

    j["replicas"] = 25;
    const auto first = run(j, ExperimentKind::two_time, part_dir);
    j["replicas"] = 35;
    const auto resumed = run(j, ExperimentKind::two_time, part_dir, first.manifest);
    CHECK(resumed.replicas == 60);
    CHECK(slurp(resumed.csv) == slurp(fresh.csv));
    CHECK(slurp(resumed.samples) == slurp(fresh.samples));

    const auto before = slurp(resumed.csv);
    j["replicas"] = 0;
    const auto noop = run(j, ExperimentKind::two_time, part_dir, resumed.manifest);
    CHECK(noop.replicas == 60);
    CHECK(slurp(noop.csv) == before);

    auto tampered = j;
    tampered["N"] = 41;
    try {
        (void)run(tampered, ExperimentKind::two_time, part_dir, resumed.manifest);
        CHECK(false);
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(config_hash(parse_config(ExperimentKind::two_time, tampered))) != std::string::npos);
        CHECK(msg.find(config_hash(parse_config(ExperimentKind::two_time, j))) != std::string::npos);
    }
    fs::remove_all(fresh_dir);
    fs::remove_all(part_dir);
}

TEST_CASE("empty runs write header-only csv")
{
    const auto dir = scratch("empty");
    auto j = small_two_time();
    j["replicas"] = 0;
    const auto r = run(j, ExperimentKind::two_time, dir);
    const auto csv = slurp(r.csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
    CHECK(csv.rfind("N,tau,w_tau,w_1,ic,replicas", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("unwritable output directory")
{
    CHECK_THROWS_AS(run(small_two_time(), ExperimentKind::two_time, "/proc/lpplab_cannot_write"), IoError);
}

TEST_CASE("other kinds run")
{
    const auto dir = scratch("kinds");
    SUBCASE("compare-lemma")
    {
        const auto r = run({{"N", 30}, {"ic", "droplet"}, {"rho", 0.4}, {"replicas", 20}}, ExperimentKind::compare_lemma,
                           dir);
        CHECK(r.passed());
        const auto r2 = run({{"N", 30}, {"ic", "flat"}, {"replicas", 20}}, ExperimentKind::compare_lemma, dir);
        CHECK(r2.passed());
        CHECK(slurp(r2.csv).find(",0,0,") == std::string::npos);
    }
    SUBCASE("exit-tails")
    {
        const auto r = run({{"N", 60}, {"ic", "flat"}, {"kappa", {1.0}}, {"M", {0.25, 0.5}}, {"replicas", 40}},
                           ExperimentKind::exit_tails, dir);
        CHECK(r.checks.size() == 2);
        const auto csv = slurp(r.csv);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    }
    SUBCASE("tau1-scan and tau0-scan")
    {
        const auto r = run({{"N", 50}, {"ic", "flat"}, {"tau", {0.5, 0.7, 0.9}}, {"replicas", 30}, {"bootstrap", 200}},
                           ExperimentKind::tau1_scan, dir);
        CHECK(r.checks.size() == 2);
        const auto r0 = run({{"N", 50}, {"tau", {0.1, 0.2, 0.4}}, {"w_hat", {0.0, 1.0}}, {"replicas", 30},
                             {"bootstrap", 200}},
                            ExperimentKind::tau0_scan, dir);
        CHECK(r0.checks.size() == 2);
        const auto m = json::parse(slurp(r0.manifest));
        CHECK(m["extra"]["plateaus"].size() == 2);
    }
    SUBCASE("height-demo")
    {
        const auto r = run({{"ic", "flat"}, {"t_max", 4}, {"observe", 3}, {"replicas", 5}}, ExperimentKind::height_demo,
                           dir);
        const auto csv = slurp(r.csv);
        CHECK(csv.rfind("t,x,replicas,mean_h,var_h,config_hash\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') > 20);
    }
    fs::remove_all(dir);
}
