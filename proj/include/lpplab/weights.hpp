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

#include "lpplab/lattice.hpp"
#include "lpplab/random_source.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace lpplab {

/// Point-to-point LPP from the origin. Axis cells carry Exp(1) weights
/// drawn from the boundary streams, so they are the rate-1 members of the
/// monotone family used by StationaryA.
struct Droplet {};
/// LPP from the anti-diagonal {i + j = 0} with h0 = 0.
struct Flat {};
/// Stationary LPP on Z^2_+: Exp(1-rho) on the x-axis, Exp(rho) on the
/// y-axis, zero at the origin.
struct StationaryA {
    double rho = 0.5;
};
/// Stationary LPP from the anti-diagonal with random-walk profile
/// h0(k) built from X_k ~ Exp(1-rho), Y_k ~ Exp(rho).
struct StationaryB {
    double rho = 0.5;
};
/// sigma times the rho = 1/2 profile of StationaryB.
struct RandomSigma {
    double sigma = 1.0;
};

using InitialCondition = std::variant<Droplet, Flat, StationaryA, StationaryB, RandomSigma>;

std::string ic_name(const InitialCondition& ic);
/// Parses "droplet", "flat", "stationary-a", "stationary-b", "random-sigma".
InitialCondition parse_ic(const std::string& name, double rho, double sigma);
/// Throws std::invalid_argument unless rho in (0,1) and sigma >= 0.
void validate_ic(const InitialCondition& ic);
/// True for the variants whose start set is the anti-diagonal.
bool starts_from_line(const InitialCondition& ic);

/// Default truncation half-width for the initial line, ceil(8 (2N)^{2/3}).
std::int64_t default_window(std::int64_t n);

/// Dense rectangle of explicit weights, used by the path-enumeration
/// oracle and by hand-built test instances.
class WeightGrid {
public:
    WeightGrid() = default;
    WeightGrid(Point origin, std::int64_t extent_i, std::int64_t extent_j, double fill = 0.0);

    Point origin() const { return origin_; }
    std::int64_t extent_i() const { return extent_i_; }
    std::int64_t extent_j() const { return extent_j_; }
    bool contains(Point p) const;
    double at(Point p) const;
    void set(Point p, double value);

private:
    std::size_t index(Point p) const;

    Point origin_{};
    std::int64_t extent_i_ = 0;
    std::int64_t extent_j_ = 0;
    std::vector<double> values_;
};

/// The random environment of one replica: bulk weights, boundary weights
/// and the initial profile h0, all derived from one RandomSource. Copies
/// are cheap; test hooks are shared immutable overrides.
class WeightField {
public:
    /// `window` is the truncation half-width W of the initial line and is
    /// required (> 0) for line variants; it is ignored otherwise.
    WeightField(RandomSource source, InitialCondition ic, std::int64_t window = 0);

    const RandomSource& source() const { return source_; }
    const InitialCondition& ic() const { return ic_; }
    std::int64_t window() const { return window_; }
    bool from_line() const { return starts_from_line(ic_); }

    /// Weight of a non-start cell. Origin variants: p in Z^2_+, with the
    /// origin returning 0. Line variants: level >= 1 inside the forward
    /// cone of the window. Throws std::out_of_range otherwise.
    double bulk_weight_at(Point p) const;

    /// Cumulative profile h0(k, -k) for |k| <= W. Throws std::out_of_range
    /// outside the window and std::invalid_argument for origin variants.
    double h0_at(std::int64_t k) const;
    /// h0 over [k_lo, k_hi], accumulated in the same order as h0_at.
    std::vector<double> h0_profile(std::int64_t k_lo, std::int64_t k_hi) const;

    /// Weights of cells (i, level - i), i in [i_lo, i_hi], written to out.
    /// Bit-identical to bulk_weight_at on every cell; no range checks.
    void fill_level(std::int64_t level, std::int64_t i_lo, std::int64_t i_hi, std::span<double> out) const;

    /// Boundary weights of the origin variants (index >= 1).
    double x_axis_weight(std::int64_t i) const;
    double y_axis_weight(std::int64_t j) const;

    /// Test hook: every non-start weight equals `value`; h0 is unchanged.
    WeightField with_constant_weights(double value) const;
    /// Test hook: weights read from `grid`; for line variants `h0` (if not
    /// empty) replaces the profile on [-W, W].
    WeightField with_explicit_weights(WeightGrid grid, std::vector<double> h0 = {}) const;
    /// Replaces the axis weights of an origin variant: x[i] is the weight
    /// of (i, 0), y[j] that of (0, j); entry 0 is unused.
    WeightField with_boundary(std::vector<double> x, std::vector<double> y) const;

    bool has_overrides() const { return overrides_ != nullptr; }

private:
    struct Overrides {
        std::optional<double> constant;
        std::optional<WeightGrid> grid;
        std::vector<double> h0;
        std::vector<double> x_axis;
        std::vector<double> y_axis;
    };

    double rate_x() const;
    double rate_y() const;
    double raw_bulk(Point p) const;
    double profile_increment(std::int64_t k) const;
    void check_bulk_address(Point p) const;
    Overrides& mutable_overrides();

    RandomSource source_;
    InitialCondition ic_;
    std::int64_t window_ = 0;
    std::shared_ptr<const Overrides> overrides_;
};

} // namespace lpplab
