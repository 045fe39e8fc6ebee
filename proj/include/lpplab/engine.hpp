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
#include "lpplab/weights.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace lpplab {

/// Admissible cells of one sweep. The start set lies on level s:
/// {(k, s - k) : start_lo <= k <= start_hi}. Cells are kept when they are
/// reachable from it and lie in the backward cone
/// {i <= i_max, j <= j_max, i + j <= level_max} of the targets.
class Region {
public:
    /// Start set {from}; used for the origin variants and point-to-point.
    static Region from_point(Point from, std::int64_t i_max, std::int64_t j_max, std::int64_t level_max);
    /// Start set {(k,-k) : |k| <= window}.
    static Region from_line(std::int64_t window, std::int64_t i_max, std::int64_t j_max,
                            std::int64_t level_max);
    /// Smallest region of the field's initial condition that contains all
    /// targets. Throws std::domain_error if a target is unreachable.
    static Region covering(const WeightField& field, std::span<const Point> targets);

    bool line_start() const { return line_; }
    std::int64_t start_level() const { return start_level_; }
    std::int64_t level_max() const { return level_max_; }
    std::int64_t i_max() const { return i_max_; }
    std::int64_t j_max() const { return j_max_; }
    std::int64_t start_lo() const { return start_lo_; }
    std::int64_t start_hi() const { return start_hi_; }

    std::int64_t lo(std::int64_t level) const;
    std::int64_t hi(std::int64_t level) const;
    std::int64_t width(std::int64_t level) const { return hi(level) - lo(level) + 1; }
    bool contains(Point p) const;
    std::int64_t max_width() const;
    std::int64_t cell_count() const;

private:
    Region(bool line, std::int64_t start_level, std::int64_t start_lo, std::int64_t start_hi,
           std::int64_t i_max, std::int64_t j_max, std::int64_t level_max);

    bool line_ = false;
    std::int64_t start_level_ = 0;
    std::int64_t start_lo_ = 0;
    std::int64_t start_hi_ = 0;
    std::int64_t i_max_ = 0;
    std::int64_t j_max_ = 0;
    std::int64_t level_max_ = 0;
};

/// Last passage values on one anti-diagonal: values[k] belongs to
/// (i_lo + k, level - i_lo - k).
struct SweepFront {
    std::int64_t level = 0;
    std::int64_t i_lo = 0;
    std::vector<double> values;

    std::int64_t i_hi() const { return i_lo + static_cast<std::int64_t>(values.size()) - 1; }
    bool contains(std::int64_t i) const { return i >= i_lo && i <= i_hi(); }
    /// Throws std::out_of_range if column i is not on the front.
    double at(std::int64_t i) const;
    double at(Point p) const;
};

/// Non-owning view handed to sweep observers.
struct FrontView {
    std::int64_t level = 0;
    std::int64_t i_lo = 0;
    std::span<const double> values;

    double at(std::int64_t i) const { return values[static_cast<std::size_t>(i - i_lo)]; }
    bool contains(std::int64_t i) const
    {
        return i >= i_lo && i < i_lo + static_cast<std::int64_t>(values.size());
    }
};

struct SweepOptions;
struct SweepResult;
class DirectionTape;
SweepResult sweep(const WeightField& field, const Region& region, const SweepOptions& options);

/// One bit per non-start cell: 1 when the maximum came from the left
/// neighbour (horizontal step), 0 when it came from below.
class DirectionTape {
public:
    explicit DirectionTape(const Region& region);

    const Region& region() const { return region_; }
    bool from_left(Point p) const;
    /// Predecessor of a non-start cell on its maximizer.
    Point predecessor(Point p) const;
    /// Maximizer from its start cell to `end` (inclusive).
    std::vector<Point> trace(Point end) const;
    /// Point where the maximizer to `end` crosses `level`.
    Point crossing(Point end, std::int64_t level) const;
    std::size_t bit_count() const { return bits_total_; }

private:
    friend SweepResult sweep(const WeightField&, const Region&, const SweepOptions&);
    std::size_t bit_index(Point p) const;

    Region region_;
    std::vector<std::size_t> level_offset_;
    std::vector<std::uint64_t> words_;
    std::size_t bits_total_ = 0;
};

struct SweepOptions {
    /// Levels whose fronts are copied into SweepResult::recorded.
    std::vector<std::int64_t> record_levels;
    bool tape = false;
    /// Called once per level, start level included, in increasing order.
    std::function<void(const FrontView&)> observer;
};

struct SweepResult {
    SweepFront final_front;
    std::vector<SweepFront> recorded; // in the order of record_levels
    std::optional<DirectionTape> tape;

    const SweepFront& front_at(std::int64_t level) const;
};

/// Anti-diagonal dynamic programme: each value is the maximum over
/// admissible up-right paths of h0(start) + sum of weights after the start.
/// Ties prefer the horizontal step.
SweepResult sweep(const WeightField& field, const Region& region, const SweepOptions& options);
inline SweepResult sweep(const WeightField& field, const Region& region)
{
    return sweep(field, region, SweepOptions{});
}

/// L_{from -> to} with the field's weights, start weight excluded and no h0.
/// Throws std::domain_error unless from <= to coordinatewise.
double lpp_point_to_point(const WeightField& field, Point from, Point to);

/// Exhaustive maximum over the C(m+n, m) up-right paths from `from` to `to`
/// of h0_at_start + weights after the start. Refuses (std::invalid_argument)
/// lattices larger than 8x8 steps.
double brute_force_lpp(const WeightGrid& weights, Point from, Point to, double h0_at_start = 0.0);
/// Oracle for line starts: max over (k,-k) <= to, k in [k_lo, k_lo + |h0| - 1].
double brute_force_from_line(const WeightGrid& weights, std::int64_t k_lo, std::span<const double> h0, Point to);

enum class ExitKind { axis, line };

/// Axis kind (origin variants): z > 0 means the maximizer leaves the x-axis
/// at (z, 0), z < 0 the y-axis at (0, -z). Line kind: the maximizer starts
/// at (z, -z).
struct ExitPointRecord {
    ExitKind kind = ExitKind::axis;
    std::int64_t z = 0;
    Point exit{};
};

/// Throws StateError when `tape` is empty.
ExitPointRecord exit_point(const std::optional<DirectionTape>& tape, Point endpoint, const InitialCondition& ic);

/// Successive differences L(path[k+1]) - L(path[k]) along a down-right path
/// (steps (1,0) or (0,-1)) of a StationaryA or StationaryB field.
std::vector<double> stationary_increment_stream(const WeightField& field, std::span<const Point> path);

/// StationaryA field coupled to a StationaryB field: its axis weights are
/// the B-model increments along the axes up to (i_max, j_max), its bulk is
/// shared. On that box L^A = L^B - L^B(0,0), and the exit points have the
/// same sign whenever the line exit is nonzero.
WeightField burke_image(const WeightField& stationary_b, std::int64_t i_max, std::int64_t j_max);

} // namespace lpplab
