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
#include "lpplab/lattice.hpp"
#include "lpplab/weights.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lpplab {

enum class Endpoint { tau, one };

/// Two-time geometry at size N: E_tau = (tN, tN) + d_tau (1,-1) with
/// tN = round(tau N) and d = round(w (2N)^{2/3}), E_1 likewise with N.
/// Points are checked against a coordinate floor: 0 for the origin
/// variants, -W for line starts.
class CharacteristicFrame {
public:
    CharacteristicFrame(std::int64_t n, double tau, double w_tau, double w_1, std::int64_t coordinate_floor = 0);
    /// Frame whose floor matches the field's start set.
    static CharacteristicFrame for_field(const WeightField& field, std::int64_t n, double tau, double w_tau,
                                         double w_1);

    std::int64_t n() const { return n_; }
    double tau() const { return tau_; }
    double w_tau() const { return w_tau_; }
    double w_1() const { return w_1_; }
    std::int64_t coordinate_floor() const { return floor_; }

    /// (2N)^{2/3}, the unit of all offsets.
    double spatial_unit() const;
    /// round(tau N); E_tau and I(u) lie on level 2 * tau_diagonal().
    std::int64_t tau_diagonal() const;
    std::int64_t tau_level() const { return 2 * tau_diagonal(); }
    std::int64_t offset(double u) const;

private:
    std::int64_t n_;
    double tau_;
    double w_tau_;
    double w_1_;
    std::int64_t floor_;
};

/// Throws std::domain_error naming the coordinate that leaves the region.
Point endpoint_of(const CharacteristicFrame& frame, Endpoint which);
/// I(u) on the tau level.
Point endpoint_of(const CharacteristicFrame& frame, double u);

/// (L - 4 tau N) / (2^{4/3} N^{1/3}).
double rescale(double l, std::int64_t n, double tau);
double unscale(double scaled, std::int64_t n, double tau);

struct TwoTimeSample {
    double l_tau = 0.0;
    double l_1 = 0.0;
    /// Offset of the E_1 maximizer on the tau level, in units of (2N)^{2/3}.
    double u_star = 0.0;
    /// Start of the E_1 maximizer, for initial conditions with a boundary.
    std::optional<ExitPointRecord> exit;
    /// A maximizer to E_tau or E_1 started on the edge of the truncation window.
    bool window_touched = false;
};

/// One sweep to E_1 realizes every tau level below it; samples follow the
/// order of `frames`, which must share N and w_1. With `trace` off the
/// sweep keeps no tape: u_star is NaN, exit is empty and window touches go
/// undetected, which is only allowed for the origin variants.
std::vector<TwoTimeSample> two_time_samples(const WeightField& field, std::span<const CharacteristicFrame> frames,
                                            bool trace = true);
TwoTimeSample two_time_sample(const CharacteristicFrame& frame, const WeightField& field, bool trace = true);

/// h(x, t) for x in [x_lo, x_lo + values.size()).
struct HeightSnapshot {
    std::int64_t t = 0;
    std::int64_t x_lo = 0;
    std::vector<double> values;

    double at(std::int64_t x) const;
};

/// Polynuclear-growth form of a line-start model, evolved site by site from
/// h(x, 0) = h0(x/2, -x/2) (odd x empty) for t = 0..t_max and reported on
/// |x| <= observe. The light cone of the observed sites must stay inside
/// the initial window: 2W >= observe + t_max, else std::invalid_argument.
std::vector<HeightSnapshot> height_evolve(const WeightField& field, std::int64_t t_max, std::int64_t observe);

} // namespace lpplab
