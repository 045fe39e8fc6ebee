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

#include "lpplab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lpplab {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double fluctuation_unit(std::int64_t n) { return std::cbrt(16.0 * static_cast<double>(n)); }

Point checked(const CharacteristicFrame& f, Point p, const char* name)
{
    const char* coord = nullptr;
    std::int64_t value = 0;
    if (p.i < f.coordinate_floor()) {
        coord = "i";
        value = p.i;
    } else if (p.j < f.coordinate_floor()) {
        coord = "j";
        value = p.j;
    }
    if (coord) {
        std::ostringstream msg;
        msg << name << " = " << p << " has " << coord << " = " << value << " below the region floor "
            << f.coordinate_floor();
        throw std::domain_error(msg.str());
    }
    return p;
}

} // namespace

CharacteristicFrame::CharacteristicFrame(std::int64_t n, double tau, double w_tau, double w_1,
                                         std::int64_t coordinate_floor)
    : n_(n), tau_(tau), w_tau_(w_tau), w_1_(w_1), floor_(coordinate_floor)
{
    if (n < 2)
        throw std::invalid_argument("CharacteristicFrame: N must be >= 2");
    if (!(tau > 0.0 && tau <= 1.0))
        throw std::invalid_argument("CharacteristicFrame: tau must lie in (0, 1]");
    if (!std::isfinite(w_tau) || !std::isfinite(w_1))
        throw std::invalid_argument("CharacteristicFrame: offsets must be finite");
    if (tau_diagonal() < 1)
        throw std::invalid_argument("CharacteristicFrame: tau N rounds to zero");
}

CharacteristicFrame CharacteristicFrame::for_field(const WeightField& field, std::int64_t n, double tau, double w_tau,
                                                   double w_1)
{
    return CharacteristicFrame(n, tau, w_tau, w_1, field.from_line() ? -field.window() : 0);
}

double CharacteristicFrame::spatial_unit() const { return std::cbrt(4.0 * static_cast<double>(n_ * n_)); }

std::int64_t CharacteristicFrame::tau_diagonal() const
{
    return std::llround(tau_ * static_cast<double>(n_));
}

std::int64_t CharacteristicFrame::offset(double u) const { return std::llround(u * spatial_unit()); }

Point endpoint_of(const CharacteristicFrame& frame, Endpoint which)
{
    if (which == Endpoint::one) {
        const std::int64_t d = frame.offset(frame.w_1());
        return checked(frame, {frame.n() + d, frame.n() - d}, "E_1");
    }
    const std::int64_t d = frame.offset(frame.w_tau());
    return checked(frame, {frame.tau_diagonal() + d, frame.tau_diagonal() - d}, "E_tau");
}

Point endpoint_of(const CharacteristicFrame& frame, double u)
{
    const std::int64_t d = frame.offset(u);
    return checked(frame, {frame.tau_diagonal() + d, frame.tau_diagonal() - d}, "I(u)");
}

double rescale(double l, std::int64_t n, double tau)
{
    return (l - 4.0 * tau * static_cast<double>(n)) / fluctuation_unit(n);
}

double unscale(double scaled, std::int64_t n, double tau)
{
    return scaled * fluctuation_unit(n) + 4.0 * tau * static_cast<double>(n);
}

std::vector<TwoTimeSample> two_time_samples(const WeightField& field, std::span<const CharacteristicFrame> frames,
                                            bool trace)
{
    if (frames.empty())
        throw std::invalid_argument("two_time_samples: no frames");
    if (!trace && field.from_line())
        throw std::invalid_argument("two_time_samples: line starts need the tape to detect window touches");
    const std::int64_t floor = field.from_line() ? -field.window() : 0;
    for (const auto& f : frames) {
        if (f.n() != frames[0].n() || f.w_1() != frames[0].w_1())
            throw std::invalid_argument("two_time_samples: frames must share N and w_1");
        if (f.coordinate_floor() != floor)
            throw std::invalid_argument("two_time_samples: frame floor does not match the field's start set");
    }

    const Point e1 = endpoint_of(frames[0], Endpoint::one);
    std::vector<Point> targets{e1};
    SweepOptions opts;
    opts.tape = trace;
    for (const auto& f : frames) {
        targets.push_back(endpoint_of(f, Endpoint::tau));
        opts.record_levels.push_back(f.tau_level());
    }
    std::sort(opts.record_levels.begin(), opts.record_levels.end());
    opts.record_levels.erase(std::unique(opts.record_levels.begin(), opts.record_levels.end()),
                             opts.record_levels.end());
    const Region region = Region::covering(field, targets);
    const SweepResult r = sweep(field, region, opts);

    const std::int64_t n = frames[0].n();
    const double l1 = rescale(r.final_front.at(e1.i), n, 1.0);
    std::optional<ExitPointRecord> exit;
    bool e1_touch = false;
    if (trace && !std::holds_alternative<Droplet>(field.ic())) {
        exit = exit_point(r.tape, e1, field.ic());
        e1_touch = field.from_line() && std::abs(exit->z) == field.window();
    }

    std::vector<TwoTimeSample> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        const Point et = endpoint_of(f, Endpoint::tau);
        TwoTimeSample s;
        s.l_tau = rescale(r.front_at(f.tau_level()).at(et.i), n, f.tau());
        s.l_1 = l1;
        s.exit = exit;
        if (trace) {
            const Point c = r.tape->crossing(e1, f.tau_level());
            s.u_star = static_cast<double>(c.i - f.tau_diagonal()) / f.spatial_unit();
            s.window_touched = e1_touch;
            if (field.from_line())
                s.window_touched = s.window_touched || std::abs(r.tape->crossing(et, 0).i) == field.window();
        } else {
            s.u_star = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(std::move(s));
    }
    return out;
}

TwoTimeSample two_time_sample(const CharacteristicFrame& frame, const WeightField& field, bool trace)
{
    return two_time_samples(field, std::span<const CharacteristicFrame>(&frame, 1), trace).front();
}

double HeightSnapshot::at(std::int64_t x) const
{
    if (x < x_lo || x >= x_lo + static_cast<std::int64_t>(values.size()))
        throw std::out_of_range("site " + std::to_string(x) + " outside the observed window at t = " +
                                std::to_string(t));
    return values[static_cast<std::size_t>(x - x_lo)];
}

std::vector<HeightSnapshot> height_evolve(const WeightField& field, std::int64_t t_max, std::int64_t observe)
{
    if (!field.from_line())
        throw std::invalid_argument("height_evolve: needs a line initial condition");
    if (t_max < 0 || observe < 0)
        throw std::invalid_argument("height_evolve: t_max and observe must be >= 0");
    const std::int64_t w = field.window();
    if (2 * w < observe + t_max) {
        std::ostringstream msg;
        msg << "height_evolve: window W = " << w << " too small; the light cone of |x| <= " << observe
            << " up to t = " << t_max << " needs W >= " << (observe + t_max + 1) / 2;
        throw std::invalid_argument(msg.str());
    }

    const std::int64_t x_lo = -2 * w;
    const auto width = static_cast<std::size_t>(4 * w + 1);
    // Padded by one site on each side.
    std::vector<double> h(width + 2, neg_inf);
    std::vector<double> next(width + 2, neg_inf);
    for (std::int64_t x = x_lo; x <= -x_lo; x += 2)
        h[static_cast<std::size_t>(x - x_lo + 1)] = field.h0_at(x / 2);

    std::vector<HeightSnapshot> out;
    auto snapshot = [&](std::int64_t t) {
        HeightSnapshot s{t, -observe, {}};
        const auto first = h.begin() + (-observe - x_lo + 1);
        s.values.assign(first, first + 2 * observe + 1);
        out.push_back(std::move(s));
    };
    snapshot(0);
    for (std::int64_t t = 1; t <= t_max; ++t) {
        for (std::int64_t x = x_lo; x <= -x_lo; ++x) {
            const auto k = static_cast<std::size_t>(x - x_lo + 1);
            const double m = std::max(std::max(h[k - 1], h[k]), h[k + 1]);
            const bool occupied = ((x - t) & 1) == 0;
            next[k] = occupied ? m + field.bulk_weight_at({(x + t) / 2, (t - x) / 2}) : m;
        }
        std::swap(h, next);
        snapshot(t);
    }
    return out;
}

} // namespace lpplab
