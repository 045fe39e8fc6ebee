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

#include "lpplab/engine.hpp"

#include "lpplab/errors.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lpplab {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

[[noreturn]] void throw_domain(const std::string& what, Point p)
{
    std::ostringstream msg;
    msg << what << ": " << p;
    throw std::domain_error(msg.str());
}

void advance_front(const double* __restrict p, const double* __restrict w, double* __restrict out, std::int64_t n)
{
    for (std::int64_t k = 0; k < n; ++k) {
        const double left = p[k];
        const double below = p[k + 1];
        out[k] = (left >= below ? left : below) + w[k];
    }
}

void record_directions(const double* __restrict p, std::int64_t n, std::uint64_t* __restrict words, std::size_t pos)
{
    std::int64_t k = 0;
    // Bits up to the next word boundary, then whole words.
    for (; k < n && (pos & 63) != 0; ++k, ++pos)
        words[pos >> 6] |= static_cast<std::uint64_t>(p[k] >= p[k + 1]) << (pos & 63);
    for (; k + 64 <= n; k += 64, pos += 64) {
        std::uint64_t word = 0;
        for (int b = 0; b < 64; ++b)
            word |= static_cast<std::uint64_t>(p[k + b] >= p[k + b + 1]) << b;
        words[pos >> 6] = word;
    }
    for (; k < n; ++k, ++pos)
        words[pos >> 6] |= static_cast<std::uint64_t>(p[k] >= p[k + 1]) << (pos & 63);
}

} // namespace

// --- Region -------------------------------------------------------------

Region::Region(bool line, std::int64_t start_level, std::int64_t start_lo, std::int64_t start_hi,
               std::int64_t i_max, std::int64_t j_max, std::int64_t level_max)
    : line_(line), start_level_(start_level), start_lo_(start_lo), start_hi_(start_hi), i_max_(i_max),
      j_max_(j_max), level_max_(level_max)
{
    if (start_lo_ > start_hi_)
        throw std::invalid_argument("Region: empty start set");
    if (level_max_ < start_level_)
        throw std::invalid_argument("Region: level_max below the start level");
    if (level_max_ > i_max_ + j_max_)
        throw std::invalid_argument("Region: level_max beyond the target cone");
    if (lo(start_level_) > hi(start_level_))
        throw std::invalid_argument("Region: start set does not meet the backward cone of the targets");
}

Region Region::from_point(Point from, std::int64_t i_max, std::int64_t j_max, std::int64_t level_max)
{
    if (from.i > i_max || from.j > j_max)
        throw_domain("Region: start point outside the target cone", from);
    return Region(false, from.level(), from.i, from.i, i_max, j_max, level_max);
}

Region Region::from_line(std::int64_t window, std::int64_t i_max, std::int64_t j_max, std::int64_t level_max)
{
    if (window < 0)
        throw std::invalid_argument("Region: negative window");
    return Region(true, 0, -window, window, i_max, j_max, level_max);
}

Region Region::covering(const WeightField& field, std::span<const Point> targets)
{
    if (targets.empty())
        throw std::invalid_argument("Region::covering: no targets");
    std::int64_t i_max = std::numeric_limits<std::int64_t>::min();
    std::int64_t j_max = i_max;
    std::int64_t level_max = i_max;
    const std::int64_t floor = field.from_line() ? -field.window() : 0;
    for (Point t : targets) {
        if (t.i < floor || t.j < floor || t.level() < 0)
            throw_domain("target not reachable from the start set", t);
        i_max = std::max(i_max, t.i);
        j_max = std::max(j_max, t.j);
        level_max = std::max(level_max, t.level());
    }
    if (field.from_line())
        return from_line(field.window(), i_max, j_max, level_max);
    return from_point({0, 0}, i_max, j_max, level_max);
}

std::int64_t Region::lo(std::int64_t level) const { return std::max(start_lo_, level - j_max_); }

std::int64_t Region::hi(std::int64_t level) const
{
    return std::min(start_hi_ + (level - start_level_), i_max_);
}

bool Region::contains(Point p) const
{
    const std::int64_t l = p.level();
    return l >= start_level_ && l <= level_max_ && p.i >= lo(l) && p.i <= hi(l);
}

std::int64_t Region::max_width() const
{
    std::int64_t w = 0;
    for (std::int64_t l = start_level_; l <= level_max_; ++l)
        w = std::max(w, width(l));
    return w;
}

std::int64_t Region::cell_count() const
{
    std::int64_t n = 0;
    for (std::int64_t l = start_level_; l <= level_max_; ++l)
        n += width(l);
    return n;
}

// --- SweepFront ---------------------------------------------------------

double SweepFront::at(std::int64_t i) const
{
    if (!contains(i)) {
        std::ostringstream msg;
        msg << "column " << i << " not on the front at level " << level << " [" << i_lo << ", " << i_hi()
            << "]";
        throw std::out_of_range(msg.str());
    }
    return values[static_cast<std::size_t>(i - i_lo)];
}

double SweepFront::at(Point p) const
{
    if (p.level() != level)
        throw_domain("point not on this front's level", p);
    return at(p.i);
}

const SweepFront& SweepResult::front_at(std::int64_t level) const
{
    if (final_front.level == level)
        return final_front;
    for (const auto& f : recorded)
        if (f.level == level)
            return f;
    throw std::out_of_range("level " + std::to_string(level) + " was not recorded");
}

// --- DirectionTape ------------------------------------------------------

DirectionTape::DirectionTape(const Region& region) : region_(region)
{
    const std::int64_t levels = region.level_max() - region.start_level();
    level_offset_.resize(static_cast<std::size_t>(levels + 1), 0);
    std::size_t total = 0;
    for (std::int64_t d = 1; d <= levels; ++d) {
        level_offset_[static_cast<std::size_t>(d)] = total;
        total += static_cast<std::size_t>(region.width(region.start_level() + d));
    }
    bits_total_ = total;
    words_.assign((total + 63) / 64, 0);
}

std::size_t DirectionTape::bit_index(Point p) const
{
    if (!region_.contains(p))
        throw_domain("point outside the taped region", p);
    const std::int64_t d = p.level() - region_.start_level();
    if (d == 0)
        throw_domain("start cells have no predecessor", p);
    return level_offset_[static_cast<std::size_t>(d)] + static_cast<std::size_t>(p.i - region_.lo(p.level()));
}

bool DirectionTape::from_left(Point p) const
{
    const std::size_t b = bit_index(p);
    return (words_[b >> 6] >> (b & 63)) & 1U;
}

Point DirectionTape::predecessor(Point p) const
{
    return from_left(p) ? Point{p.i - 1, p.j} : Point{p.i, p.j - 1};
}

std::vector<Point> DirectionTape::trace(Point end) const
{
    std::vector<Point> path{end};
    Point p = end;
    while (p.level() > region_.start_level()) {
        p = predecessor(p);
        path.push_back(p);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

Point DirectionTape::crossing(Point end, std::int64_t level) const
{
    if (level > end.level() || level < region_.start_level())
        throw std::out_of_range("crossing level outside [start level, endpoint level]");
    Point p = end;
    while (p.level() > level)
        p = predecessor(p);
    return p;
}

// --- sweep --------------------------------------------------------------

SweepResult sweep(const WeightField& field, const Region& region, const SweepOptions& options)
{
    const std::int64_t s = region.start_level();
    const std::int64_t top = region.level_max();
    for (std::int64_t l : options.record_levels)
        if (l < s || l > top)
            throw std::invalid_argument("record level " + std::to_string(l) + " outside the region");
    if (region.line_start() && !field.from_line())
        throw std::invalid_argument("line region needs a line initial condition");

    const auto cap = static_cast<std::size_t>(region.max_width() + 2);
    // Padded fronts: buf[0] and buf[width + 1] hold -inf.
    std::vector<double> prev(cap, neg_inf);
    std::vector<double> next(cap, neg_inf);
    std::vector<double> weights(cap, 0.0);

    SweepResult result;
    if (options.tape)
        result.tape.emplace(region);
    result.recorded.resize(options.record_levels.size());

    auto publish = [&](std::int64_t level, std::int64_t lo, std::int64_t width, const double* values) {
        if (options.observer)
            options.observer(FrontView{level, lo, std::span<const double>(values, static_cast<std::size_t>(width))});
        for (std::size_t r = 0; r < options.record_levels.size(); ++r) {
            if (options.record_levels[r] == level) {
                result.recorded[r] = SweepFront{level, lo, std::vector<double>(values, values + width)};
            }
        }
    };

    std::int64_t plo = region.lo(s);
    std::int64_t pw = region.width(s);
    if (region.line_start()) {
        const auto h0 = field.h0_profile(plo, plo + pw - 1);
        std::copy(h0.begin(), h0.end(), prev.begin() + 1);
    } else {
        prev[1] = 0.0;
    }
    prev[0] = neg_inf;
    prev[static_cast<std::size_t>(pw + 1)] = neg_inf;
    publish(s, plo, pw, prev.data() + 1);

    std::uint64_t* tape_words = options.tape ? result.tape->words_.data() : nullptr;
    std::size_t tape_pos = 0;

    for (std::int64_t level = s + 1; level <= top; ++level) {
        const std::int64_t lo = region.lo(level);
        const std::int64_t hi = region.hi(level);
        const std::int64_t n = hi - lo + 1;
        field.fill_level(level, lo, hi, std::span<double>(weights.data(), static_cast<std::size_t>(n)));

        const double* p = prev.data() + (lo - plo);
        double* out = next.data() + 1;
        advance_front(p, weights.data(), out, n);
        if (tape_words) {
            record_directions(p, n, tape_words, tape_pos);
            tape_pos += static_cast<std::size_t>(n);
        }
        next[0] = neg_inf;
        next[static_cast<std::size_t>(n + 1)] = neg_inf;
        publish(level, lo, n, out);
        std::swap(prev, next);
        plo = lo;
        pw = n;
    }

    result.final_front = SweepFront{top, plo, std::vector<double>(prev.begin() + 1, prev.begin() + 1 + pw)};
    return result;
}

double lpp_point_to_point(const WeightField& field, Point from, Point to)
{
    if (!dominated_by(from, to)) {
        std::ostringstream msg;
        msg << "lpp_point_to_point: target " << to << " is not >= start " << from;
        throw std::domain_error(msg.str());
    }
    if (from == to)
        return 0.0;
    const Region region = Region::from_point(from, to.i, to.j, to.level());
    return sweep(field, region).final_front.at(to.i);
}

namespace {

void enumerate_paths(const WeightGrid& w, Point p, Point to, double acc, double& best)
{
    if (p == to) {
        best = std::max(best, acc);
        return;
    }
    if (p.i < to.i) {
        const Point q{p.i + 1, p.j};
        enumerate_paths(w, q, to, acc + w.at(q), best);
    }
    if (p.j < to.j) {
        const Point q{p.i, p.j + 1};
        enumerate_paths(w, q, to, acc + w.at(q), best);
    }
}

} // namespace

double brute_force_lpp(const WeightGrid& weights, Point from, Point to, double h0_at_start)
{
    if (!dominated_by(from, to))
        throw std::domain_error("brute_force_lpp: target is not >= start");
    if (to.i - from.i > 8 || to.j - from.j > 8)
        throw std::invalid_argument("brute_force_lpp: refusing more than 8x8 steps");
    double best = neg_inf;
    enumerate_paths(weights, from, to, h0_at_start, best);
    return best;
}

double brute_force_from_line(const WeightGrid& weights, std::int64_t k_lo, std::span<const double> h0, Point to)
{
    double best = neg_inf;
    bool any = false;
    for (std::size_t n = 0; n < h0.size(); ++n) {
        const Point start{k_lo + static_cast<std::int64_t>(n), -(k_lo + static_cast<std::int64_t>(n))};
        if (!dominated_by(start, to))
            continue;
        any = true;
        best = std::max(best, brute_force_lpp(weights, start, to, h0[n]));
    }
    if (!any)
        throw_domain("brute_force_from_line: no start point below", to);
    return best;
}

ExitPointRecord exit_point(const std::optional<DirectionTape>& tape, Point endpoint, const InitialCondition& ic)
{
    if (!tape)
        throw StateError("exit_point: the sweep was run without a direction tape");
    const bool line = starts_from_line(ic);
    if (line != tape->region().line_start())
        throw std::invalid_argument("exit_point: tape region does not match the initial condition");
    if (!tape->region().contains(endpoint))
        throw_domain("exit_point: endpoint outside the taped region", endpoint);

    ExitPointRecord rec;
    if (line) {
        rec.kind = ExitKind::line;
        rec.exit = tape->crossing(endpoint, 0);
        rec.z = rec.exit.i;
        return rec;
    }
    rec.kind = ExitKind::axis;
    Point p = endpoint;
    while (p.i > 0 && p.j > 0)
        p = tape->predecessor(p);
    rec.exit = p;
    rec.z = p.j == 0 ? p.i : -p.j;
    return rec;
}

std::vector<double> stationary_increment_stream(const WeightField& field, std::span<const Point> path)
{
    if (!std::holds_alternative<StationaryA>(field.ic()) && !std::holds_alternative<StationaryB>(field.ic()))
        throw std::invalid_argument("stationary_increment_stream: needs a StationaryA or StationaryB field");
    if (path.size() < 2)
        throw std::invalid_argument("stationary_increment_stream: path needs at least two points");
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const std::int64_t di = path[k + 1].i - path[k].i;
        const std::int64_t dj = path[k + 1].j - path[k].j;
        if (!((di == 1 && dj == 0) || (di == 0 && dj == -1)))
            throw_domain("stationary_increment_stream: not a down-right step into", path[k + 1]);
    }
    const Region region = Region::covering(field, path);
    std::multimap<std::int64_t, std::size_t> by_level;
    for (std::size_t k = 0; k < path.size(); ++k)
        by_level.emplace(path[k].level(), k);
    std::vector<double> value(path.size());
    SweepOptions opts;
    opts.observer = [&](const FrontView& f) {
        auto [a, b] = by_level.equal_range(f.level);
        for (auto it = a; it != b; ++it)
            value[it->second] = f.at(path[it->second].i);
    };
    sweep(field, region, opts);
    std::vector<double> inc(path.size() - 1);
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
        inc[k] = value[k + 1] - value[k];
    return inc;
}

WeightField burke_image(const WeightField& stationary_b, std::int64_t i_max, std::int64_t j_max)
{
    const auto* b = std::get_if<StationaryB>(&stationary_b.ic());
    if (!b)
        throw std::invalid_argument("burke_image: needs a StationaryB field");
    if (i_max < 0 || j_max < 0)
        throw std::invalid_argument("burke_image: negative box");
    const std::array<Point, 2> corners{Point{i_max, 0}, Point{0, j_max}};
    const Region region = Region::covering(stationary_b, corners);
    std::vector<double> lx(static_cast<std::size_t>(i_max + 1));
    std::vector<double> ly(static_cast<std::size_t>(j_max + 1));
    SweepOptions opts;
    opts.observer = [&](const FrontView& f) {
        if (f.level <= i_max)
            lx[static_cast<std::size_t>(f.level)] = f.at(f.level);
        if (f.level <= j_max)
            ly[static_cast<std::size_t>(f.level)] = f.at(0);
    };
    sweep(stationary_b, region, opts);
    std::vector<double> x(lx.size(), 0.0);
    std::vector<double> y(ly.size(), 0.0);
    for (std::size_t k = 1; k < lx.size(); ++k)
        x[k] = lx[k] - lx[k - 1];
    for (std::size_t k = 1; k < ly.size(); ++k)
        y[k] = ly[k] - ly[k - 1];
    return WeightField(stationary_b.source(), StationaryA{b->rho}).with_boundary(std::move(x), std::move(y));
}

} // namespace lpplab
