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

#include "lpplab/weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lpplab {

namespace {

void fill_pairs(double* __restrict dst, std::int64_t pairs, std::uint64_t level_bits, std::uint32_t first_pair,
                std::uint64_t k0, std::uint64_t k1)
{
    const auto tag = static_cast<std::uint64_t>(StreamTag::bulk);
    for (std::int64_t p = 0; p < pairs; ++p) {
        const std::uint64_t address = level_bits | static_cast<std::uint32_t>(first_pair + static_cast<std::uint32_t>(p));
        const auto b = detail::threefry2x64(address, tag, k0, k1);
        dst[2 * p] = detail::exp_from_uniform(detail::bits_to_open_unit(b[0]), 1.0);
        dst[2 * p + 1] = detail::exp_from_uniform(detail::bits_to_open_unit(b[1]), 1.0);
    }
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void throw_range(const char* what, Point p)
{
    std::ostringstream msg;
    msg << what << ": " << p;
    throw std::out_of_range(msg.str());
}

} // namespace

std::string ic_name(const InitialCondition& ic)
{
    return std::visit(overloaded{
                          [](const Droplet&) { return std::string("droplet"); },
                          [](const Flat&) { return std::string("flat"); },
                          [](const StationaryA&) { return std::string("stationary-a"); },
                          [](const StationaryB&) { return std::string("stationary-b"); },
                          [](const RandomSigma&) { return std::string("random-sigma"); },
                      },
                      ic);
}

InitialCondition parse_ic(const std::string& name, double rho, double sigma)
{
    InitialCondition ic;
    if (name == "droplet")
        ic = Droplet{};
    else if (name == "flat")
        ic = Flat{};
    else if (name == "stationary-a")
        ic = StationaryA{rho};
    else if (name == "stationary-b")
        ic = StationaryB{rho};
    else if (name == "random-sigma")
        ic = RandomSigma{sigma};
    else
        throw std::invalid_argument("unknown initial condition '" + name + "'");
    validate_ic(ic);
    return ic;
}

void validate_ic(const InitialCondition& ic)
{
    auto check_rho = [](double rho) {
        if (!(rho > 0.0 && rho < 1.0))
            throw std::invalid_argument("rho must lie in (0,1)");
    };
    std::visit(overloaded{
                   [](const Droplet&) {},
                   [](const Flat&) {},
                   [&](const StationaryA& s) { check_rho(s.rho); },
                   [&](const StationaryB& s) { check_rho(s.rho); },
                   [](const RandomSigma& s) {
                       if (!(s.sigma >= 0.0) || !std::isfinite(s.sigma))
                           throw std::invalid_argument("sigma must be finite and >= 0");
                   },
               },
               ic);
}

bool starts_from_line(const InitialCondition& ic)
{
    return std::holds_alternative<Flat>(ic) || std::holds_alternative<StationaryB>(ic) ||
           std::holds_alternative<RandomSigma>(ic);
}

std::int64_t default_window(std::int64_t n)
{
    return static_cast<std::int64_t>(std::ceil(8.0 * std::cbrt(2.0 * static_cast<double>(n)) *
                                               std::cbrt(2.0 * static_cast<double>(n))));
}

// --- WeightGrid ---------------------------------------------------------

WeightGrid::WeightGrid(Point origin, std::int64_t extent_i, std::int64_t extent_j, double fill)
    : origin_(origin), extent_i_(extent_i), extent_j_(extent_j)
{
    if (extent_i <= 0 || extent_j <= 0)
        throw std::invalid_argument("WeightGrid extents must be positive");
    values_.assign(static_cast<std::size_t>(extent_i * extent_j), fill);
}

bool WeightGrid::contains(Point p) const
{
    return p.i >= origin_.i && p.i < origin_.i + extent_i_ && p.j >= origin_.j &&
           p.j < origin_.j + extent_j_;
}

std::size_t WeightGrid::index(Point p) const
{
    if (!contains(p))
        throw_range("cell outside the explicit weight grid", p);
    return static_cast<std::size_t>((p.i - origin_.i) * extent_j_ + (p.j - origin_.j));
}

double WeightGrid::at(Point p) const { return values_[index(p)]; }

void WeightGrid::set(Point p, double value) { values_[index(p)] = value; }

// --- WeightField --------------------------------------------------------

WeightField::WeightField(RandomSource source, InitialCondition ic, std::int64_t window)
    : source_(source), ic_(ic), window_(window)
{
    validate_ic(ic_);
    if (from_line()) {
        if (window_ <= 0)
            throw std::invalid_argument("line initial conditions need a truncation window W > 0");
        if (window_ >= detail::address_limit / 2)
            throw std::invalid_argument("truncation window exceeds the addressable range");
    } else {
        window_ = 0;
    }
}

double WeightField::rate_x() const
{
    if (const auto* s = std::get_if<StationaryA>(&ic_))
        return 1.0 - s->rho;
    return 1.0;
}

double WeightField::rate_y() const
{
    if (const auto* s = std::get_if<StationaryA>(&ic_))
        return s->rho;
    return 1.0;
}

double WeightField::x_axis_weight(std::int64_t i) const
{
    if (overrides_ && static_cast<std::size_t>(i) < overrides_->x_axis.size())
        return overrides_->x_axis[static_cast<std::size_t>(i)];
    return detail::exp_from_uniform(source_.uniform_at({i, 0}, StreamTag::boundary_x), rate_x());
}

double WeightField::y_axis_weight(std::int64_t j) const
{
    if (overrides_ && static_cast<std::size_t>(j) < overrides_->y_axis.size())
        return overrides_->y_axis[static_cast<std::size_t>(j)];
    return detail::exp_from_uniform(source_.uniform_at({0, j}, StreamTag::boundary_y), rate_y());
}

void WeightField::check_bulk_address(Point p) const
{
    if (from_line()) {
        if (p.level() < 1 || p.i < -window_ || p.j < -window_)
            throw_range("cell outside the forward cone of the initial window", p);
    } else if (p.i < 0 || p.j < 0) {
        throw_range("cell outside Z^2_+", p);
    }
}

double WeightField::raw_bulk(Point p) const
{
    return detail::exp_from_uniform(source_.uniform_at(p, StreamTag::bulk), 1.0);
}

double WeightField::bulk_weight_at(Point p) const
{
    check_bulk_address(p);
    if (!from_line() && p.i == 0 && p.j == 0)
        return 0.0;
    if (overrides_) {
        if (overrides_->constant)
            return *overrides_->constant;
        if (overrides_->grid)
            return overrides_->grid->at(p);
    }
    if (!from_line()) {
        if (p.j == 0)
            return x_axis_weight(p.i);
        if (p.i == 0)
            return y_axis_weight(p.j);
    }
    return raw_bulk(p);
}

void WeightField::fill_level(std::int64_t level, std::int64_t i_lo, std::int64_t i_hi,
                             std::span<double> out) const
{
    if (overrides_ && (overrides_->constant || overrides_->grid)) {
        for (std::int64_t i = i_lo; i <= i_hi; ++i)
            out[static_cast<std::size_t>(i - i_lo)] = bulk_weight_at({i, level - i});
        return;
    }

    // Pairs (2m, 2m+1) share one Threefry block. Edge cells of an odd i_lo
    // or even i_hi use half a block.
    double* dst = out.data() - i_lo;
    std::int64_t i = i_lo;
    if (i & 1) {
        dst[i] = raw_bulk({i, level - i});
        ++i;
    }
    const std::int64_t pair_end = ((i_hi + 1) & ~std::int64_t{1});
    if (i < pair_end) {
        fill_pairs(dst + i, (pair_end - i) / 2, static_cast<std::uint64_t>(level) << 32,
                   static_cast<std::uint32_t>(i >> 1), source_.master_seed(), source_.replica_id());
        i = pair_end;
    }
    if (i <= i_hi)
        dst[i] = raw_bulk({i, level - i});

    if (!from_line()) {
        if (level >= i_lo && level <= i_hi)
            dst[level] = x_axis_weight(level);
        if (0 >= i_lo && 0 <= i_hi)
            dst[0] = level == 0 ? 0.0 : y_axis_weight(level);
    }
}

double WeightField::profile_increment(std::int64_t k) const
{
    const double rho = std::holds_alternative<StationaryB>(ic_) ? std::get<StationaryB>(ic_).rho : 0.5;
    const double x = detail::exp_from_uniform(source_.uniform_at({k, 0}, StreamTag::boundary_x), 1.0 - rho);
    const double y = detail::exp_from_uniform(source_.uniform_at({k, 0}, StreamTag::boundary_y), rho);
    return x - y;
}

double WeightField::h0_at(std::int64_t k) const
{
    if (!from_line())
        throw std::invalid_argument("h0 is defined only for line initial conditions");
    if (k < -window_ || k > window_) {
        std::ostringstream msg;
        msg << "h0 index " << k << " outside the truncation window [-" << window_ << ", " << window_
            << "]; increase the window";
        throw std::out_of_range(msg.str());
    }
    if (overrides_ && !overrides_->h0.empty())
        return overrides_->h0[static_cast<std::size_t>(k + window_)];
    if (std::holds_alternative<Flat>(ic_))
        return 0.0;
    double s = 0.0;
    if (k > 0) {
        for (std::int64_t m = 1; m <= k; ++m)
            s += profile_increment(m);
    } else {
        for (std::int64_t m = 0; m > k; --m)
            s -= profile_increment(m);
    }
    if (const auto* r = std::get_if<RandomSigma>(&ic_))
        return r->sigma * s;
    return s;
}

std::vector<double> WeightField::h0_profile(std::int64_t k_lo, std::int64_t k_hi) const
{
    if (!from_line())
        throw std::invalid_argument("h0 is defined only for line initial conditions");
    if (k_lo > k_hi)
        throw std::invalid_argument("h0_profile: empty range");
    if (k_lo < -window_ || k_hi > window_) {
        std::ostringstream msg;
        msg << "h0 range [" << k_lo << ", " << k_hi << "] exceeds the truncation window W = " << window_;
        throw std::out_of_range(msg.str());
    }
    std::vector<double> out(static_cast<std::size_t>(k_hi - k_lo + 1), 0.0);
    if (overrides_ && !overrides_->h0.empty()) {
        for (std::int64_t k = k_lo; k <= k_hi; ++k)
            out[static_cast<std::size_t>(k - k_lo)] = overrides_->h0[static_cast<std::size_t>(k + window_)];
        return out;
    }
    if (std::holds_alternative<Flat>(ic_))
        return out;

    const double scale = std::holds_alternative<RandomSigma>(ic_) ? std::get<RandomSigma>(ic_).sigma : 1.0;
    const bool scaled = std::holds_alternative<RandomSigma>(ic_);
    auto put = [&](std::int64_t k, double s) {
        if (k >= k_lo && k <= k_hi)
            out[static_cast<std::size_t>(k - k_lo)] = scaled ? scale * s : s;
    };
    put(0, 0.0);
    double s = 0.0;
    for (std::int64_t m = 1; m <= k_hi; ++m) {
        s += profile_increment(m);
        put(m, s);
    }
    s = 0.0;
    for (std::int64_t m = 0; m > k_lo; --m) {
        s -= profile_increment(m);
        put(m - 1, s);
    }
    return out;
}

WeightField::Overrides& WeightField::mutable_overrides()
{
    auto fresh = overrides_ ? std::make_shared<Overrides>(*overrides_) : std::make_shared<Overrides>();
    overrides_ = fresh;
    return *fresh;
}

WeightField WeightField::with_constant_weights(double value) const
{
    if (!(value >= 0.0))
        throw std::invalid_argument("constant weight must be >= 0");
    WeightField f = *this;
    auto& o = f.mutable_overrides();
    o.constant = value;
    o.grid.reset();
    return f;
}

WeightField WeightField::with_explicit_weights(WeightGrid grid, std::vector<double> h0) const
{
    WeightField f = *this;
    if (!h0.empty() && static_cast<std::int64_t>(h0.size()) != 2 * window_ + 1)
        throw std::invalid_argument("explicit h0 must cover [-W, W]");
    auto& o = f.mutable_overrides();
    o.constant.reset();
    o.grid = std::move(grid);
    o.h0 = std::move(h0);
    return f;
}

WeightField WeightField::with_boundary(std::vector<double> x, std::vector<double> y) const
{
    if (from_line())
        throw std::invalid_argument("boundary overrides apply to origin initial conditions only");
    WeightField f = *this;
    auto& o = f.mutable_overrides();
    o.x_axis = std::move(x);
    o.y_axis = std::move(y);
    return f;
}

} // namespace lpplab
