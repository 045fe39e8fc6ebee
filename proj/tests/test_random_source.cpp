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

#include "lpplab/random_source.hpp"

#include <cmath>
#include <stdexcept>

using namespace lpplab;

TEST_CASE("uniform_at is a pure function of its address")
{
    const RandomSource a(42, 0);
    const RandomSource b(42, 0);
    const double u = a.uniform_at({3, 5}, StreamTag::bulk);
    CHECK(u == a.uniform_at({3, 5}, StreamTag::bulk));
    CHECK(u == b.uniform_at({3, 5}, StreamTag::bulk));
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    CHECK(u != a.uniform_at({3, 5}, StreamTag::boundary_x));
    CHECK(u != RandomSource(42, 1).uniform_at({3, 5}, StreamTag::bulk));
}

TEST_CASE("different seeds give different uniforms on a million addresses")
{
    const RandomSource a(42, 0);
    const RandomSource b(43, 0);
    int equal = 0;
    for (std::int64_t n = 0; n < 1'000'000; ++n) {
        const Point p{n % 1000, n / 1000};
        equal += a.uniform_at(p, StreamTag::bulk) == b.uniform_at(p, StreamTag::bulk);
    }
    CHECK(equal == 0);
}

TEST_CASE("uniform mean over a million consecutive addresses")
{
    const RandomSource src(42, 0);
    double sum = 0.0;
    for (std::int64_t n = 0; n < 1'000'000; ++n)
        sum += src.uniform_at({n, 0}, StreamTag::bulk);
    CHECK(std::abs(sum / 1e6 - 0.5) < 0.002);
}

TEST_CASE("paired cells use the two words of one block")
{
    const RandomSource src(7, 3);
    for (std::int64_t i = -6; i < 6; ++i) {
        const Point p{i, 10 - i};
        const auto blk = src.block(detail::address_word(p.level(), p.i), StreamTag::bulk);
        CHECK(src.uniform_at(p, StreamTag::bulk) == detail::bits_to_open_unit(blk[static_cast<std::size_t>(i & 1)]));
    }
    CHECK(src.uniform_at({4, 1}, StreamTag::bulk) != src.uniform_at({5, 0}, StreamTag::bulk));
}

TEST_CASE("threefry 2x64-20 known answers")
{
    const auto zero = detail::threefry2x64(0, 0, 0, 0);
    CHECK(zero[0] == 0xc2b6e3a8c2c69865ULL);
    CHECK(zero[1] == 0x6f81ed42f350084dULL);
    const auto ones = detail::threefry2x64(~0ULL, ~0ULL, ~0ULL, ~0ULL);
    CHECK(ones[0] == 0xe02cb7c4d95d277aULL);
    CHECK(ones[1] == 0xd06633d0893b8b68ULL);
    const auto pi = detail::threefry2x64(0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL, 0xa4093822299f31d0ULL,
                                         0x082efa98ec4e6c89ULL);
    CHECK(pi[0] == 0x263c7d30bb0f0af1ULL);
    CHECK(pi[1] == 0x56be8361d3311526ULL);
}

TEST_CASE("addresses outside the range are rejected")
{
    const RandomSource src(1, 0);
    CHECK_THROWS_AS(src.uniform_at({detail::address_limit, 0}, StreamTag::bulk), std::out_of_range);
    CHECK_THROWS_AS(src.uniform_at({0, -detail::address_limit}, StreamTag::bulk), std::out_of_range);
}

TEST_CASE("log_unit agrees with std::log")
{
    double worst = 0.0;
    const RandomSource src(5, 0);
    for (std::int64_t n = 0; n < 200'000; ++n) {
        const double u = src.uniform_at({n, 1}, StreamTag::bulk);
        const double ref = std::log(u);
        worst = std::max(worst, std::abs(detail::log_unit(u) - ref) / std::abs(ref));
    }
    CHECK(worst < 4e-16);
    CHECK(detail::log_unit(1.0) == 0.0);
    CHECK(detail::log_unit(0x1p-53) == doctest::Approx(-53 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("exp_inverse_cdf")
{
    CHECK(exp_inverse_cdf(1e-300, 1.0) == doctest::Approx(0.0));
    CHECK(exp_inverse_cdf(1.0 - std::exp(-1.0), 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(exp_inverse_cdf(0.5, 2.0) == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-14));
    CHECK(exp_inverse_cdf(0.3, 1.0) < exp_inverse_cdf(0.31, 1.0));
    CHECK(exp_inverse_cdf(0.3, 1.0) > exp_inverse_cdf(0.3, 1.1));
    CHECK_THROWS_AS(exp_inverse_cdf(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_inverse_cdf(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_inverse_cdf(0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_inverse_cdf(0.5, -1.0), std::invalid_argument);
}
