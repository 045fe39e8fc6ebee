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

#include <array>
#include <bit>
#include <cstdint>

namespace lpplab {

/// Stream tags. Values are frozen: changing them changes every sampled
/// environment and invalidates stored manifests.
enum class StreamTag : std::uint32_t {
    bulk = 0,
    boundary_x = 1,
    boundary_y = 2,
};

namespace detail {

/// Threefry-2x64 with 20 rounds (Salmon et al., SC'11), the Random123
/// default. Written without loops so the compiler can vectorise it across
/// counters.
inline std::array<std::uint64_t, 2> threefry2x64(std::uint64_t c0, std::uint64_t c1,
                                                 std::uint64_t k0, std::uint64_t k1)
{
    const std::uint64_t k2 = k0 ^ k1 ^ 0x1BD11BDAA9FC1A22ULL;
    std::uint64_t x0 = c0 + k0;
    std::uint64_t x1 = c1 + k1;
#define LPPLAB_TF_ROUND(r) \
    x0 += x1;              \
    x1 = std::rotl(x1, r); \
    x1 ^= x0;
#define LPPLAB_TF_INJECT(a, b, s) \
    x0 += (a);                    \
    x1 += (b) + (s);
    LPPLAB_TF_ROUND(16) LPPLAB_TF_ROUND(42) LPPLAB_TF_ROUND(12) LPPLAB_TF_ROUND(31)
    LPPLAB_TF_INJECT(k1, k2, 1)
    LPPLAB_TF_ROUND(16) LPPLAB_TF_ROUND(32) LPPLAB_TF_ROUND(24) LPPLAB_TF_ROUND(21)
    LPPLAB_TF_INJECT(k2, k0, 2)
    LPPLAB_TF_ROUND(16) LPPLAB_TF_ROUND(42) LPPLAB_TF_ROUND(12) LPPLAB_TF_ROUND(31)
    LPPLAB_TF_INJECT(k0, k1, 3)
    LPPLAB_TF_ROUND(16) LPPLAB_TF_ROUND(32) LPPLAB_TF_ROUND(24) LPPLAB_TF_ROUND(21)
    LPPLAB_TF_INJECT(k1, k2, 4)
    LPPLAB_TF_ROUND(16) LPPLAB_TF_ROUND(42) LPPLAB_TF_ROUND(12) LPPLAB_TF_ROUND(31)
    LPPLAB_TF_INJECT(k2, k0, 5)
#undef LPPLAB_TF_ROUND
#undef LPPLAB_TF_INJECT
    return {x0, x1};
}

/// Maps 64 random bits to (k + 1/2) 2^-52 with k the top 52 bits, so the
/// result lies strictly inside (0,1) and 1 - u is exact.
constexpr double bits_to_open_unit(std::uint64_t bits)
{
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1p-52;
}

/// Natural log for normal x in (0, 1]. fdlibm's e_log.c reduction and
/// minimax polynomial, made branch-free so that batch loops vectorise and
/// return the same bits as scalar calls. Error < 1 ulp.
inline double log_unit(double x)
{
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    constexpr double lg1 = 6.666666666666735130e-01;
    constexpr double lg2 = 3.999999999940941908e-01;
    constexpr double lg3 = 2.857142874366239149e-01;
    constexpr double lg4 = 2.222219843214978396e-01;
    constexpr double lg5 = 1.818357216161805012e-01;
    constexpr double lg6 = 1.531383769920937332e-01;
    constexpr double lg7 = 1.479819860511658591e-01;

    const std::uint64_t b = std::bit_cast<std::uint64_t>(x);
    const std::int64_t e = static_cast<std::int64_t>(b >> 52) - 1023;
    const std::uint64_t mant = b & 0x000fffffffffffffULL;
    // Reduce the mantissa to [sqrt(2)/2, sqrt(2)).
    const std::int64_t halve = mant > 0x6a09e667f3bcdULL ? 1 : 0;
    const double m = std::bit_cast<double>(mant | (static_cast<std::uint64_t>(1023 - halve) << 52));
    const double f = m - 1.0;
    const double k = static_cast<double>(e + halve);
    const double s = f / (2.0 + f);
    const double z = s * s;
    const double w = z * z;
    const double t1 = w * (lg2 + w * (lg4 + w * lg6));
    const double t2 = z * (lg1 + w * (lg3 + w * (lg5 + w * lg7)));
    const double r = t2 + t1;
    const double hfsq = 0.5 * f * f;
    return k * ln2_hi - ((hfsq - (s * (hfsq + r) + k * ln2_lo)) - f);
}

/// Unchecked inverse CDF of Exp(rate); callers guarantee u in (0,1).
inline double exp_from_uniform(double u, double rate)
{
    return -log_unit(1.0 - u) / rate;
}

/// Counter words for a lattice address. Cells (2m, l-2m) and (2m+1, l-2m-1)
/// on one anti-diagonal share a Threefry block; the low bit of i picks the
/// output word.
inline std::uint64_t address_word(std::int64_t level, std::int64_t i)
{
    const auto hi = static_cast<std::uint64_t>(static_cast<std::uint32_t>(level));
    const auto lo = static_cast<std::uint64_t>(static_cast<std::uint32_t>(i >> 1));
    return (hi << 32) | lo;
}

/// Coordinates must satisfy |i|, |j| < 2^30.
constexpr std::int64_t address_limit = std::int64_t{1} << 30;

} // namespace detail

/// Stateless, counter-based source of uniforms addressed by
/// (master_seed, replica_id, cell, tag). Query order and thread count never
/// affect the value at an address.
class RandomSource {
public:
    RandomSource() = default;
    RandomSource(std::uint64_t master_seed, std::uint64_t replica_id)
        : seed_(master_seed), replica_(replica_id)
    {
    }

    std::uint64_t master_seed() const { return seed_; }
    std::uint64_t replica_id() const { return replica_; }

    /// Uniform in (0,1) at lattice point p. Throws std::out_of_range when
    /// p is outside the addressable range.
    double uniform_at(Point p, StreamTag tag) const;

    /// Raw Threefry block for (level, pair index) used by batch kernels.
    std::array<std::uint64_t, 2> block(std::uint64_t address, StreamTag tag) const
    {
        return detail::threefry2x64(address, static_cast<std::uint64_t>(tag), seed_, replica_);
    }

    friend bool operator==(const RandomSource&, const RandomSource&) = default;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t replica_ = 0;
};

/// Inverse CDF of the exponential law: -ln(1-u)/rate. Strictly increasing
/// in u and strictly decreasing in rate. Throws std::invalid_argument for
/// u outside (0,1) or rate <= 0.
double exp_inverse_cdf(double u, double rate);

} // namespace lpplab
