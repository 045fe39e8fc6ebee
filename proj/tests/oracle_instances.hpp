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

#include <cstdint>
#include <random>
#include <vector>

namespace lpplab::testing {

struct OracleTally {
    int instances = 0;
    int mismatches = 0;
    std::vector<int> per_variant = std::vector<int>(5, 0);
};

/// Random small instances of every initial condition: the sweep value at a
/// random target is compared with exhaustive path enumeration over the same
/// weights (queried cell by cell) and the same h0 (queried point by point).
inline OracleTally run_oracle_instances(int count, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    OracleTally tally;
    for (int n = 0; n < count; ++n) {
        const int variant = n % 5;
        const RandomSource src(seed, static_cast<std::uint64_t>(n));
        std::uniform_real_distribution<double> param(0.05, 0.95);
        InitialCondition ic;
        switch (variant) {
        case 0: ic = Droplet{}; break;
        case 1: ic = Flat{}; break;
        case 2: ic = StationaryA{param(gen)}; break;
        case 3: ic = StationaryB{param(gen)}; break;
        default: ic = RandomSigma{2.0 * param(gen)}; break;
        }
        double dp = 0.0;
        double oracle = 0.0;
        if (!starts_from_line(ic)) {
            const WeightField field(src, ic);
            std::uniform_int_distribution<std::int64_t> coord(0, 4);
            const Point to{coord(gen), coord(gen)};
            WeightGrid grid({0, 0}, 5, 5);
            for (std::int64_t i = 0; i < 5; ++i)
                for (std::int64_t j = 0; j < 5; ++j)
                    grid.set({i, j}, field.bulk_weight_at({i, j}));
            const Point target[] = {to};
            dp = sweep(field, Region::covering(field, target)).final_front.at(to.i);
            oracle = brute_force_lpp(grid, {0, 0}, to);
        } else {
            std::uniform_int_distribution<std::int64_t> wdist(1, 2);
            const std::int64_t w = wdist(gen);
            const WeightField field(src, ic, w);
            std::uniform_int_distribution<std::int64_t> coord(-w, w);
            Point to{coord(gen), coord(gen)};
            while (to.level() < 0)
                to = {coord(gen), coord(gen)};
            WeightGrid grid({-w, -w}, 2 * w + 1, 2 * w + 1);
            for (std::int64_t i = -w; i <= w; ++i)
                for (std::int64_t j = -w; j <= w; ++j)
                    if (i + j >= 1)
                        grid.set({i, j}, field.bulk_weight_at({i, j}));
            std::vector<double> h0;
            for (std::int64_t k = -w; k <= w; ++k)
                h0.push_back(field.h0_at(k));
            const Point target[] = {to};
            dp = sweep(field, Region::covering(field, target)).final_front.at(to.i);
            oracle = brute_force_from_line(grid, -w, h0, to);
        }
        ++tally.instances;
        ++tally.per_variant[static_cast<std::size_t>(variant)];
        if (dp != oracle)
            ++tally.mismatches;
    }
    return tally;
}

} // namespace lpplab::testing
