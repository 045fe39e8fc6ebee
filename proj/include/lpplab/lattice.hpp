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

#include <cstdint>
#include <ostream>

namespace lpplab {

/// Lattice site (i, j) of Z^2. The anti-diagonal level is i + j.
struct Point {
    std::int64_t i = 0;
    std::int64_t j = 0;

    constexpr std::int64_t level() const { return i + j; }
    friend constexpr bool operator==(Point, Point) = default;
};

/// Coordinatewise order: a <= b iff a.i <= b.i and a.j <= b.j.
constexpr bool dominated_by(Point a, Point b) { return a.i <= b.i && a.j <= b.j; }

inline std::ostream& operator<<(std::ostream& os, Point p)
{
    return os << '(' << p.i << ',' << p.j << ')';
}

} // namespace lpplab
