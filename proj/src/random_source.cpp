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

#include "lpplab/random_source.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace lpplab {

double RandomSource::uniform_at(Point p, StreamTag tag) const
{
    if (std::llabs(p.i) >= detail::address_limit || std::llabs(p.j) >= detail::address_limit) {
        std::ostringstream msg;
        msg << "lattice address " << p << " outside the addressable range |i|,|j| < 2^30";
        throw std::out_of_range(msg.str());
    }
    const auto out = block(detail::address_word(p.level(), p.i), tag);
    return detail::bits_to_open_unit(out[static_cast<std::size_t>(p.i & 1)]);
}

double exp_inverse_cdf(double u, double rate)
{
    if (!(u > 0.0 && u < 1.0))
        throw std::invalid_argument("exp_inverse_cdf: u must lie in (0,1)");
    if (!(rate > 0.0))
        throw std::invalid_argument("exp_inverse_cdf: rate must be positive");
    return detail::exp_from_uniform(u, rate);
}

} // namespace lpplab
