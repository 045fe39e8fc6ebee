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

#include <stdexcept>
#include <string>

namespace lpplab {

// Invalid arguments use std::invalid_argument, out-of-window addresses
// std::out_of_range and geometric precondition failures std::domain_error.

/// Operation called on an object that lacks the required state (for
/// example an exit point requested from a sweep run without a tape).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Experiment configuration rejected during validation (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Output could not be written (CLI exit code 4).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lpplab
