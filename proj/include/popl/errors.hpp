// Copyright 2026 The POPL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef POPL_ERRORS_HPP_
#define POPL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace popl {

// Raised when a caller passes an incompatible combination of objects or
// settings (mismatched dimensions, mixed hypothesis kinds, bad config).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for out-of-domain values (NaN utilities, states outside [0, 1]).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Segment or preference index outside the referenced collection.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Iterative solver failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace popl

#endif  // POPL_ERRORS_HPP_
