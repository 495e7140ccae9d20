// Copyright 2026 The CIS-OPE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cis {

/// Malformed arguments: out-of-range indices, invalid probabilities, bad config.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// pi puts mass on an action that mu never takes.
class SupportViolation : public std::runtime_error {
 public:
  SupportViolation(int state, int action)
      : std::runtime_error("support condition violated at state " + std::to_string(state) +
                           ", action " + std::to_string(action)),
        state_(state),
        action_(action) {}

  int state() const { return state_; }
  int action() const { return action_; }

 private:
  int state_;
  int action_;
};

/// A conditional weight was requested for a key nobody has observed.
class MissingWeight : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive enumeration would exceed the configured atom budget.
class EnumerationLimit : public std::runtime_error {
 public:
  EnumerationLimit(double estimated, double cap)
      : std::runtime_error("trajectory enumeration would produce " + std::to_string(estimated) +
                           " atoms, above the cap of " + std::to_string(cap)),
        estimated_(estimated) {}

  double estimated() const { return estimated_; }

 private:
  double estimated_;
};

}  // namespace cis
