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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cis/mdp.hpp"

namespace cis {

/// Real values are keyed by rounding to 12 decimal digits.
std::int64_t quantize(double value);

/// Canonical grouping key. The first three entries are always
/// (conditioner kind, time index, horizon), so keys produced by different
/// conditioners or window lengths never collide.
struct GroupKey {
  std::vector<std::int64_t> parts;

  bool operator==(const GroupKey&) const = default;
  auto operator<=>(const GroupKey&) const = default;
  std::string to_string() const;
};

struct GroupKeyHash {
  std::size_t operator()(const GroupKey& key) const noexcept;
};

/// A functional Phi of a truncated trajectory.
class Conditioner {
 public:
  enum class Kind : std::int8_t {
    full_trajectory,
    constant,
    return_value,
    reward_at,
    state_action_reward_at,
    per_decision_prefix,
    reward_sequence,
    // X_t alone; conditions the bootstrap term of SCIS.
    state_at,
  };

  static Conditioner full_trajectory() { return {Kind::full_trajectory, 0}; }
  static Conditioner constant() { return {Kind::constant, 0}; }
  static Conditioner return_value() { return {Kind::return_value, 0}; }
  static Conditioner reward_sequence() { return {Kind::reward_sequence, 0}; }
  static Conditioner reward_at(int t) { return {Kind::reward_at, t}; }
  static Conditioner state_action_reward_at(int t) { return {Kind::state_action_reward_at, t}; }
  static Conditioner per_decision_prefix(int t) { return {Kind::per_decision_prefix, t}; }
  static Conditioner state_at(int t) { return {Kind::state_at, t}; }

  Kind kind() const { return kind_; }
  int time() const { return time_; }

  /// Phi(tau). `gamma` is only read by the return conditioner.
  GroupKey key(const Trajectory& traj, double gamma) const;

  /// Whether the truncated return factors through this conditioner.
  bool sufficient_for_return() const;
  /// Whether R_t factors through this conditioner.
  bool sufficient_for_reward(int t) const;

  std::string name() const;

  bool operator==(const Conditioner&) const = default;

 private:
  Conditioner(Kind kind, int time) : kind_(kind), time_(time) {}

  Kind kind_;
  int time_;
};

}  // namespace cis
