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

#include "cis/conditioner.hpp"

#include <cmath>

#include "cis/errors.hpp"

namespace cis {

std::int64_t quantize(double value) {
  constexpr double kScale = 1e12;
  // |value| * 1e12 must stay inside int64.
  if (!std::isfinite(value) || std::abs(value) > 9.0e6) {
    throw InputError("value " + format_double(value) + " cannot be used as a grouping key");
  }
  return std::llround(value * kScale);
}

std::string GroupKey::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ':';
    out += std::to_string(parts[i]);
  }
  return out;
}

std::size_t GroupKeyHash::operator()(const GroupKey& key) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t p : key.parts) {
    h ^= static_cast<std::uint64_t>(p) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

GroupKey Conditioner::key(const Trajectory& traj, double gamma) const {
  const int n = traj.horizon();
  GroupKey key;
  key.parts = {static_cast<std::int64_t>(kind_), time_, n};
  auto& p = key.parts;
  auto require_time = [&](int upper) {
    if (time_ < 0 || time_ > upper) throw InputError(name() + ": time index outside the window");
  };
  switch (kind_) {
    case Kind::full_trajectory:
      p.reserve(3 + 3 * static_cast<std::size_t>(n) + 1);
      for (int t = 0; t < n; ++t) {
        p.push_back(traj.state(t));
        p.push_back(traj.action(t));
        p.push_back(quantize(traj.reward(t)));
      }
      p.push_back(traj.final_state());
      break;
    case Kind::constant:
      break;
    case Kind::return_value:
      p.push_back(quantize(truncated_return(traj, gamma)));
      break;
    case Kind::reward_sequence:
      for (double r : traj.rewards()) p.push_back(quantize(r));
      break;
    case Kind::reward_at:
      require_time(n - 1);
      p.push_back(quantize(traj.reward(time_)));
      break;
    case Kind::state_action_reward_at:
      require_time(n - 1);
      p.push_back(traj.state(time_));
      p.push_back(traj.action(time_));
      p.push_back(quantize(traj.reward(time_)));
      break;
    case Kind::per_decision_prefix:
      require_time(n - 1);
      for (int t = 0; t <= time_; ++t) {
        p.push_back(traj.state(t));
        p.push_back(traj.action(t));
      }
      p.push_back(quantize(traj.reward(time_)));
      break;
    case Kind::state_at:
      require_time(n);
      p.push_back(traj.state(time_));
      break;
  }
  return key;
}

bool Conditioner::sufficient_for_return() const {
  return kind_ == Kind::return_value || kind_ == Kind::reward_sequence || kind_ == Kind::full_trajectory;
}

bool Conditioner::sufficient_for_reward(int t) const {
  switch (kind_) {
    case Kind::full_trajectory:
    case Kind::reward_sequence:
      return true;
    case Kind::reward_at:
    case Kind::state_action_reward_at:
    case Kind::per_decision_prefix:
      return time_ == t;
    default:
      return false;
  }
}

std::string Conditioner::name() const {
  switch (kind_) {
    case Kind::full_trajectory: return "full_trajectory";
    case Kind::constant: return "constant";
    case Kind::return_value: return "return";
    case Kind::reward_sequence: return "reward_sequence";
    case Kind::reward_at: return "reward_at(" + std::to_string(time_) + ")";
    case Kind::state_action_reward_at: return "state_action_reward_at(" + std::to_string(time_) + ")";
    case Kind::per_decision_prefix: return "per_decision_prefix(" + std::to_string(time_) + ")";
    case Kind::state_at: return "state_at(" + std::to_string(time_) + ")";
  }
  return "unknown";
}

}  // namespace cis
