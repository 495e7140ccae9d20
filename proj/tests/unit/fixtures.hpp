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

#include <vector>

#include "cis/mdp.hpp"

namespace cis::testing {

// s0 -a-> T with reward 1 for both actions.
inline Mdp one_step_mdp() {
  std::vector<std::vector<Outcome>> t(4);
  t[0] = {{1, 1.0, 1.0}};
  t[1] = {{1, 1.0, 1.0}};
  return Mdp(2, 2, 0.9, {false, true}, {1.0, 0.0}, std::move(t));
}

// One non-terminal state with a self-loop and an exit. Action 0 stays with
// reward 0 or 1 (0.5/0.5), action 1 exits to T with probability 0.3 (reward 2)
// and otherwise stays (reward 0).
inline Mdp two_state_mdp() {
  std::vector<std::vector<Outcome>> t(4);
  t[0] = {{0, 0.0, 0.5}, {0, 1.0, 0.5}};
  t[1] = {{1, 2.0, 0.3}, {0, 0.0, 0.7}};
  return Mdp(2, 2, 0.8, {false, true}, {1.0, 0.0}, std::move(t));
}

inline Policy two_state_mu() { return Policy({{0.4, 0.6}, {1.0}}); }
inline Policy two_state_pi() { return Policy({{0.8, 0.2}, {1.0}}); }

}  // namespace cis::testing
