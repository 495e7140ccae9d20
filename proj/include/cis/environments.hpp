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

#include "cis/mdp.hpp"
#include "cis/random.hpp"

namespace cis {

/// Chain with `n_interior` non-terminal states 1..K between absorbing ends
/// 0 (left) and K+1 (right).
struct ChainSpec {
  int n_interior = 6;
  double noise = 0.1;
  int extra_actions = 0;
  double step_reward = 1.0;
  double absorb_reward = 10.0;
  /// Third interior state from the left.
  int initial_state = 3;
  double gamma = 0.99;

  void validate() const;
};

/// Action index -> direction: even indices move left, odd indices move right.
inline bool moves_right(int action) { return action % 2 == 1; }

/// Replicated left/right actions; with probability `noise` the move goes to
/// a uniformly chosen neighbour instead of the intended one.
Mdp build_chain(const ChainSpec& spec);

/// Dirichlet(1, ..., 1) rows via normalised exponentials; terminal rows are {1}.
Policy random_dirichlet_policy(const Mdp& mdp, Rng& rng);

/// How the Gaussian parameter of `random_q_function` is read.
enum class GaussianParam { variance, stddev };

/// i.i.d. N(0, param) on non-terminal entries, zero on terminal ones.
QTable random_q_function(const Mdp& mdp, double param, Rng& rng, GaussianParam kind = GaussianParam::variance);

}  // namespace cis
