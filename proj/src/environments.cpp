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

#include "cis/environments.hpp"

#include <cmath>

#include "cis/errors.hpp"

namespace cis {

void ChainSpec::validate() const {
  if (n_interior < 2) throw InputError("chain needs at least two interior states");
  if (!(noise >= 0.0 && noise <= 1.0)) throw InputError("noise must lie in [0, 1]");
  if (extra_actions < 0) throw InputError("extra actions must be non-negative");
  if (initial_state < 1 || initial_state > n_interior) throw InputError("initial state must be interior");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0, 1)");
}

Mdp build_chain(const ChainSpec& spec) {
  spec.validate();
  const int k = spec.n_interior;
  const int num_states = k + 2;
  const int num_actions = 2 * (1 + spec.extra_actions);
  std::vector<bool> terminal(static_cast<std::size_t>(num_states), false);
  terminal.front() = true;
  terminal.back() = true;
  std::vector<double> initial(static_cast<std::size_t>(num_states), 0.0);
  initial[spec.initial_state] = 1.0;

  auto reward_for = [&](int next) { return (next == 0 || next == k + 1) ? spec.absorb_reward : spec.step_reward; };

  std::vector<std::vector<Outcome>> transitions(static_cast<std::size_t>(num_states) * num_actions);
  for (int x = 1; x <= k; ++x) {
    for (int a = 0; a < num_actions; ++a) {
      const int intended = moves_right(a) ? x + 1 : x - 1;
      const int other = moves_right(a) ? x - 1 : x + 1;
      const double p_intended = (1.0 - spec.noise) + 0.5 * spec.noise;
      const double p_other = 0.5 * spec.noise;
      auto& outs = transitions[static_cast<std::size_t>(x) * num_actions + a];
      outs.push_back({intended, reward_for(intended), p_intended});
      if (p_other > 0.0) outs.push_back({other, reward_for(other), p_other});
    }
  }
  return Mdp(num_states, num_actions, spec.gamma, std::move(terminal), std::move(initial), std::move(transitions));
}

Policy random_dirichlet_policy(const Mdp& mdp, Rng& rng) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(mdp.num_states()));
  for (int x = 0; x < mdp.num_states(); ++x) {
    auto& row = rows[x];
    const int k = mdp.num_actions(x);
    if (k == 1) {
      row = {1.0};
      continue;
    }
    row.resize(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& v : row) {
      v = rng.exponential();
      total += v;
    }
    for (auto& v : row) v /= total;
  }
  return Policy(std::move(rows));
}

QTable random_q_function(const Mdp& mdp, double param, Rng& rng, GaussianParam kind) {
  if (!(param > 0.0)) throw InputError("gaussian parameter must be positive");
  const double stddev = kind == GaussianParam::variance ? std::sqrt(param) : param;
  QTable q(mdp);
  for (int x = 0; x < mdp.num_states(); ++x) {
    if (mdp.is_terminal(x)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) q.set(x, a, stddev * rng.normal());
  }
  return q;
}

}  // namespace cis
