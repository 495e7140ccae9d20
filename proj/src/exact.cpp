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

#include "cis/exact.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cis/errors.hpp"

namespace cis {

double count_trajectories(const Mdp& mdp, const Policy& mu, StateAction start, int horizon) {
  if (!mdp.valid(start)) throw InputError("start pair out of range");
  if (horizon < 1) throw InputError("horizon must be at least 1");
  // paths[x] = number of continuations of length `remaining` from state x
  // (the action at x still to be chosen).
  const auto num_states = static_cast<std::size_t>(mdp.num_states());
  std::vector<double> paths(num_states, 1.0);
  for (int remaining = 1; remaining < horizon; ++remaining) {
    std::vector<double> next(num_states, 0.0);
    for (int x = 0; x < mdp.num_states(); ++x) {
      for (int a = 0; a < mdp.num_actions(x); ++a) {
        if (!(mu.prob(x, a) > 0.0)) continue;
        for (const auto& o : mdp.outcomes(x, a)) {
          if (o.probability > 0.0) next[x] += paths[o.next_state];
        }
      }
    }
    paths = std::move(next);
  }
  double total = 0.0;
  for (const auto& o : mdp.outcomes(start.state, start.action)) {
    if (o.probability > 0.0) total += paths[o.next_state];
  }
  return total;
}

EnumeratedDistribution enumerate_trajectories(const Mdp& mdp, const Policy& mu, const Policy& pi,
                                              StateAction start, int horizon, double cap) {
  mu.require_compatible(mdp);
  pi.require_compatible(mdp);
  const double estimated = count_trajectories(mdp, mu, start, horizon);
  if (estimated > cap) throw EnumerationLimit(estimated, cap);

  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(estimated));
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  states.reserve(horizon);
  actions.reserve(horizon);
  rewards.reserve(horizon);

  // Expand the outcomes of (x, a) at step t; p_mu and p_pi already include
  // the probability of choosing a.
  auto expand = [&](auto&& self, StateAction sa, int t, double p_mu, double p_pi) -> void {
    for (const auto& o : mdp.outcomes(sa.state, sa.action)) {
      if (!(o.probability > 0.0)) continue;
      const double q_mu = p_mu * o.probability;
      const double q_pi = p_pi * o.probability;
      states.push_back(o.next_state);
      rewards.push_back(o.reward);
      if (t + 1 == horizon) {
        atoms.push_back({Trajectory(start, states, actions, rewards), q_mu, q_pi});
      } else {
        const int x = o.next_state;
        for (int a = 0; a < mdp.num_actions(x); ++a) {
          const double m = mu.prob(x, a);
          const double p = pi.prob(x, a);
          if (!(m > 0.0)) {
            if (p > 0.0 && q_pi > 0.0) throw SupportViolation(x, a);
            continue;
          }
          actions.push_back(a);
          self(self, StateAction{x, a}, t + 1, q_mu * m, q_pi * p);
          actions.pop_back();
        }
      }
      states.pop_back();
      rewards.pop_back();
    }
  };
  expand(expand, start, 0, 1.0, 1.0);
  return EnumeratedDistribution(start, horizon, mdp.gamma(), std::move(atoms));
}

double exact_operator(const Mdp& mdp, const Policy& pi, const QTable& q, int horizon, StateAction start,
                      double cap) {
  const auto dist = enumerate_trajectories(mdp, pi, pi, start, horizon, cap);
  double total = 0.0;
  for (const auto& atom : dist.atoms()) {
    total += atom.p_pi * bootstrapped_return(atom.trajectory, q, pi, mdp.gamma());
  }
  return total;
}

QTable apply_bellman(const Mdp& mdp, const Policy& pi, const QTable& q) {
  QTable next(mdp);
  std::vector<double> v(static_cast<std::size_t>(mdp.num_states()), 0.0);
  for (int x = 0; x < mdp.num_states(); ++x) v[x] = state_value(q, pi, x);
  for (int x = 0; x < mdp.num_states(); ++x) {
    if (mdp.is_terminal(x)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      double total = 0.0;
      for (const auto& o : mdp.outcomes(x, a)) {
        total += o.probability * (o.reward + mdp.gamma() * v[o.next_state]);
      }
      next.set(x, a, total);
    }
  }
  return next;
}

QTable solve_q_pi(const Mdp& mdp, const Policy& pi, double tol) {
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  pi.require_compatible(mdp);
  const double gamma = mdp.gamma();
  QTable q(mdp);
  if (gamma == 0.0) return apply_bellman(mdp, pi, q);
  const double threshold = tol * (1.0 - gamma) / gamma;
  while (true) {
    QTable next = apply_bellman(mdp, pi, q);
    double delta = 0.0;
    for (std::size_t i = 0; i < next.values().size(); ++i) {
      delta = std::max(delta, std::abs(next.values()[i] - q.values()[i]));
    }
    q = std::move(next);
    if (delta < threshold) return q;
  }
}

std::map<std::int64_t, double> return_distribution(const EnumeratedDistribution& dist, Measure which) {
  std::map<std::int64_t, double> pmf;
  for (const auto& atom : dist.atoms()) {
    const double mass = which == Measure::behaviour ? atom.p_mu : atom.p_pi;
    pmf[quantize(truncated_return(atom.trajectory, dist.gamma()))] += mass;
  }
  return pmf;
}

std::map<int, double> state_marginal(const EnumeratedDistribution& dist, int t, Measure which) {
  if (t < 0 || t > dist.horizon()) throw InputError("time index outside [0, n]");
  std::map<int, double> pmf;
  for (const auto& atom : dist.atoms()) {
    pmf[atom.trajectory.state(t)] += which == Measure::behaviour ? atom.p_mu : atom.p_pi;
  }
  return pmf;
}

ConditionalWeightTable exact_conditional_weight(const EnumeratedDistribution& dist, const Conditioner& phi) {
  struct Mass {
    double pi = 0.0;
    double mu = 0.0;
  };
  std::unordered_map<GroupKey, Mass, GroupKeyHash> grouped;
  for (const auto& atom : dist.atoms()) {
    auto& m = grouped[phi.key(atom.trajectory, dist.gamma())];
    m.pi += atom.p_pi;
    m.mu += atom.p_mu;
  }
  std::unordered_map<GroupKey, double, GroupKeyHash> weights;
  weights.reserve(grouped.size());
  for (auto& [key, m] : grouped) weights.emplace(key, m.pi / m.mu);
  return ConditionalWeightTable(phi, std::move(weights));
}

std::string describe(const Trajectory& traj) {
  std::string out;
  for (int t = 0; t < traj.horizon(); ++t) {
    out += std::to_string(traj.state(t)) + ':' + std::to_string(traj.action(t)) + ':' +
           format_double(traj.reward(t)) + ' ';
  }
  out += std::to_string(traj.final_state());
  return out;
}

void write_atoms_csv(std::ostream& out, const EnumeratedDistribution& dist) {
  out << "trajectory,p_mu,p_pi,rho,return\n";
  for (const auto& atom : dist.atoms()) {
    out << describe(atom.trajectory) << ',' << format_double(atom.p_mu) << ',' << format_double(atom.p_pi)
        << ',' << format_double(atom.p_pi / atom.p_mu) << ','
        << format_double(truncated_return(atom.trajectory, dist.gamma())) << '\n';
  }
}

}  // namespace cis
