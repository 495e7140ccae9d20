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

#include <compare>
#include <concepts>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cis/random.hpp"

namespace cis {

struct StateAction {
  int state = 0;
  int action = 0;

  auto operator<=>(const StateAction&) const = default;
};

/// One entry of the joint (next state, reward) law of a state-action pair.
struct Outcome {
  int next_state = 0;
  double reward = 0.0;
  double probability = 0.0;
};

/// Finite MDP with a joint successor/reward law.
///
/// Terminal states expose exactly one action (index 0, "stay") that loops
/// back with probability one and reward zero; non-terminal states expose
/// `num_actions()` actions. Immutable after construction.
class Mdp {
 public:
  /// `transitions[x * num_actions + a]` lists the outcomes of (x, a). Entries
  /// for terminal states may be left empty; they are filled with the stay loop.
  Mdp(int num_states, int num_actions, double gamma, std::vector<bool> terminal,
      std::vector<double> initial, std::vector<std::vector<Outcome>> transitions);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_actions(int state) const { return terminal_[state] ? 1 : num_actions_; }
  double gamma() const { return gamma_; }
  bool is_terminal(int state) const { return terminal_[state]; }
  std::span<const double> initial() const { return initial_; }

  std::span<const Outcome> outcomes(int state, int action) const {
    return transitions_[static_cast<std::size_t>(state) * num_actions_ + action];
  }

  bool valid(StateAction sa) const {
    return sa.state >= 0 && sa.state < num_states_ && sa.action >= 0 &&
           sa.action < num_actions(sa.state);
  }

  /// Non-terminal (x, a) pairs in row-major order.
  std::vector<StateAction> nonterminal_pairs() const;

 private:
  int num_states_;
  int num_actions_;
  double gamma_;
  std::vector<bool> terminal_;
  std::vector<double> initial_;
  std::vector<std::vector<Outcome>> transitions_;
};

/// Markov policy: one action distribution per state, sized to that state's action set.
class Policy {
 public:
  Policy() = default;
  explicit Policy(std::vector<std::vector<double>> probs);

  static Policy uniform(const Mdp& mdp);

  int num_states() const { return static_cast<int>(probs_.size()); }
  int num_actions(int state) const { return static_cast<int>(probs_[state].size()); }
  double prob(int state, int action) const { return probs_[state][action]; }
  std::span<const double> row(int state) const { return probs_[state]; }

  /// Throws InputError unless every row matches the MDP's action set.
  void require_compatible(const Mdp& mdp) const;

  bool operator==(const Policy&) const = default;

 private:
  std::vector<std::vector<double>> probs_;
};

/// Truncated record tau_{0:n}: start pair (X_0, A_0), X_{1:n}, A_{1:n-1}, R_{0:n-1}.
class Trajectory {
 public:
  Trajectory() = default;
  /// `states` holds X_1..X_n, `actions` A_1..A_{n-1}, `rewards` R_0..R_{n-1}.
  Trajectory(StateAction start, std::vector<int> states, std::vector<int> actions,
             std::vector<double> rewards);

  int horizon() const { return static_cast<int>(rewards_.size()); }
  StateAction start() const { return {states_[0], actions_[0]}; }

  /// X_t for 0 <= t <= n.
  int state(int t) const { return states_[t]; }
  /// A_t for 0 <= t <= n-1.
  int action(int t) const { return actions_[t]; }
  /// R_t for 0 <= t <= n-1.
  double reward(int t) const { return rewards_[t]; }

  int final_state() const { return states_.back(); }

  std::span<const int> all_states() const { return states_; }
  std::span<const int> all_actions() const { return actions_; }
  std::span<const double> rewards() const { return rewards_; }

  bool operator==(const Trajectory&) const = default;

 private:
  std::vector<int> states_;   // X_0..X_n
  std::vector<int> actions_;  // A_0..A_{n-1}
  std::vector<double> rewards_;
};

/// Tabular action values with terminal entries pinned to zero.
class QTable {
 public:
  QTable() = default;
  explicit QTable(const Mdp& mdp);

  double value(int state, int action) const {
    return values_[static_cast<std::size_t>(state) * num_actions_ + action];
  }
  /// Writes to terminal states are ignored.
  void set(int state, int action, double v);
  bool is_terminal(int state) const { return terminal_[state]; }
  int num_states() const { return static_cast<int>(terminal_.size()); }
  int num_actions() const { return num_actions_; }

  std::span<const double> values() const { return values_; }

 private:
  int num_actions_ = 0;
  std::vector<bool> terminal_;
  std::vector<double> values_;
};

/// Anything exposing action values; QTable and TileCodedQ model it.
template <typename Q>
concept ActionValues = requires(const Q& q, int x, int a) {
  { q.value(x, a) } -> std::convertible_to<double>;
};

/// V(x; pi) = sum_a pi(a|x) Q(x, a).
template <ActionValues Q>
double state_value(const Q& q, const Policy& pi, int state) {
  double v = 0.0;
  const auto row = pi.row(state);
  for (int a = 0; a < static_cast<int>(row.size()); ++a) {
    if (row[a] != 0.0) v += row[a] * q.value(state, a);
  }
  return v;
}

/// Draws tau_{0:n} from (x, a) with A_t ~ mu(.|X_t) for t >= 1.
Trajectory sample_trajectory(const Mdp& mdp, const Policy& behaviour, StateAction start, int horizon,
                             Rng& rng);

/// Draws one outcome of (x, a).
const Outcome& sample_outcome(const Mdp& mdp, StateAction sa, Rng& rng);

/// Draws an index from a probability row.
int sample_index(std::span<const double> probs, Rng& rng);

/// supp(pi(.|x)) is contained in supp(mu(.|x)) for every x.
bool check_support_condition(const Policy& pi, const Policy& mu);

/// beta * pi + (1 - beta) * mu, state by state.
Policy mix_policies(const Policy& pi, const Policy& mu, double beta);

/// prod_{i=s}^{t} pi(A_i|X_i) / mu(A_i|X_i); 1 for an empty range.
double importance_ratio(const Trajectory& traj, const Policy& pi, const Policy& mu, int s, int t);

/// sum_{t<n} gamma^t R_t.
double truncated_return(const Trajectory& traj, double gamma);

/// Truncated return plus gamma^n * `terminal_value`, summed in the order every
/// estimator uses so that unit weights reproduce it bit-for-bit.
double bootstrapped_return(const Trajectory& traj, double gamma, double terminal_value);

template <ActionValues Q>
double bootstrapped_return(const Trajectory& traj, const Q& q, const Policy& pi, double gamma) {
  return bootstrapped_return(traj, gamma, state_value(q, pi, traj.final_state()));
}

/// Plain-text MDP format; see README for the grammar.
void write_mdp(std::ostream& out, const Mdp& mdp);
Mdp read_mdp(std::istream& in);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace cis
