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

#include <optional>
#include <string_view>
#include <vector>

#include "cis/estimators.hpp"
#include "cis/mdp.hpp"
#include "cis/random.hpp"
#include "cis/weights.hpp"

namespace cis {

using TabularQ = QTable;

/// Linear tile coding over a chain with interior states 1..K: weight
/// w_{k,a} (k = 1..K-1) covers the segment between interior states k and k+1.
/// Q(x_1,a) = w_{1,a}, Q(x_K,a) = w_{K-1,a}, and every other interior state
/// averages its two neighbouring segments. Terminal states are not parameterised.
class TileCodedQ {
 public:
  explicit TileCodedQ(const Mdp& chain);

  double value(int state, int action) const;
  /// k in 1..K-1.
  double weight(int k, int action) const { return weights_[index(k, action)]; }
  void set_weight(int k, int action, double w) { weights_[index(k, action)] = w; }

  int num_interior() const { return num_interior_; }
  int num_actions() const { return num_actions_; }

  /// Semi-gradient step w += alpha (target - Q(x,a)) grad Q(x,a); no-op on terminals.
  void apply_update(int state, int action, double target, double alpha);

 private:
  std::size_t index(int k, int action) const {
    return static_cast<std::size_t>(k - 1) * num_actions_ + action;
  }

  int num_interior_;
  int num_actions_;
  std::vector<double> weights_;
};

/// Q(x,a) += alpha (target - Q(x,a)); terminal entries stay pinned.
void apply_update(TabularQ& q, int state, int action, double target, double alpha);
inline void apply_update(TileCodedQ& q, int state, int action, double target, double alpha) {
  q.apply_update(state, action, target, alpha);
}

enum class ReprKind { tabular, tilecode };
/// Every visited step, or only the first step of each episode.
enum class UpdateMode { per_visit, episode_start };
enum class MseWeighting { uniform, initial };
/// Online stores: add the window before reading its weight, or after.
enum class OnlineOrder { update_then_query, query_then_update };

std::string_view to_string(ReprKind kind);
std::string_view to_string(UpdateMode mode);
std::string_view to_string(MseWeighting weighting);
std::string_view to_string(OnlineOrder order);
ReprKind parse_repr(std::string_view text);
UpdateMode parse_update_mode(std::string_view text);
MseWeighting parse_mse_weighting(std::string_view text);
OnlineOrder parse_online_order(std::string_view text);

struct PolicyEvalOptions {
  int horizon = 3;
  int episodes = 2000;
  double alpha = 0.1;
  int episode_cap = 100;
  UpdateMode update_mode = UpdateMode::per_visit;
  MseWeighting mse_weighting = MseWeighting::uniform;
  OnlineOrder online_order = OnlineOrder::update_then_query;
  RegressionObjective objective = RegressionObjective::plain;
};

/// A behaviour episode: X_0..X_T, A_0..A_{T-1}, R_0..R_{T-1}.
struct Episode {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;

  int length() const { return static_cast<int>(rewards.size()); }
};

/// X_0 ~ nu, A_t ~ mu, until absorption or `cap` steps.
Episode sample_episode(const Mdp& mdp, const Policy& mu, int cap, Rng& rng);

/// The n-step window starting at t. Absorbed episodes are padded with stay
/// steps (reward 0, ratio 1); episodes cut by the cap yield shorter windows.
Trajectory episode_window(const Mdp& mdp, const Episode& episode, int t, int horizon);

/// Mean squared error against `truth` over non-terminal (x, a).
template <ActionValues Q>
double value_mse(const Mdp& mdp, const Q& q, const QTable& truth, MseWeighting weighting) {
  double total = 0.0;
  double mass = 0.0;
  for (int x = 0; x < mdp.num_states(); ++x) {
    if (mdp.is_terminal(x)) continue;
    const double w = weighting == MseWeighting::uniform ? 1.0 : mdp.initial()[x];
    if (w == 0.0) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double d = q.value(x, a) - truth.value(x, a);
      total += w * d * d;
      mass += w;
    }
  }
  return total / mass;
}

struct PolicyEvalResult {
  std::optional<TabularQ> tabular;
  std::optional<TileCodedQ> tilecode;
  /// mse[0] before any episode, mse[e] after episode e.
  std::vector<double> mse;
};

/// n-step off-policy TD evaluation of pi from mu-episodes. `oracle` must hold
/// tables for every non-terminal start pair and window length when `spec`
/// is oracle-backed; online descriptors use a private WeightStore.
PolicyEvalResult run_policy_evaluation(const Mdp& mdp, const Policy& pi, const Policy& mu, const EstimatorSpec& spec,
                                       const OracleWeights* oracle, ReprKind repr, const PolicyEvalOptions& options,
                                       const QTable& q_pi, Rng rng);

}  // namespace cis
