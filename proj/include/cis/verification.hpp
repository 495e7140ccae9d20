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
#include <string>
#include <vector>

#include "cis/mdp.hpp"
#include "cis/random.hpp"
#include "cis/weights.hpp"

namespace cis {

/// One battery entry: model, policies, bootstrap Q and window length.
struct VerificationInstance {
  std::string label;
  Mdp mdp;
  Policy pi;
  Policy mu;
  QTable q;
  int horizon = 1;
};

/// 2-4 non-terminal states plus one absorbing state, 2-3 actions, 1-3
/// outcomes per pair with rewards in {0, 1, 2}, Dirichlet policies, N(0, 1) Q.
VerificationInstance random_instance(Rng& rng, int max_horizon = 4);

/// Start 0 moves to state 1 with reward 0; at state 1 both actions pay 1 and
/// absorb. mu = (0.5, 0.5), pi = (0.9, 0.1) at state 1; horizon 2, Q = 0.
VerificationInstance branch_instance();

/// `count` random instances followed by the default chain with n = 3.
std::vector<VerificationInstance> verification_battery(std::uint64_t seed = 20190, int count = 50);

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t comparisons = 0;
  /// Largest violation seen, relative to max(1, |reference|): the gap for
  /// identities, the excess for inequalities.
  double worst = 0.0;
  std::string failure;
};

// Exact checks over every non-terminal start pair of every instance.
CheckResult check_ois_unbiased(const std::vector<VerificationInstance>& battery);
CheckResult check_pdis(const std::vector<VerificationInstance>& battery);
CheckResult check_conditional_unbiased(const std::vector<VerificationInstance>& battery);
CheckResult check_refinement(const std::vector<VerificationInstance>& battery);
CheckResult check_optimal_conditioner(const std::vector<VerificationInstance>& battery);
CheckResult check_return_ratio(const std::vector<VerificationInstance>& battery);
CheckResult check_state_ratio(const std::vector<VerificationInstance>& battery);
/// The enumeration route to (T^pi)^n Q against n Bellman sweeps.
CheckResult check_operator_routes(const std::vector<VerificationInstance>& battery);

/// Golden-section minimiser of `objective` on 20 random batches for both
/// regression objectives, plus convergence of the store on the branch MDP
/// at 2e5 samples.
CheckResult check_regression(std::uint64_t seed = 20190);

/// Argmin over f of sum_i w_i (rho_i - f)^2 by golden-section search on
/// [min rho, max rho]. Candidate pairs are compared through the exact
/// difference of the objective, so the bracket can shrink to rounding level.
double golden_section_minimiser(const std::vector<double>& rho, const std::vector<double>& w);

/// The seven lines of `cis verify`, in order.
std::vector<CheckResult> run_verification(const std::vector<VerificationInstance>& battery,
                                          std::uint64_t seed = 20190);

}  // namespace cis
