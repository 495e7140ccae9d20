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

#include <string>
#include <string_view>
#include <vector>

#include "cis/conditioner.hpp"
#include "cis/exact.hpp"
#include "cis/mdp.hpp"
#include "cis/weights.hpp"

namespace cis {

enum class Scheme { ois, pdis, rcis, scis, reward_cis, uncorrected };

/// Where the conditional weights of a scheme come from. OIS, PDIS and
/// uncorrected returns need none and are always `analytic`.
enum class WeightSource { analytic, oracle, online };

struct EstimatorSpec {
  Scheme scheme = Scheme::ois;
  WeightSource source = WeightSource::analytic;

  /// `ois`, `pdis`, `uncorrected`, or `<scheme>:oracle` / `<scheme>:online`.
  std::string name() const;
  bool operator==(const EstimatorSpec&) const = default;
};

/// Accepts `ois`, `pdis`, `rcis`, `scis`, `reward_cis`, `uncorrected`, with
/// optional `:oracle` / `:online` suffix (the weighted schemes default to oracle).
EstimatorSpec parse_estimator(std::string_view text);
std::vector<EstimatorSpec> parse_estimator_list(std::string_view comma_separated);
std::string format_estimator_list(const std::vector<EstimatorSpec>& specs);

bool uses_conditional_weights(Scheme scheme);

/// Conditioners whose weights the scheme reads for a window of length `horizon`.
std::vector<Conditioner> conditioners_for(Scheme scheme, int horizon);

/// rho_{1:n-1} * G-bar.
double ois_estimate(const Trajectory& traj, double gamma, double terminal_value, const Policy& pi,
                    const Policy& mu);

/// sum_t rho_{1:t} gamma^t R_t + rho_{1:n-1} gamma^n V(X_n).
double pdis_estimate(const Trajectory& traj, double gamma, double terminal_value, const Policy& pi,
                     const Policy& mu);

/// RCIS, SCIS, reward-conditioned and uncorrected returns. `weights` may be
/// null only for `Scheme::uncorrected`.
double conditional_estimate(const Trajectory& traj, double gamma, double terminal_value, const Policy& pi,
                            const Policy& mu, Scheme scheme, const WeightProvider* weights);

/// Dispatch on the descriptor.
double estimate(const EstimatorSpec& spec, const Trajectory& traj, double gamma, double terminal_value,
                const Policy& pi, const Policy& mu, const WeightProvider* weights);

template <ActionValues Q>
double ois_estimate(const Trajectory& traj, const Q& q, const Policy& pi, const Policy& mu, double gamma) {
  return ois_estimate(traj, gamma, state_value(q, pi, traj.final_state()), pi, mu);
}

template <ActionValues Q>
double pdis_estimate(const Trajectory& traj, const Q& q, const Policy& pi, const Policy& mu, double gamma) {
  return pdis_estimate(traj, gamma, state_value(q, pi, traj.final_state()), pi, mu);
}

template <ActionValues Q>
double conditional_estimate(const Trajectory& traj, const Q& q, const Policy& pi, const Policy& mu, double gamma,
                            Scheme scheme, const WeightProvider* weights) {
  return conditional_estimate(traj, gamma, state_value(q, pi, traj.final_state()), pi, mu, scheme, weights);
}

/// Records everything an online provider will later be asked for about `traj`.
void observe_for_scheme(WeightStore& store, Scheme scheme, const Trajectory& traj, const Policy& pi,
                        const Policy& mu, double gamma);

/// Oracle tables for `scheme` built from an enumeration of `start`.
void add_oracle_tables(OracleWeights& oracle, const EnumeratedDistribution& dist, Scheme scheme);

/// Oracle tables for every (start, horizon) combination and every weighted
/// scheme in `schemes`.
OracleWeights build_oracle_weights(const Mdp& mdp, const Policy& mu, const Policy& pi,
                                   const std::vector<StateAction>& starts, const std::vector<int>& horizons,
                                   const std::vector<Scheme>& schemes, double cap = kDefaultEnumerationCap);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact E_mu and Var_mu of an estimator over an enumeration. Weighted schemes
/// use oracle tables derived from `dist` itself; online descriptors are rejected.
Moments estimator_moments(const EnumeratedDistribution& dist, const EstimatorSpec& spec, const QTable& q,
                          const Policy& pi, const Policy& mu);

}  // namespace cis
