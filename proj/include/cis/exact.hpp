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

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <unordered_map>
#include <vector>

#include "cis/conditioner.hpp"
#include "cis/mdp.hpp"

namespace cis {

inline constexpr double kDefaultEnumerationCap = 1e7;

struct Atom {
  Trajectory trajectory;
  double p_mu = 0.0;
  double p_pi = 0.0;
};

/// Exact law of tau_{0:n} from a fixed start pair, under mu (with the
/// matching pi probabilities). Only atoms with p_mu > 0 are kept.
class EnumeratedDistribution {
 public:
  EnumeratedDistribution(StateAction start, int horizon, double gamma, std::vector<Atom> atoms)
      : start_(start), horizon_(horizon), gamma_(gamma), atoms_(std::move(atoms)) {}

  StateAction start() const { return start_; }
  int horizon() const { return horizon_; }
  double gamma() const { return gamma_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

  /// E_mu[f(tau)] and Var_mu(f(tau)), summed over atoms.
  template <typename F>
  std::pair<double, double> moments(F&& f) const {
    double mean = 0.0;
    for (const auto& atom : atoms_) mean += atom.p_mu * f(atom.trajectory);
    double var = 0.0;
    for (const auto& atom : atoms_) {
      const double d = f(atom.trajectory) - mean;
      var += atom.p_mu * d * d;
    }
    return {mean, var};
  }

  /// E_pi[f(tau)] over the mu-support (exact under the support condition).
  template <typename F>
  double target_mean(F&& f) const {
    double mean = 0.0;
    for (const auto& atom : atoms_) mean += atom.p_pi * f(atom.trajectory);
    return mean;
  }

 private:
  StateAction start_;
  int horizon_;
  double gamma_;
  std::vector<Atom> atoms_;
};

enum class Measure { behaviour, target };

/// Number of trajectories with p_mu > 0, counted by dynamic programming.
double count_trajectories(const Mdp& mdp, const Policy& mu, StateAction start, int horizon);

/// Throws SupportViolation when a trajectory with p_pi > 0 leaves mu's support,
/// and EnumerationLimit when the atom count exceeds `cap`.
EnumeratedDistribution enumerate_trajectories(const Mdp& mdp, const Policy& mu, const Policy& pi,
                                              StateAction start, int horizon,
                                              double cap = kDefaultEnumerationCap);

/// ((T^pi)^n Q)(x, a) by summing over pi-trajectories.
double exact_operator(const Mdp& mdp, const Policy& pi, const QTable& q, int horizon, StateAction start,
                      double cap = kDefaultEnumerationCap);

/// One application of T^pi to every entry.
QTable apply_bellman(const Mdp& mdp, const Policy& pi, const QTable& q);

/// Value iteration from zero; the result satisfies ||T^pi Q - Q||_inf < tol.
QTable solve_q_pi(const Mdp& mdp, const Policy& pi, double tol);

/// pmf of the truncated return, keyed by quantized return.
std::map<std::int64_t, double> return_distribution(const EnumeratedDistribution& dist, Measure which);

/// pmf of X_t, keyed by state.
std::map<int, double> state_marginal(const EnumeratedDistribution& dist, int t, Measure which);

/// E_mu[rho_{1:n-1} | Phi = k] for every realised key k.
class ConditionalWeightTable {
 public:
  ConditionalWeightTable(Conditioner conditioner, std::unordered_map<GroupKey, double, GroupKeyHash> weights)
      : conditioner_(conditioner), weights_(std::move(weights)) {}

  const Conditioner& conditioner() const { return conditioner_; }
  const std::unordered_map<GroupKey, double, GroupKeyHash>& weights() const { return weights_; }

  /// nullptr when the key was never realised under mu.
  const double* find(const GroupKey& key) const {
    const auto it = weights_.find(key);
    return it == weights_.end() ? nullptr : &it->second;
  }

 private:
  Conditioner conditioner_;
  std::unordered_map<GroupKey, double, GroupKeyHash> weights_;
};

ConditionalWeightTable exact_conditional_weight(const EnumeratedDistribution& dist, const Conditioner& phi);

/// Debug dump: trajectory,p_mu,p_pi,rho,return.
void write_atoms_csv(std::ostream& out, const EnumeratedDistribution& dist);

/// Compact "x:a:r x:a:r ... x" rendering used in dumps.
std::string describe(const Trajectory& traj);

}  // namespace cis
