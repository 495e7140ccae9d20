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
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "cis/conditioner.hpp"
#include "cis/exact.hpp"
#include "cis/mdp.hpp"

namespace cis {

/// (start pair, conditioner key): the unit a conditional weight is attached to.
struct StartKey {
  StateAction start;
  GroupKey key;

  bool operator==(const StartKey&) const = default;
};

struct StartKeyHash {
  std::size_t operator()(const StartKey& k) const noexcept {
    const std::size_t h = GroupKeyHash{}(k.key);
    return h ^ (static_cast<std::size_t>(k.start.state) * 0x9E3779B1u + static_cast<std::size_t>(k.start.action) +
                (h << 6) + (h >> 2));
  }
};

/// Objective minimised per key: plain squared error, or squared error scaled
/// by the squared target value Psi(tau)^2.
enum class RegressionObjective { plain, psi_weighted };

/// Exact empirical minimiser of the weight-regression objectives, one
/// accumulator per observed (start, key). Single writer; readers may share
/// it between write phases.
class WeightStore {
 public:
  struct Accumulator {
    std::int64_t count = 0;
    double sum_rho = 0.0;
    double sum_psi2 = 0.0;
    double sum_rho_psi2 = 0.0;
  };

  explicit WeightStore(RegressionObjective objective = RegressionObjective::plain) : objective_(objective) {}

  /// Throws InputError for negative or non-finite rho, or non-finite psi.
  void observe(StateAction start, const GroupKey& key, double rho, double psi);

  /// Minimiser for an observed key, nullopt otherwise.
  std::optional<double> find(StateAction start, const GroupKey& key) const;

  /// Minimiser, or `fallback` for unseen keys; MissingWeight when neither exists.
  double query(StateAction start, const GroupKey& key, std::optional<double> fallback) const;

  RegressionObjective objective() const { return objective_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::unordered_map<StartKey, Accumulator, StartKeyHash>& entries() const { return entries_; }

  /// Debug dump: x,a,key,count,weight (sorted for stable output).
  void write_csv(std::ostream& out) const;

 private:
  double minimiser(const Accumulator& acc) const;

  RegressionObjective objective_;
  std::unordered_map<StartKey, Accumulator, StartKeyHash> entries_;
};

/// Psi for a conditioner: the truncated return for return-level conditioners,
/// gamma^t R_t for reward-level ones, 1 otherwise.
double regression_target(const Conditioner& phi, const Trajectory& traj, double gamma);

/// Folds `observe` over a batch with rho = rho_{1:n-1}.
WeightStore fit_batch(const std::vector<Trajectory>& batch, const Conditioner& phi, const Policy& pi,
                      const Policy& mu, double gamma, RegressionObjective objective);

/// Source of conditional importance weights consumed by the estimators.
class WeightProvider {
 public:
  virtual ~WeightProvider() = default;
  /// `raw_rho` is the trajectory's own rho_{1:n-1}, used as the unseen-key fallback.
  virtual double weight(StateAction start, const GroupKey& key, double raw_rho) const = 0;
};

/// Exact tables computed by enumeration.
class OracleWeights final : public WeightProvider {
 public:
  void add(StateAction start, const ConditionalWeightTable& table);
  double weight(StateAction start, const GroupKey& key, double raw_rho) const override;
  std::size_t size() const { return weights_.size(); }

 private:
  std::unordered_map<StartKey, double, StartKeyHash> weights_;
};

enum class UnseenKey { raw_rho, error };

/// Reads from a WeightStore the caller keeps up to date.
class OnlineWeights final : public WeightProvider {
 public:
  explicit OnlineWeights(const WeightStore& store, UnseenKey unseen = UnseenKey::raw_rho)
      : store_(&store), unseen_(unseen) {}

  double weight(StateAction start, const GroupKey& key, double raw_rho) const override;

 private:
  const WeightStore* store_;
  UnseenKey unseen_;
};

}  // namespace cis
