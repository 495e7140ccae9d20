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

#include "cis/weights.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cis/errors.hpp"

namespace cis {

void WeightStore::observe(StateAction start, const GroupKey& key, double rho, double psi) {
  if (!std::isfinite(rho) || rho < 0.0) throw InputError("observed rho must be finite and non-negative");
  if (!std::isfinite(psi)) throw InputError("observed psi must be finite");
  auto& acc = entries_[StartKey{start, key}];
  const double psi2 = psi * psi;
  acc.count += 1;
  acc.sum_rho += rho;
  acc.sum_psi2 += psi2;
  acc.sum_rho_psi2 += rho * psi2;
}

double WeightStore::minimiser(const Accumulator& acc) const {
  // With every psi zero the weighted objective is flat; the plain mean is
  // one of its minimisers.
  if (objective_ == RegressionObjective::psi_weighted && acc.sum_psi2 > 0.0) {
    return acc.sum_rho_psi2 / acc.sum_psi2;
  }
  return acc.sum_rho / static_cast<double>(acc.count);
}

std::optional<double> WeightStore::find(StateAction start, const GroupKey& key) const {
  const auto it = entries_.find(StartKey{start, key});
  if (it == entries_.end()) return std::nullopt;
  return minimiser(it->second);
}

double WeightStore::query(StateAction start, const GroupKey& key, std::optional<double> fallback) const {
  if (auto w = find(start, key)) return *w;
  if (fallback) return *fallback;
  throw MissingWeight("no observations for key " + key.to_string() + " from (" + std::to_string(start.state) +
                      ", " + std::to_string(start.action) + ")");
}

void WeightStore::write_csv(std::ostream& out) const {
  std::vector<const std::pair<const StartKey, Accumulator>*> rows;
  rows.reserve(entries_.size());
  for (const auto& e : entries_) rows.push_back(&e);
  std::sort(rows.begin(), rows.end(), [](const auto* l, const auto* r) {
    if (l->first.start != r->first.start) return l->first.start < r->first.start;
    return l->first.key < r->first.key;
  });
  out << "x,a,key,count,weight\n";
  for (const auto* row : rows) {
    out << row->first.start.state << ',' << row->first.start.action << ',' << row->first.key.to_string() << ','
        << row->second.count << ',' << format_double(minimiser(row->second)) << '\n';
  }
}

double regression_target(const Conditioner& phi, const Trajectory& traj, double gamma) {
  using Kind = Conditioner::Kind;
  switch (phi.kind()) {
    case Kind::full_trajectory:
    case Kind::constant:
    case Kind::return_value:
    case Kind::reward_sequence:
      return truncated_return(traj, gamma);
    case Kind::reward_at:
    case Kind::state_action_reward_at:
    case Kind::per_decision_prefix:
      return std::pow(gamma, phi.time()) * traj.reward(phi.time());
    case Kind::state_at:
      return 1.0;
  }
  return 1.0;
}

WeightStore fit_batch(const std::vector<Trajectory>& batch, const Conditioner& phi, const Policy& pi,
                      const Policy& mu, double gamma, RegressionObjective objective) {
  WeightStore store(objective);
  if (batch.empty()) return store;
  const int n = batch.front().horizon();
  for (const auto& traj : batch) {
    if (traj.horizon() != n) throw InputError("fit_batch needs trajectories of a common horizon");
    const double rho = importance_ratio(traj, pi, mu, 1, n - 1);
    store.observe(traj.start(), phi.key(traj, gamma), rho, regression_target(phi, traj, gamma));
  }
  return store;
}

void OracleWeights::add(StateAction start, const ConditionalWeightTable& table) {
  for (const auto& [key, w] : table.weights()) weights_.insert_or_assign(StartKey{start, key}, w);
}

double OracleWeights::weight(StateAction start, const GroupKey& key, double /*raw_rho*/) const {
  const auto it = weights_.find(StartKey{start, key});
  if (it == weights_.end()) {
    throw MissingWeight("oracle has no weight for key " + key.to_string() + " from (" +
                        std::to_string(start.state) + ", " + std::to_string(start.action) + ")");
  }
  return it->second;
}

double OnlineWeights::weight(StateAction start, const GroupKey& key, double raw_rho) const {
  return store_->query(start, key, unseen_ == UnseenKey::raw_rho ? std::optional<double>(raw_rho) : std::nullopt);
}

}  // namespace cis
