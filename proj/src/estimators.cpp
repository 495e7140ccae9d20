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

#include "cis/estimators.hpp"

#include "cis/errors.hpp"

namespace cis {
namespace {

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::ois: return "ois";
    case Scheme::pdis: return "pdis";
    case Scheme::rcis: return "rcis";
    case Scheme::scis: return "scis";
    case Scheme::reward_cis: return "reward_cis";
    case Scheme::uncorrected: return "uncorrected";
  }
  return "?";
}

// Running products rho_{1:t} for t = 0..n-1 (rho_{1:0} = 1).
void prefix_ratios(const Trajectory& traj, const Policy& pi, const Policy& mu, std::vector<double>& out) {
  const int n = traj.horizon();
  out.resize(static_cast<std::size_t>(n));
  double rho = 1.0;
  out[0] = 1.0;
  for (int t = 1; t < n; ++t) {
    const int x = traj.state(t);
    const int a = traj.action(t);
    const double m = mu.prob(x, a);
    if (!(m > 0.0)) throw SupportViolation(x, a);
    rho *= pi.prob(x, a) / m;
    out[t] = rho;
  }
}

}  // namespace

std::string EstimatorSpec::name() const {
  std::string out(scheme_name(scheme));
  if (source == WeightSource::oracle) out += ":oracle";
  if (source == WeightSource::online) out += ":online";
  return out;
}

bool uses_conditional_weights(Scheme scheme) {
  return scheme == Scheme::rcis || scheme == Scheme::scis || scheme == Scheme::reward_cis;
}

EstimatorSpec parse_estimator(std::string_view text) {
  std::string_view base = text;
  std::string_view suffix;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    base = text.substr(0, colon);
    suffix = text.substr(colon + 1);
  }
  EstimatorSpec spec;
  bool found = false;
  for (Scheme s : {Scheme::ois, Scheme::pdis, Scheme::rcis, Scheme::scis, Scheme::reward_cis, Scheme::uncorrected}) {
    if (scheme_name(s) == base) {
      spec.scheme = s;
      found = true;
    }
  }
  if (!found) throw InputError("unknown estimator '" + std::string(text) + "'");
  if (uses_conditional_weights(spec.scheme)) {
    if (suffix.empty() || suffix == "oracle") {
      spec.source = WeightSource::oracle;
    } else if (suffix == "online") {
      spec.source = WeightSource::online;
    } else {
      throw InputError("unknown weight source in '" + std::string(text) + "'");
    }
  } else if (!suffix.empty() && suffix != "oracle" && suffix != "online") {
    throw InputError("unknown weight source in '" + std::string(text) + "'");
  }
  return spec;
}

std::vector<EstimatorSpec> parse_estimator_list(std::string_view text) {
  std::vector<EstimatorSpec> specs;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const auto end = std::min(text.find(',', begin), text.size());
    const auto item = text.substr(begin, end - begin);
    if (item.empty()) throw InputError("empty entry in estimator list '" + std::string(text) + "'");
    specs.push_back(parse_estimator(item));
    begin = end + 1;
  }
  return specs;
}

std::string format_estimator_list(const std::vector<EstimatorSpec>& specs) {
  std::string out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i) out += ',';
    out += specs[i].name();
  }
  return out;
}

std::vector<Conditioner> conditioners_for(Scheme scheme, int horizon) {
  std::vector<Conditioner> out;
  switch (scheme) {
    case Scheme::rcis:
      out.push_back(Conditioner::return_value());
      break;
    case Scheme::scis:
      for (int t = 0; t < horizon; ++t) out.push_back(Conditioner::state_action_reward_at(t));
      out.push_back(Conditioner::state_at(horizon));
      break;
    case Scheme::reward_cis:
      for (int t = 0; t < horizon; ++t) out.push_back(Conditioner::reward_at(t));
      break;
    default:
      break;
  }
  return out;
}

double ois_estimate(const Trajectory& traj, double gamma, double terminal_value, const Policy& pi,
                    const Policy& mu) {
  return importance_ratio(traj, pi, mu, 1, traj.horizon() - 1) * bootstrapped_return(traj, gamma, terminal_value);
}

double pdis_estimate(const Trajectory& traj, double gamma, double terminal_value, const Policy& pi,
                     const Policy& mu) {
  thread_local std::vector<double> rho;
  prefix_ratios(traj, pi, mu, rho);
  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < traj.horizon(); ++t) {
    total += rho[t] * (discount * traj.reward(t));
    discount *= gamma;
  }
  return total + rho.back() * (discount * terminal_value);
}

double conditional_estimate(const Trajectory& traj, double gamma, double terminal_value, const Policy& pi,
                            const Policy& mu, Scheme scheme, const WeightProvider* weights) {
  const int n = traj.horizon();
  const StateAction start = traj.start();
  switch (scheme) {
    case Scheme::uncorrected:
      return bootstrapped_return(traj, gamma, terminal_value);
    case Scheme::ois:
      return ois_estimate(traj, gamma, terminal_value, pi, mu);
    case Scheme::pdis:
      return pdis_estimate(traj, gamma, terminal_value, pi, mu);
    default:
      break;
  }
  if (weights == nullptr) throw InputError("conditional estimator needs a weight provider");
  const double rho = importance_ratio(traj, pi, mu, 1, n - 1);

  if (scheme == Scheme::rcis) {
    double g = 0.0;
    double discount = 1.0;
    for (int t = 0; t < n; ++t) {
      g += discount * traj.reward(t);
      discount *= gamma;
    }
    const double w = weights->weight(start, Conditioner::return_value().key(traj, gamma), rho);
    return w * g + rho * (discount * terminal_value);
  }

  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < n; ++t) {
    const Conditioner phi = scheme == Scheme::scis ? Conditioner::state_action_reward_at(t) : Conditioner::reward_at(t);
    const double w = weights->weight(start, phi.key(traj, gamma), rho);
    total += w * (discount * traj.reward(t));
    discount *= gamma;
  }
  const double w_boot =
      scheme == Scheme::scis ? weights->weight(start, Conditioner::state_at(n).key(traj, gamma), rho) : rho;
  return total + w_boot * (discount * terminal_value);
}

double estimate(const EstimatorSpec& spec, const Trajectory& traj, double gamma, double terminal_value,
                const Policy& pi, const Policy& mu, const WeightProvider* weights) {
  return conditional_estimate(traj, gamma, terminal_value, pi, mu, spec.scheme, weights);
}

void observe_for_scheme(WeightStore& store, Scheme scheme, const Trajectory& traj, const Policy& pi,
                        const Policy& mu, double gamma) {
  if (!uses_conditional_weights(scheme)) return;
  const int n = traj.horizon();
  const double rho = importance_ratio(traj, pi, mu, 1, n - 1);
  for (const auto& phi : conditioners_for(scheme, n)) {
    store.observe(traj.start(), phi.key(traj, gamma), rho, regression_target(phi, traj, gamma));
  }
}

void add_oracle_tables(OracleWeights& oracle, const EnumeratedDistribution& dist, Scheme scheme) {
  for (const auto& phi : conditioners_for(scheme, dist.horizon())) {
    oracle.add(dist.start(), exact_conditional_weight(dist, phi));
  }
}

OracleWeights build_oracle_weights(const Mdp& mdp, const Policy& mu, const Policy& pi,
                                   const std::vector<StateAction>& starts, const std::vector<int>& horizons,
                                   const std::vector<Scheme>& schemes, double cap) {
  OracleWeights oracle;
  bool needed = false;
  for (Scheme s : schemes) needed = needed || uses_conditional_weights(s);
  if (!needed) return oracle;
  for (const auto& start : starts) {
    for (int h : horizons) {
      const auto dist = enumerate_trajectories(mdp, mu, pi, start, h, cap);
      for (Scheme s : schemes) add_oracle_tables(oracle, dist, s);
    }
  }
  return oracle;
}

Moments estimator_moments(const EnumeratedDistribution& dist, const EstimatorSpec& spec, const QTable& q,
                          const Policy& pi, const Policy& mu) {
  if (spec.source == WeightSource::online) {
    throw InputError("exact moments need an oracle-backed estimator, got " + spec.name());
  }
  OracleWeights oracle;
  add_oracle_tables(oracle, dist, spec.scheme);
  const double gamma = dist.gamma();
  const auto [mean, variance] = dist.moments([&](const Trajectory& traj) {
    return estimate(spec, traj, gamma, state_value(q, pi, traj.final_state()), pi, mu, &oracle);
  });
  return {mean, variance};
}

}  // namespace cis
