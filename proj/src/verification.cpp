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

#include "cis/verification.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cis/environments.hpp"
#include "cis/errors.hpp"
#include "cis/estimators.hpp"
#include "cis/exact.hpp"

namespace cis {
namespace {

constexpr double kMeanTol = 1e-9;
constexpr double kTermMeanTol = 1e-10;
constexpr double kVarianceSlack = 1e-12;
constexpr double kIdentityTol = 1e-12;
constexpr double kRegressionTol = 1e-8;
constexpr double kConvergenceTol = 0.02;

class Tracker {
 public:
  explicit Tracker(std::string name) { result_.name = std::move(name); }

  // Tolerances are absolute up to magnitude 1 and relative above it: a ratio
  // near 1e5 carries rounding of order 1e-11 whatever the implementation.
  void equal(double value, double expected, double tol, const std::string& where) {
    ++result_.comparisons;
    const double gap = std::abs(value - expected) / std::max(1.0, std::abs(expected));
    result_.worst = std::max(result_.worst, gap);
    if (!(gap <= tol)) fail(where + ": " + format_double(value) + " vs " + format_double(expected));
  }

  void at_most(double lhs, double rhs, double slack, const std::string& where) {
    ++result_.comparisons;
    const double excess = (lhs - rhs) / std::max(1.0, std::abs(rhs));
    result_.worst = std::max(result_.worst, excess);
    if (!(excess <= slack)) fail(where + ": " + format_double(lhs) + " > " + format_double(rhs));
  }

  void require(bool ok, const std::string& where) {
    ++result_.comparisons;
    if (!ok) fail(where);
  }

  CheckResult take() { return std::move(result_); }

 private:
  void fail(const std::string& what) {
    if (result_.passed) result_.failure = what;
    result_.passed = false;
  }

  CheckResult result_;
};

std::string where(const VerificationInstance& inst, StateAction start, const std::string& what) {
  std::ostringstream out;
  out << inst.label << " (" << start.state << "," << start.action << ") " << what;
  return out.str();
}

// Calls f(instance, start, enumeration) for every start pair of the battery.
template <typename F>
void for_each_start(const std::vector<VerificationInstance>& battery, F&& f) {
  for (const auto& inst : battery) {
    for (const auto& start : inst.mdp.nonterminal_pairs()) {
      const auto dist = enumerate_trajectories(inst.mdp, inst.mu, inst.pi, start, inst.horizon);
      f(inst, start, dist);
    }
  }
}

double terminal_term(const VerificationInstance& inst, const Trajectory& traj) {
  return std::pow(inst.mdp.gamma(), traj.horizon()) * state_value(inst.q, inst.pi, traj.final_state());
}

double discounted_reward(const Trajectory& traj, double gamma, int t) {
  return std::pow(gamma, t) * traj.reward(t);
}

double rho_of(const VerificationInstance& inst, const Trajectory& traj) {
  return importance_ratio(traj, inst.pi, inst.mu, 1, traj.horizon() - 1);
}

// Var_mu(E[rho | phi] * psi(tau)).
template <typename Psi>
double conditioned_variance(const EnumeratedDistribution& dist, const Conditioner& phi, Psi&& psi) {
  const auto table = exact_conditional_weight(dist, phi);
  return dist
      .moments([&](const Trajectory& traj) { return *table.find(phi.key(traj, dist.gamma())) * psi(traj); })
      .second;
}

std::vector<double> dirichlet_row(int size, Rng& rng) {
  std::vector<double> row(static_cast<std::size_t>(size));
  double total = 0.0;
  for (auto& v : row) total += v = rng.exponential();
  for (auto& v : row) v /= total;
  return row;
}

}  // namespace

VerificationInstance random_instance(Rng& rng, int max_horizon) {
  const int nonterminal = 2 + static_cast<int>(rng() % 3);
  const int num_states = nonterminal + 1;
  const int num_actions = 2 + static_cast<int>(rng() % 2);
  const double gamma = 0.5 + 0.49 * rng.uniform();

  std::vector<bool> terminal(static_cast<std::size_t>(num_states), false);
  terminal.back() = true;
  std::vector<double> initial(static_cast<std::size_t>(num_states), 0.0);
  for (int x = 0; x < nonterminal; ++x) initial[x] = 1.0 / nonterminal;

  std::vector<std::vector<Outcome>> transitions(static_cast<std::size_t>(num_states * num_actions));
  for (int x = 0; x < nonterminal; ++x) {
    for (int a = 0; a < num_actions; ++a) {
      const int count = 1 + static_cast<int>(rng() % 3);
      const auto probs = dirichlet_row(count, rng);
      auto& outs = transitions[static_cast<std::size_t>(x * num_actions + a)];
      for (int i = 0; i < count; ++i) {
        outs.push_back({static_cast<int>(rng() % num_states), static_cast<double>(rng() % 3), probs[i]});
      }
    }
  }
  Mdp mdp(num_states, num_actions, gamma, std::move(terminal), std::move(initial), std::move(transitions));
  Policy pi = random_dirichlet_policy(mdp, rng);
  Policy mu = random_dirichlet_policy(mdp, rng);
  QTable q = random_q_function(mdp, 1.0, rng);
  const int horizon = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_horizon));
  std::ostringstream label;
  label << "random[" << nonterminal << "x" << num_actions << ",n=" << horizon << "]";
  return {label.str(), std::move(mdp), std::move(pi), std::move(mu), std::move(q), horizon};
}

VerificationInstance branch_instance() {
  std::vector<std::vector<Outcome>> transitions(6);
  transitions[0] = {{1, 0.0, 1.0}};
  transitions[1] = {{1, 0.0, 1.0}};
  transitions[2] = {{2, 1.0, 1.0}};
  transitions[3] = {{2, 1.0, 1.0}};
  Mdp mdp(3, 2, 0.9, {false, false, true}, {1.0, 0.0, 0.0}, std::move(transitions));
  Policy mu({{0.5, 0.5}, {0.5, 0.5}, {1.0}});
  Policy pi({{0.5, 0.5}, {0.9, 0.1}, {1.0}});
  QTable q(mdp);
  return {"branch", std::move(mdp), std::move(pi), std::move(mu), std::move(q), 2};
}

std::vector<VerificationInstance> verification_battery(std::uint64_t seed, int count) {
  std::vector<VerificationInstance> battery;
  const Rng root(seed);
  for (int i = 0; i < count; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    battery.push_back(random_instance(rng));
    battery.back().label += "#" + std::to_string(i);
  }
  Rng rng = root.split(0xC4A1);
  Mdp chain = build_chain(ChainSpec{});
  Policy pi = random_dirichlet_policy(chain, rng);
  Policy mu = random_dirichlet_policy(chain, rng);
  QTable q = random_q_function(chain, 0.1, rng);
  battery.push_back({"chain", std::move(chain), std::move(pi), std::move(mu), std::move(q), 3});
  return battery;
}

CheckResult check_ois_unbiased(const std::vector<VerificationInstance>& battery) {
  Tracker t("ois-unbiased: OIS is unbiased for the n-step operator");
  for_each_start(battery, [&](const VerificationInstance& inst, StateAction start, const EnumeratedDistribution& dist) {
    const double truth = exact_operator(inst.mdp, inst.pi, inst.q, inst.horizon, start);
    const auto m = estimator_moments(dist, {Scheme::ois, WeightSource::analytic}, inst.q, inst.pi, inst.mu);
    t.equal(m.mean, truth, kMeanTol, where(inst, start, "E[OIS]"));
    for (const auto& atom : dist.atoms()) {
      t.equal(rho_of(inst, atom.trajectory), atom.p_pi / atom.p_mu, kIdentityTol, where(inst, start, "rho"));
    }
    // E_mu[rho_{t+1:n-1} | prefix] = 1: suffix windows restart at every reachable pair.
    const auto constant = exact_conditional_weight(dist, Conditioner::constant());
    for (const auto& [key, w] : constant.weights()) t.equal(w, 1.0, kIdentityTol, where(inst, start, "E[rho]"));
  });
  return t.take();
}

CheckResult check_pdis(const std::vector<VerificationInstance>& battery) {
  Tracker t("pdis-variance: PDIS terms have no more variance than OIS terms");
  for_each_start(battery, [&](const VerificationInstance& inst, StateAction start, const EnumeratedDistribution& dist) {
    const double truth = exact_operator(inst.mdp, inst.pi, inst.q, inst.horizon, start);
    const auto m = estimator_moments(dist, {Scheme::pdis, WeightSource::analytic}, inst.q, inst.pi, inst.mu);
    t.equal(m.mean, truth, kMeanTol, where(inst, start, "E[PDIS]"));
    const double gamma = inst.mdp.gamma();
    for (int step = 0; step < inst.horizon; ++step) {
      const double pdis = dist.moments([&](const Trajectory& traj) {
                                return importance_ratio(traj, inst.pi, inst.mu, 1, step) *
                                       discounted_reward(traj, gamma, step);
                              }).second;
      const double ois = dist.moments([&](const Trajectory& traj) {
                               return rho_of(inst, traj) * discounted_reward(traj, gamma, step);
                             }).second;
      t.at_most(pdis, ois, kVarianceSlack, where(inst, start, "Var term " + std::to_string(step)));
    }
  });
  return t.take();
}

CheckResult check_conditional_unbiased(const std::vector<VerificationInstance>& battery) {
  Tracker t("cis-unbiased: CIS with a sufficient conditioner is unbiased with no more variance");
  for_each_start(battery, [&](const VerificationInstance& inst, StateAction start, const EnumeratedDistribution& dist) {
    const double truth = exact_operator(inst.mdp, inst.pi, inst.q, inst.horizon, start);
    const double gamma = inst.mdp.gamma();
    for (Scheme s : {Scheme::rcis, Scheme::scis, Scheme::reward_cis}) {
      const EstimatorSpec spec{s, WeightSource::oracle};
      t.equal(estimator_moments(dist, spec, inst.q, inst.pi, inst.mu).mean, truth, kMeanTol,
              where(inst, start, "E[" + spec.name() + "]"));
    }

    auto g = [&](const Trajectory& traj) { return truncated_return(traj, gamma); };
    const double ois_return_var = dist.moments([&](const Trajectory& traj) { return rho_of(inst, traj) * g(traj); }).second;
    for (const auto& phi :
         {Conditioner::return_value(), Conditioner::full_trajectory(), Conditioner::reward_sequence()}) {
      const auto table = exact_conditional_weight(dist, phi);
      auto weighted = [&](const Trajectory& traj) { return *table.find(phi.key(traj, gamma)) * g(traj); };
      const double mean = dist.moments([&](const Trajectory& traj) {
                                return weighted(traj) + rho_of(inst, traj) * terminal_term(inst, traj);
                              }).first;
      t.equal(mean, truth, kMeanTol, where(inst, start, "E[" + phi.name() + " estimate]"));
      t.at_most(dist.moments(weighted).second, ois_return_var, kVarianceSlack,
                where(inst, start, "Var " + phi.name() + " return term"));
    }

    // SCIS and reward-conditioned weights, one reward term at a time.
    for (int step = 0; step < inst.horizon; ++step) {
      auto reward = [&](const Trajectory& traj) { return discounted_reward(traj, gamma, step); };
      const double target = dist.target_mean(reward);
      const double ois_var = dist.moments([&](const Trajectory& traj) { return rho_of(inst, traj) * reward(traj); }).second;
      for (const auto& phi : {Conditioner::state_action_reward_at(step), Conditioner::reward_at(step)}) {
        const auto table = exact_conditional_weight(dist, phi);
        const auto [mean, var] = dist.moments(
            [&](const Trajectory& traj) { return *table.find(phi.key(traj, gamma)) * reward(traj); });
        t.equal(mean, target, kTermMeanTol, where(inst, start, "E[" + phi.name() + " term]"));
        t.at_most(var, ois_var, kVarianceSlack, where(inst, start, "Var " + phi.name() + " term"));
      }
    }
    const auto boot = Conditioner::state_at(inst.horizon);
    const auto table = exact_conditional_weight(dist, boot);
    const double mean = dist.moments([&](const Trajectory& traj) {
                              return *table.find(boot.key(traj, gamma)) * terminal_term(inst, traj);
                            }).first;
    t.equal(mean, dist.target_mean([&](const Trajectory& traj) { return terminal_term(inst, traj); }), kTermMeanTol,
            where(inst, start, "E[state-conditioned bootstrap]"));
  });
  return t.take();
}

CheckResult check_refinement(const std::vector<VerificationInstance>& battery) {
  Tracker t("refinement: coarser sufficient conditioners give no more variance");
  for_each_start(battery, [&](const VerificationInstance& inst, StateAction start, const EnumeratedDistribution& dist) {
    const double gamma = inst.mdp.gamma();
    auto g = [&](const Trajectory& traj) { return truncated_return(traj, gamma); };
    const double by_return = conditioned_variance(dist, Conditioner::return_value(), g);
    const double by_rewards = conditioned_variance(dist, Conditioner::reward_sequence(), g);
    const double by_trajectory = conditioned_variance(dist, Conditioner::full_trajectory(), g);
    const double raw = dist.moments([&](const Trajectory& traj) { return rho_of(inst, traj) * g(traj); }).second;
    t.at_most(by_return, by_rewards, kVarianceSlack, where(inst, start, "G vs reward sequence"));
    t.at_most(by_rewards, by_trajectory, kVarianceSlack, where(inst, start, "reward sequence vs trajectory"));
    t.equal(by_trajectory, raw, kIdentityTol, where(inst, start, "trajectory vs rho"));

    for (int step = 0; step < inst.horizon; ++step) {
      auto reward = [&](const Trajectory& traj) { return traj.reward(step); };
      const double local = conditioned_variance(dist, Conditioner::state_action_reward_at(step), reward);
      const double prefix = conditioned_variance(dist, Conditioner::per_decision_prefix(step), reward);
      const double full = conditioned_variance(dist, Conditioner::full_trajectory(), reward);
      const std::string s = std::to_string(step);
      t.at_most(local, prefix, kVarianceSlack, where(inst, start, "(X,A,R)_" + s + " vs prefix"));
      t.at_most(prefix, full, kVarianceSlack, where(inst, start, "prefix " + s + " vs trajectory"));
    }
  });
  return t.take();
}

CheckResult check_optimal_conditioner(const std::vector<VerificationInstance>& battery) {
  Tracker t("optimal-conditioner: conditioning on the target itself minimises variance");
  for_each_start(battery, [&](const VerificationInstance& inst, StateAction start, const EnumeratedDistribution& dist) {
    const double gamma = inst.mdp.gamma();
    auto g = [&](const Trajectory& traj) { return truncated_return(traj, gamma); };
    const double best = conditioned_variance(dist, Conditioner::return_value(), g);
    for (const auto& phi : {Conditioner::reward_sequence(), Conditioner::full_trajectory()}) {
      t.at_most(best, conditioned_variance(dist, phi, g), kVarianceSlack, where(inst, start, "G vs " + phi.name()));
    }
    for (int step = 0; step < inst.horizon; ++step) {
      auto reward = [&](const Trajectory& traj) { return traj.reward(step); };
      const double local = conditioned_variance(dist, Conditioner::reward_at(step), reward);
      for (const auto& phi : {Conditioner::state_action_reward_at(step), Conditioner::per_decision_prefix(step),
                              Conditioner::reward_sequence(), Conditioner::full_trajectory()}) {
        t.at_most(local, conditioned_variance(dist, phi, reward), kVarianceSlack,
                  where(inst, start, "R_" + std::to_string(step) + " vs " + phi.name()));
      }
    }
  });
  return t.take();
}

CheckResult check_return_ratio(const std::vector<VerificationInstance>& battery) {
  Tracker t("return-conditioned weights are return pmf ratios");
  for_each_start(battery, [&](const VerificationInstance& inst, StateAction start, const EnumeratedDistribution& dist) {
    const auto table = exact_conditional_weight(dist, Conditioner::return_value());
    const auto p_pi = return_distribution(dist, Measure::target);
    const auto p_mu = return_distribution(dist, Measure::behaviour);
    t.require(table.weights().size() == p_mu.size(), where(inst, start, "one weight per realised return"));
    for (const auto& [key, w] : table.weights()) {
      const std::int64_t g = key.parts.back();
      const auto pi_it = p_pi.find(g);
      const auto mu_it = p_mu.find(g);
      t.require(pi_it != p_pi.end() && mu_it != p_mu.end(), where(inst, start, "return in both pmfs"));
      if (pi_it == p_pi.end() || mu_it == p_mu.end()) continue;
      t.equal(w, pi_it->second / mu_it->second, kIdentityTol, where(inst, start, "w(G)"));
    }
  });
  return t.take();
}

CheckResult check_state_ratio(const std::vector<VerificationInstance>& battery) {
  Tracker t("state-conditioned weights are marginal ratios times action ratios");
  for_each_start(battery, [&](const VerificationInstance& inst, StateAction start, const EnumeratedDistribution& dist) {
    // A_0 is fixed rather than drawn from mu, so the time-0 weight is E[rho] = 1.
    for (int step = 0; step < inst.horizon; ++step) {
      const auto table = exact_conditional_weight(dist, Conditioner::state_action_reward_at(step));
      const auto m_pi = state_marginal(dist, step, Measure::target);
      const auto m_mu = state_marginal(dist, step, Measure::behaviour);
      for (const auto& [key, w] : table.weights()) {
        const auto& p = key.parts;
        const int x = static_cast<int>(p[3]);
        const int a = static_cast<int>(p[4]);
        const double expected =
            step == 0 ? 1.0 : (m_pi.at(x) / m_mu.at(x)) * (inst.pi.prob(x, a) / inst.mu.prob(x, a));
        t.equal(w, expected, kIdentityTol, where(inst, start, "w_" + std::to_string(step)));
      }
    }
    const auto table = exact_conditional_weight(dist, Conditioner::state_at(inst.horizon));
    const auto m_pi = state_marginal(dist, inst.horizon, Measure::target);
    const auto m_mu = state_marginal(dist, inst.horizon, Measure::behaviour);
    for (const auto& [key, w] : table.weights()) {
      const int x = static_cast<int>(key.parts[3]);
      t.equal(w, m_pi.at(x) / m_mu.at(x), kIdentityTol, where(inst, start, "bootstrap weight"));
    }
  });
  return t.take();
}

CheckResult check_operator_routes(const std::vector<VerificationInstance>& battery) {
  Tracker t("enumerated operator matches repeated Bellman sweeps");
  for (const auto& inst : battery) {
    QTable swept = inst.q;
    for (int i = 0; i < inst.horizon; ++i) swept = apply_bellman(inst.mdp, inst.pi, swept);
    for (const auto& start : inst.mdp.nonterminal_pairs()) {
      t.equal(exact_operator(inst.mdp, inst.pi, inst.q, inst.horizon, start), swept.value(start.state, start.action),
              kMeanTol, where(inst, start, "(T^pi)^n Q"));
    }
  }
  return t.take();
}

double golden_section_minimiser(const std::vector<double>& rho, const std::vector<double>& w) {
  if (rho.empty() || rho.size() != w.size()) throw InputError("minimiser needs matching non-empty inputs");
  std::vector<double> weight = w;
  // An all-zero weighting makes every f optimal; the store then reports the plain mean.
  if (std::all_of(weight.begin(), weight.end(), [](double v) { return v == 0.0; })) {
    std::fill(weight.begin(), weight.end(), 1.0);
  }
  // objective(f1) - objective(f2), expanded so no large common term cancels.
  auto difference = [&](double f1, double f2) {
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) s += weight[i] * (2.0 * rho[i] - f1 - f2);
    return (f2 - f1) * s;
  };
  double lo = *std::min_element(rho.begin(), rho.end());
  double hi = *std::max_element(rho.begin(), rho.end());
  const double inv_phi = 1.0 / std::numbers::phi;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  for (int iter = 0; iter < 400 && c < d; ++iter) {
    if (difference(c, d) < 0.0) {
      hi = d;
    } else {
      lo = c;
    }
    c = hi - inv_phi * (hi - lo);
    d = lo + inv_phi * (hi - lo);
  }
  return 0.5 * (lo + hi);
}

CheckResult check_regression(std::uint64_t seed) {
  Tracker t("regression: the weight store is the regression minimiser");
  const Rng root(seed);
  for (int b = 0; b < 20; ++b) {
    Rng rng = root.split(0x5EED + static_cast<std::uint64_t>(b));
    const int size = 20 + static_cast<int>(rng() % 200);
    const int keys = 1 + static_cast<int>(rng() % 5);
    WeightStore plain(RegressionObjective::plain);
    WeightStore weighted(RegressionObjective::psi_weighted);
    std::vector<std::vector<double>> rho(keys);
    std::vector<std::vector<double>> psi2(keys);
    const StateAction start{0, 0};
    for (int i = 0; i < size; ++i) {
      const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(keys));
      const double r = 3.0 * rng.exponential();
      // Zero targets occur with real returns, so include them.
      const double p = rng() % 4 == 0 ? 0.0 : rng.normal();
      const GroupKey key{{0, 0, 1, k}};
      plain.observe(start, key, r, p);
      weighted.observe(start, key, r, p);
      rho[k].push_back(r);
      psi2[k].push_back(p * p);
    }
    for (int k = 0; k < keys; ++k) {
      if (rho[k].empty()) continue;
      const GroupKey key{{0, 0, 1, k}};
      const std::string label = "batch " + std::to_string(b) + " key " + std::to_string(k);
      const std::vector<double> ones(rho[k].size(), 1.0);
      t.equal(*plain.find(start, key), golden_section_minimiser(rho[k], ones), kRegressionTol, label + " plain");
      t.equal(*weighted.find(start, key), golden_section_minimiser(rho[k], psi2[k]), kRegressionTol,
              label + " psi-weighted");
    }
  }

  const auto branch = branch_instance();
  const StateAction start{0, 0};
  const auto dist = enumerate_trajectories(branch.mdp, branch.mu, branch.pi, start, branch.horizon);
  Rng rng = root.split(0xB4A);
  std::vector<Trajectory> batch;
  batch.reserve(200000);
  for (int i = 0; i < 200000; ++i) {
    batch.push_back(sample_trajectory(branch.mdp, branch.mu, start, branch.horizon, rng));
  }
  for (const auto& phi : {Conditioner::return_value(), Conditioner::constant(), Conditioner::full_trajectory()}) {
    const auto store = fit_batch(batch, phi, branch.pi, branch.mu, branch.mdp.gamma(), RegressionObjective::plain);
    const auto exact = exact_conditional_weight(dist, phi);
    for (const auto& [key, w] : exact.weights()) {
      const auto fitted = store.find(start, key);
      t.require(fitted.has_value(), "branch " + phi.name() + " key observed");
      if (fitted) t.equal(*fitted, w, kConvergenceTol, "branch " + phi.name() + " convergence");
    }
  }
  return t.take();
}

std::vector<CheckResult> run_verification(const std::vector<VerificationInstance>& battery, std::uint64_t seed) {
  auto merge = [](CheckResult a, const CheckResult& b, std::string name) {
    a.name = std::move(name);
    a.comparisons += b.comparisons;
    a.worst = std::max(a.worst, b.worst);
    if (a.passed && !b.passed) a.failure = b.failure;
    a.passed = a.passed && b.passed;
    return a;
  };
  std::vector<CheckResult> out;
  out.push_back(merge(check_ois_unbiased(battery), check_operator_routes(battery),
                      "ois-unbiased: OIS is unbiased for the n-step operator"));
  out.push_back(check_pdis(battery));
  out.push_back(check_conditional_unbiased(battery));
  out.push_back(check_refinement(battery));
  out.push_back(check_optimal_conditioner(battery));
  out.push_back(merge(check_return_ratio(battery), check_state_ratio(battery),
                      "weight-ratios: conditional weights are probability ratios"));
  out.push_back(check_regression(seed));
  return out;
}

}  // namespace cis
