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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "cis/environments.hpp"
#include "cis/errors.hpp"
#include "cis/estimators.hpp"
#include "cis/exact.hpp"
#include "cis/verification.hpp"
#include "fixtures.hpp"

namespace cis {
namespace {

// Independent recursion: number of mu-positive paths and the pi-expectation
// of the bootstrapped return, without building trajectories.
struct PathSummary {
  double count = 0.0;
  double mass_mu = 0.0;
  double value_pi = 0.0;
};

PathSummary brute_force(const Mdp& mdp, const Policy& mu, const Policy& pi, const QTable& q, StateAction sa,
                        int remaining) {
  PathSummary s;
  for (const auto& o : mdp.outcomes(sa.state, sa.action)) {
    if (o.probability == 0.0) continue;
    if (remaining == 1) {
      s.count += 1.0;
      s.mass_mu += o.probability;
      s.value_pi += o.probability * (o.reward + mdp.gamma() * state_value(q, pi, o.next_state));
      continue;
    }
    double tail = 0.0;
    for (int a = 0; a < mdp.num_actions(o.next_state); ++a) {
      const auto sub = brute_force(mdp, mu, pi, q, {o.next_state, a}, remaining - 1);
      if (mu.prob(o.next_state, a) > 0.0) {
        s.count += sub.count;
        s.mass_mu += o.probability * mu.prob(o.next_state, a) * sub.mass_mu;
      }
      tail += pi.prob(o.next_state, a) * sub.value_pi;
    }
    s.value_pi += o.probability * (o.reward + mdp.gamma() * tail);
  }
  return s;
}

TEST(Enumeration, MatchesRecursiveOracle) {
  Rng rng(314);
  for (int i = 0; i < 30; ++i) {
    const auto inst = random_instance(rng);
    for (const auto& start : inst.mdp.nonterminal_pairs()) {
      const auto dist = enumerate_trajectories(inst.mdp, inst.mu, inst.pi, start, inst.horizon);
      const auto oracle = brute_force(inst.mdp, inst.mu, inst.pi, inst.q, start, inst.horizon);
      EXPECT_EQ(static_cast<double>(dist.size()), oracle.count);
      EXPECT_EQ(count_trajectories(inst.mdp, inst.mu, start, inst.horizon), oracle.count);
      double mass = 0.0;
      for (const auto& atom : dist.atoms()) mass += atom.p_mu;
      EXPECT_NEAR(mass, 1.0, 1e-12);
      EXPECT_NEAR(exact_operator(inst.mdp, inst.pi, inst.q, inst.horizon, start), oracle.value_pi, 1e-10);
    }
  }
}

TEST(Enumeration, CapAndSupport) {
  const Mdp chain = build_chain(ChainSpec{});
  const Policy mu = Policy::uniform(chain);
  try {
    enumerate_trajectories(chain, mu, mu, {3, 1}, 6, 100.0);
    FAIL() << "expected EnumerationLimit";
  } catch (const EnumerationLimit& e) {
    EXPECT_GT(e.estimated(), 100.0);
    EXPECT_NE(std::string(e.what()).find("cap"), std::string::npos);
  }
  const Mdp mdp = testing::two_state_mdp();
  const Policy only_left({{1.0, 0.0}, {1.0}});
  EXPECT_THROW(enumerate_trajectories(mdp, only_left, testing::two_state_pi(), {0, 0}, 2), SupportViolation);
  // Zero-mass target paths outside the support are not a violation.
  EXPECT_NO_THROW(enumerate_trajectories(mdp, only_left, only_left, {0, 0}, 3));
}

TEST(ExactOperator, NoiselessChainAlwaysRight) {
  ChainSpec spec;
  spec.noise = 0.0;
  const Mdp chain = build_chain(spec);
  std::vector<std::vector<double>> rows(chain.num_states());
  for (int x = 0; x < chain.num_states(); ++x) rows[x] = chain.is_terminal(x) ? std::vector{1.0} : std::vector{0.0, 1.0};
  const Policy right(rows);
  const QTable q_pi = solve_q_pi(chain, right, 1e-12);
  // Path sum from state 5: +1 into state 6, then +10 into the absorbing end.
  EXPECT_NEAR(q_pi.value(5, 1), 1.0 + 0.99 * 10.0, 1e-9);
  EXPECT_NEAR(exact_operator(chain, right, QTable(chain), 4, {5, 1}), 10.9, 1e-12);
}

TEST(ExactOperator, AgreesWithBellmanSweeps) {
  const auto battery = verification_battery(5, 10);
  for (const auto& inst : battery) {
    QTable q = inst.q;
    for (int i = 0; i < inst.horizon; ++i) q = apply_bellman(inst.mdp, inst.pi, q);
    for (const auto& sa : inst.mdp.nonterminal_pairs()) {
      EXPECT_NEAR(exact_operator(inst.mdp, inst.pi, inst.q, inst.horizon, sa), q.value(sa.state, sa.action), 1e-10);
    }
  }
}

TEST(SolveQPi, FixedPointResidual) {
  const Mdp chain = build_chain(ChainSpec{});
  Rng rng(8);
  const Policy pi = random_dirichlet_policy(chain, rng);
  const QTable q = solve_q_pi(chain, pi, 1e-10);
  const QTable next = apply_bellman(chain, pi, q);
  for (std::size_t i = 0; i < q.values().size(); ++i) EXPECT_LT(std::abs(next.values()[i] - q.values()[i]), 1e-10);
}

TEST(Marginals, HalfNoiseFirstStep) {
  ChainSpec spec;
  spec.noise = 0.5;
  const Mdp chain = build_chain(spec);
  const Policy mu = Policy::uniform(chain);
  const auto dist = enumerate_trajectories(chain, mu, mu, {3, 1}, 1);
  const auto m = state_marginal(dist, 1, Measure::behaviour);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.at(4), 0.75);
  EXPECT_DOUBLE_EQ(m.at(2), 0.25);
  const auto g = return_distribution(dist, Measure::target);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g.begin()->second, 1.0);
}

TEST(ConditionalWeight, TrivialConditioners) {
  const Mdp mdp = testing::two_state_mdp();
  const Policy mu = testing::two_state_mu();
  const Policy pi = testing::two_state_pi();
  const auto dist = enumerate_trajectories(mdp, mu, pi, {0, 1}, 3);
  const auto full = exact_conditional_weight(dist, Conditioner::full_trajectory());
  for (const auto& atom : dist.atoms()) {
    const double w = *full.find(Conditioner::full_trajectory().key(atom.trajectory, mdp.gamma()));
    EXPECT_NEAR(w, importance_ratio(atom.trajectory, pi, mu, 1, 2), 1e-12);
  }
  const auto constant = exact_conditional_weight(dist, Conditioner::constant());
  ASSERT_EQ(constant.weights().size(), 1u);
  EXPECT_NEAR(constant.weights().begin()->second, 1.0, 1e-12);
}

TEST(ConditionalWeight, BranchReturnWeightIsOne) {
  const auto branch = branch_instance();
  const auto dist = enumerate_trajectories(branch.mdp, branch.mu, branch.pi, {0, 0}, 2);
  ASSERT_EQ(dist.size(), 2u);
  std::vector<double> rhos;
  for (const auto& atom : dist.atoms()) rhos.push_back(importance_ratio(atom.trajectory, branch.pi, branch.mu, 1, 1));
  std::sort(rhos.begin(), rhos.end());
  EXPECT_DOUBLE_EQ(rhos[0], 0.2);
  EXPECT_DOUBLE_EQ(rhos[1], 1.8);
  const auto table = exact_conditional_weight(dist, Conditioner::return_value());
  ASSERT_EQ(table.weights().size(), 1u);
  EXPECT_NEAR(table.weights().begin()->second, 1.0, 1e-12);
}

TEST(EstimatorMoments, BranchVariances) {
  const auto branch = branch_instance();
  const auto dist = enumerate_trajectories(branch.mdp, branch.mu, branch.pi, {0, 0}, 2);
  // Both branches return G = 0.9; rho is 1.8 or 0.2 with probability 1/2.
  const double g = 0.9;
  const double ois_var = 0.5 * (1.8 * g) * (1.8 * g) + 0.5 * (0.2 * g) * (0.2 * g) - g * g;
  const auto ois = estimator_moments(dist, {Scheme::ois, WeightSource::analytic}, branch.q, branch.pi, branch.mu);
  EXPECT_NEAR(ois.mean, g, 1e-12);
  EXPECT_NEAR(ois.variance, ois_var, 1e-12);
  EXPECT_NEAR(ois.variance, 0.64 * g * g, 1e-12);
  const auto rcis = estimator_moments(dist, {Scheme::rcis, WeightSource::oracle}, branch.q, branch.pi, branch.mu);
  EXPECT_NEAR(rcis.mean, g, 1e-12);
  EXPECT_NEAR(rcis.variance, 0.0, 1e-15);
  EXPECT_THROW(estimator_moments(dist, {Scheme::rcis, WeightSource::online}, branch.q, branch.pi, branch.mu),
               InputError);
}

TEST(EstimatorMoments, OnPolicyOis) {
  const Mdp mdp = testing::two_state_mdp();
  const Policy mu = testing::two_state_mu();
  QTable q(mdp);
  q.set(0, 0, 1.5);
  q.set(0, 1, -0.5);
  const auto dist = enumerate_trajectories(mdp, mu, mu, {0, 0}, 3);
  const auto m = estimator_moments(dist, {Scheme::ois, WeightSource::analytic}, q, mu, mu);
  EXPECT_NEAR(m.mean, exact_operator(mdp, mu, q, 3, {0, 0}), 1e-12);
  const auto [mean, var] =
      dist.moments([&](const Trajectory& t) { return bootstrapped_return(t, q, mu, mdp.gamma()); });
  EXPECT_NEAR(m.variance, var, 1e-12);
}

TEST(EstimatorMoments, DeterministicMdpHasNoVariance) {
  const Mdp mdp = testing::one_step_mdp();
  const Policy mu({{0.3, 0.7}, {1.0}});
  const Policy pi({{0.6, 0.4}, {1.0}});
  const auto dist = enumerate_trajectories(mdp, mu, pi, {0, 0}, 3);
  for (Scheme s : {Scheme::ois, Scheme::pdis}) {
    EXPECT_NEAR(estimator_moments(dist, {s, WeightSource::analytic}, QTable(mdp), pi, mu).variance, 0.0, 1e-15);
  }
  for (Scheme s : {Scheme::rcis, Scheme::scis, Scheme::reward_cis}) {
    EXPECT_NEAR(estimator_moments(dist, {s, WeightSource::oracle}, QTable(mdp), pi, mu).variance, 0.0, 1e-15);
  }
}

TEST(AtomsCsv, HeaderAndRows) {
  const auto branch = branch_instance();
  const auto dist = enumerate_trajectories(branch.mdp, branch.mu, branch.pi, {0, 0}, 2);
  std::stringstream out;
  write_atoms_csv(out, dist);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, "trajectory,p_mu,p_pi,rho,return");
  int rows = 0;
  while (std::getline(out, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

}  // namespace
}  // namespace cis
