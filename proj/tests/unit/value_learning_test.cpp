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

#include "cis/environments.hpp"
#include "cis/errors.hpp"
#include "cis/exact.hpp"
#include "cis/value_learning.hpp"

namespace cis {
namespace {

Mdp default_chain() { return build_chain(ChainSpec{}); }

TEST(TileCodedQ, AveragesNeighbouringSegments) {
  const Mdp chain = default_chain();
  TileCodedQ q(chain);
  for (int a = 0; a < 2; ++a) EXPECT_EQ(q.value(3, a), 0.0);
  q.set_weight(2, 1, 2.0);
  q.set_weight(3, 1, 4.0);
  EXPECT_EQ(q.value(3, 1), 3.0);
  q.set_weight(1, 0, -1.5);
  q.set_weight(5, 0, 8.0);
  EXPECT_EQ(q.value(1, 0), -1.5);
  EXPECT_EQ(q.value(6, 0), 8.0);
  EXPECT_EQ(q.value(0, 0), 0.0);
  EXPECT_EQ(q.value(7, 0), 0.0);
  // Hand expansion of every interior state for arbitrary weights.
  const double w[6] = {0.0, 1.0, -2.0, 3.5, 0.25, 7.0};
  for (int k = 1; k <= 5; ++k) q.set_weight(k, 1, w[k]);
  EXPECT_EQ(q.value(1, 1), 1.0);
  EXPECT_EQ(q.value(2, 1), 0.5 * 1.0 + 0.5 * -2.0);
  EXPECT_EQ(q.value(3, 1), 0.5 * -2.0 + 0.5 * 3.5);
  EXPECT_EQ(q.value(4, 1), 0.5 * 3.5 + 0.5 * 0.25);
  EXPECT_EQ(q.value(5, 1), 0.5 * 0.25 + 0.5 * 7.0);
  EXPECT_EQ(q.value(6, 1), 7.0);
}

TEST(TileCodedQ, SemiGradientStep) {
  TileCodedQ q(default_chain());
  q.apply_update(3, 0, 2.0, 1.0);
  EXPECT_EQ(q.weight(2, 0), 1.0);
  EXPECT_EQ(q.weight(3, 0), 1.0);
  EXPECT_EQ(q.value(3, 0), 1.0);
  const auto before = q.value(3, 0);
  q.apply_update(3, 0, before, 0.3);
  EXPECT_EQ(q.value(3, 0), before);
  q.apply_update(0, 0, 5.0, 1.0);
  EXPECT_EQ(q.value(0, 0), 0.0);
}

TEST(TabularQ, UpdateAndPinning) {
  const Mdp chain = default_chain();
  TabularQ q(chain);
  apply_update(q, 2, 1, 2.0, 0.5);
  EXPECT_EQ(q.value(2, 1), 1.0);
  apply_update(q, 2, 1, 1.0, 0.5);
  EXPECT_EQ(q.value(2, 1), 1.0);
  apply_update(q, 0, 0, 3.0, 1.0);
  EXPECT_EQ(q.value(0, 0), 0.0);
}

TEST(EpisodeWindow, PaddingAndCut) {
  const Mdp chain = default_chain();
  Episode absorbed{{5, 6, 7}, {1, 1}, {1.0, 10.0}};
  const auto w = episode_window(chain, absorbed, 1, 3);
  EXPECT_EQ(w.horizon(), 3);
  EXPECT_EQ(w.state(0), 6);
  EXPECT_EQ(w.reward(0), 10.0);
  EXPECT_EQ(w.reward(1), 0.0);
  EXPECT_EQ(w.final_state(), 7);
  EXPECT_EQ(w.action(1), 0);
  Episode capped{{3, 4, 3}, {1, 0}, {1.0, 1.0}};
  const auto c = episode_window(chain, capped, 1, 3);
  EXPECT_EQ(c.horizon(), 1);
  EXPECT_EQ(c.final_state(), 3);
  EXPECT_THROW(episode_window(chain, capped, 2, 3), InputError);
}

TEST(SampleEpisode, RespectsCap) {
  const Mdp chain = build_chain(ChainSpec{.noise = 0.5});
  Rng rng(6);
  const Policy mu = Policy::uniform(chain);
  for (int i = 0; i < 200; ++i) {
    const auto ep = sample_episode(chain, mu, 5, rng);
    EXPECT_LE(ep.length(), 5);
    EXPECT_EQ(ep.states.front(), 3);
    if (ep.length() < 5) {
      EXPECT_TRUE(chain.is_terminal(ep.states.back()));
    }
  }
}

TEST(PolicyEvaluation, ZeroEpisodesGivesInitialError) {
  const Mdp chain = default_chain();
  Rng rng(2);
  const Policy pi = random_dirichlet_policy(chain, rng);
  const Policy mu = random_dirichlet_policy(chain, rng);
  const QTable q_pi = solve_q_pi(chain, pi, 1e-12);
  double expected = 0.0;
  for (const auto& sa : chain.nonterminal_pairs()) expected += q_pi.value(sa.state, sa.action) * q_pi.value(sa.state, sa.action);
  expected /= static_cast<double>(chain.nonterminal_pairs().size());
  PolicyEvalOptions options;
  options.episodes = 0;
  for (ReprKind repr : {ReprKind::tabular, ReprKind::tilecode}) {
    const auto r = run_policy_evaluation(chain, pi, mu, parse_estimator("ois"), nullptr, repr, options, q_pi, rng);
    ASSERT_EQ(r.mse.size(), 1u);
    EXPECT_NEAR(r.mse[0], expected, 1e-12);
  }
}

TEST(PolicyEvaluation, SelfLoopSingleUpdate) {
  std::vector<std::vector<Outcome>> t(1);
  t[0] = {{0, 1.0, 1.0}};
  const Mdp loop(1, 1, 0.5, {false}, {1.0}, t);
  TabularQ q(loop);
  // n = 1 target r + gamma Q(x', a') = 1 + 0.5 * 0 with alpha = 1.
  const Trajectory window({0, 0}, {0}, {}, {1.0});
  const Policy pi(std::vector<std::vector<double>>{{1.0}});
  const double target = conditional_estimate(window, q, pi, pi, 0.5, Scheme::uncorrected, nullptr);
  apply_update(q, 0, 0, target, 1.0);
  EXPECT_EQ(q.value(0, 0), 1.0);
}

TEST(PolicyEvaluation, UncorrectedMatchesOisOnPolicy) {
  const Mdp chain = default_chain();
  Rng rng(13);
  const Policy mu = random_dirichlet_policy(chain, rng);
  const QTable q_pi = solve_q_pi(chain, mu, 1e-10);
  PolicyEvalOptions options;
  options.episodes = 200;
  for (ReprKind repr : {ReprKind::tabular, ReprKind::tilecode}) {
    const auto a = run_policy_evaluation(chain, mu, mu, parse_estimator("ois"), nullptr, repr, options, q_pi, rng);
    const auto b =
        run_policy_evaluation(chain, mu, mu, parse_estimator("uncorrected"), nullptr, repr, options, q_pi, rng);
    EXPECT_EQ(a.mse, b.mse);
  }
}

TEST(PolicyEvaluation, OnPolicyErrorShrinks) {
  const Mdp chain = default_chain();
  int improved = 0;
  double initial = 0.0;
  double final = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const Policy mu = random_dirichlet_policy(chain, rng);
    const QTable q_pi = solve_q_pi(chain, mu, 1e-10);
    PolicyEvalOptions options;
    options.episodes = 100;
    options.alpha = 0.05;
    const auto r = run_policy_evaluation(chain, mu, mu, parse_estimator("ois"), nullptr, ReprKind::tabular, options,
                                         q_pi, rng.split(1));
    improved += r.mse.back() < r.mse.front();
    initial += r.mse.front();
    final += r.mse.back();
  }
  EXPECT_LT(final, initial);
  EXPECT_GE(improved, 95);
}

TEST(PolicyEvaluation, RejectsMissingSupportAndOracle) {
  const Mdp chain = default_chain();
  Rng rng(3);
  const Policy pi = random_dirichlet_policy(chain, rng);
  std::vector<std::vector<double>> rows(chain.num_states());
  for (int x = 0; x < chain.num_states(); ++x) rows[x] = chain.is_terminal(x) ? std::vector{1.0} : std::vector{1.0, 0.0};
  const QTable q_pi = solve_q_pi(chain, pi, 1e-8);
  EXPECT_THROW(run_policy_evaluation(chain, pi, Policy(rows), parse_estimator("ois"), nullptr, ReprKind::tabular, {},
                                     q_pi, rng),
               InputError);
  EXPECT_THROW(run_policy_evaluation(chain, pi, pi, parse_estimator("rcis:oracle"), nullptr, ReprKind::tabular, {},
                                     q_pi, rng),
               InputError);
}

}  // namespace
}  // namespace cis
