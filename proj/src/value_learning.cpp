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

#include "cis/value_learning.hpp"

#include "cis/errors.hpp"

namespace cis {

TileCodedQ::TileCodedQ(const Mdp& chain)
    : num_interior_(chain.num_states() - 2),
      num_actions_(chain.num_actions()),
      weights_(static_cast<std::size_t>(std::max(num_interior_ - 1, 0)) * chain.num_actions(), 0.0) {
  if (num_interior_ < 2 || !chain.is_terminal(0) || !chain.is_terminal(chain.num_states() - 1)) {
    throw InputError("tile coding needs a chain with absorbing ends and at least two interior states");
  }
  for (int x = 1; x <= num_interior_; ++x) {
    if (chain.is_terminal(x)) throw InputError("tile coding needs interior states 1..K to be non-terminal");
  }
}

double TileCodedQ::value(int state, int action) const {
  if (state <= 0 || state > num_interior_) return 0.0;
  if (state == 1) return weight(1, action);
  if (state == num_interior_) return weight(num_interior_ - 1, action);
  return 0.5 * weight(state - 1, action) + 0.5 * weight(state, action);
}

void TileCodedQ::apply_update(int state, int action, double target, double alpha) {
  if (state <= 0 || state > num_interior_) return;
  const double step = alpha * (target - value(state, action));
  if (state == 1) {
    weights_[index(1, action)] += step;
  } else if (state == num_interior_) {
    weights_[index(num_interior_ - 1, action)] += step;
  } else {
    weights_[index(state - 1, action)] += 0.5 * step;
    weights_[index(state, action)] += 0.5 * step;
  }
}

void apply_update(TabularQ& q, int state, int action, double target, double alpha) {
  const double current = q.value(state, action);
  q.set(state, action, current + alpha * (target - current));
}

std::string_view to_string(ReprKind kind) { return kind == ReprKind::tabular ? "tabular" : "tilecode"; }
std::string_view to_string(UpdateMode mode) {
  return mode == UpdateMode::per_visit ? "per-visit" : "episode-start";
}
std::string_view to_string(MseWeighting weighting) {
  return weighting == MseWeighting::uniform ? "uniform" : "initial";
}
std::string_view to_string(OnlineOrder order) {
  return order == OnlineOrder::update_then_query ? "update-then-query" : "query-then-update";
}

ReprKind parse_repr(std::string_view text) {
  if (text == "tabular") return ReprKind::tabular;
  if (text == "tilecode") return ReprKind::tilecode;
  throw InputError("unknown representation '" + std::string(text) + "'");
}
UpdateMode parse_update_mode(std::string_view text) {
  if (text == "per-visit") return UpdateMode::per_visit;
  if (text == "episode-start") return UpdateMode::episode_start;
  throw InputError("unknown update mode '" + std::string(text) + "'");
}
MseWeighting parse_mse_weighting(std::string_view text) {
  if (text == "uniform") return MseWeighting::uniform;
  if (text == "initial") return MseWeighting::initial;
  throw InputError("unknown mse weighting '" + std::string(text) + "'");
}
OnlineOrder parse_online_order(std::string_view text) {
  if (text == "update-then-query") return OnlineOrder::update_then_query;
  if (text == "query-then-update") return OnlineOrder::query_then_update;
  throw InputError("unknown online order '" + std::string(text) + "'");
}

Episode sample_episode(const Mdp& mdp, const Policy& mu, int cap, Rng& rng) {
  if (cap < 1) throw InputError("episode cap must be at least 1");
  Episode ep;
  int x = sample_index(mdp.initial(), rng);
  ep.states.push_back(x);
  while (!mdp.is_terminal(x) && ep.length() < cap) {
    const int a = sample_index(mu.row(x), rng);
    const Outcome& o = sample_outcome(mdp, {x, a}, rng);
    ep.actions.push_back(a);
    ep.rewards.push_back(o.reward);
    ep.states.push_back(o.next_state);
    x = o.next_state;
  }
  return ep;
}

Trajectory episode_window(const Mdp& mdp, const Episode& episode, int t, int horizon) {
  const int length = episode.length();
  if (t < 0 || t >= length) throw InputError("window start outside the episode");
  const bool absorbed = mdp.is_terminal(episode.states.back());
  const int h = (!absorbed && t + horizon > length) ? length - t : horizon;
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  states.reserve(h);
  actions.reserve(h);
  rewards.reserve(h);
  const int last = episode.states.back();
  for (int i = 0; i < h; ++i) {
    const int step = t + i;
    if (step < length) {
      rewards.push_back(episode.rewards[step]);
      states.push_back(episode.states[step + 1]);
    } else {
      rewards.push_back(0.0);
      states.push_back(last);
    }
    if (i + 1 < h) actions.push_back(step + 1 < length ? episode.actions[step + 1] : 0);
  }
  return Trajectory({episode.states[t], episode.actions[t]}, std::move(states), std::move(actions),
                    std::move(rewards));
}

namespace {

template <typename Repr>
std::vector<double> learn(const Mdp& mdp, const Policy& pi, const Policy& mu, const EstimatorSpec& spec,
                          const WeightProvider* provider, WeightStore* store, Repr& repr,
                          const PolicyEvalOptions& options, const QTable& q_pi, Rng& rng) {
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(options.episodes) + 1);
  curve.push_back(value_mse(mdp, repr, q_pi, options.mse_weighting));
  const double gamma = mdp.gamma();
  for (int e = 0; e < options.episodes; ++e) {
    const Episode ep = sample_episode(mdp, mu, options.episode_cap, rng);
    const int updates = options.update_mode == UpdateMode::per_visit ? ep.length() : std::min(ep.length(), 1);
    for (int t = 0; t < updates; ++t) {
      const Trajectory window = episode_window(mdp, ep, t, options.horizon);
      const bool observe_first = options.online_order == OnlineOrder::update_then_query;
      if (store && observe_first) observe_for_scheme(*store, spec.scheme, window, pi, mu, gamma);
      const double v_end = state_value(repr, pi, window.final_state());
      const double target = estimate(spec, window, gamma, v_end, pi, mu, provider);
      if (store && !observe_first) observe_for_scheme(*store, spec.scheme, window, pi, mu, gamma);
      apply_update(repr, window.state(0), window.action(0), target, options.alpha);
    }
    curve.push_back(value_mse(mdp, repr, q_pi, options.mse_weighting));
  }
  return curve;
}

}  // namespace

PolicyEvalResult run_policy_evaluation(const Mdp& mdp, const Policy& pi, const Policy& mu, const EstimatorSpec& spec,
                                       const OracleWeights* oracle, ReprKind repr, const PolicyEvalOptions& options,
                                       const QTable& q_pi, Rng rng) {
  if (options.horizon < 1) throw InputError("horizon must be at least 1");
  if (options.episodes < 0) throw InputError("episode count must be non-negative");
  if (!(options.alpha > 0.0)) throw InputError("learning rate must be positive");
  if (!check_support_condition(pi, mu)) throw InputError("target policy is not supported by the behaviour policy");

  std::optional<WeightStore> store;
  std::optional<OnlineWeights> online;
  const WeightProvider* provider = nullptr;
  if (uses_conditional_weights(spec.scheme)) {
    if (spec.source == WeightSource::online) {
      store.emplace(options.objective);
      online.emplace(*store);
      provider = &*online;
    } else {
      if (oracle == nullptr) throw InputError(spec.name() + " needs oracle weight tables");
      provider = oracle;
    }
  }
  WeightStore* store_ptr = store ? &*store : nullptr;

  PolicyEvalResult result;
  if (repr == ReprKind::tabular) {
    TabularQ q(mdp);
    result.mse = learn(mdp, pi, mu, spec, provider, store_ptr, q, options, q_pi, rng);
    result.tabular = std::move(q);
  } else {
    TileCodedQ q(mdp);
    result.mse = learn(mdp, pi, mu, spec, provider, store_ptr, q, options, q_pi, rng);
    result.tilecode = std::move(q);
  }
  return result;
}

}  // namespace cis
