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

#include "cis/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "cis/errors.hpp"
#include "cis/exact.hpp"

namespace cis {

std::string_view to_string(ExperimentKind kind) {
  return kind == ExperimentKind::operator_estimation ? "operator" : "policy-eval";
}
std::string_view to_string(StartPairs pairs) { return pairs == StartPairs::all ? "all" : "initial"; }
StartPairs parse_start_pairs(std::string_view text) {
  if (text == "all") return StartPairs::all;
  if (text == "initial") return StartPairs::initial;
  throw InputError("unknown start-pairs value '" + std::string(text) + "'");
}
std::string_view to_string(RegressionObjective objective) {
  return objective == RegressionObjective::plain ? "plain" : "psi-weighted";
}
RegressionObjective parse_objective(std::string_view text) {
  if (text == "plain") return RegressionObjective::plain;
  if (text == "psi-weighted") return RegressionObjective::psi_weighted;
  throw InputError("unknown regression objective '" + std::string(text) + "'");
}
std::string_view to_string(GaussianParam kind) { return kind == GaussianParam::variance ? "variance" : "stddev"; }
GaussianParam parse_gaussian_param(std::string_view text) {
  if (text == "variance") return GaussianParam::variance;
  if (text == "stddev") return GaussianParam::stddev;
  throw InputError("unknown gaussian parameter kind '" + std::string(text) + "'");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  if (kind == ExperimentKind::operator_estimation) {
    c.n = 5;
    c.repetitions = 100;
    c.estimators = parse_estimator_list("ois,pdis,rcis:oracle,scis:oracle");
  } else {
    c.n = 3;
    c.repetitions = 500;
    c.estimators = parse_estimator_list("ois,pdis,rcis:oracle,rcis:online,scis:oracle,scis:online");
  }
  return c;
}

void ExperimentConfig::validate() const {
  chain.validate();
  if (n < 1) throw InputError("n must be at least 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("beta must lie in [0, 1]");
  if (estimators.empty()) throw InputError("at least one estimator is required");
  if (samples < 1) throw InputError("samples must be positive");
  if (episodes < 0) throw InputError("episodes must be non-negative");
  if (repetitions < 1) throw InputError("repetitions must be positive");
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  if (!(bootstrap_level > 0.0 && bootstrap_level < 1.0)) throw InputError("bootstrap level must lie in (0, 1)");
  if (bootstrap_resamples < 1) throw InputError("bootstrap resamples must be positive");
  if (episode_cap < 1) throw InputError("episode cap must be positive");
  if (!(q_param > 0.0)) throw InputError("q-param must be positive");
  if (!(enumeration_cap >= 1.0)) throw InputError("enumeration cap must be at least 1");
  if (!(q_pi_tolerance > 0.0)) throw InputError("value-iteration tolerance must be positive");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "seed = " << seed << "\n"
      << "chain-length = " << chain.n_interior << "\n"
      << "noise = " << format_double(chain.noise) << "\n"
      << "n = " << n << "\n"
      << "beta = " << format_double(beta) << "\n"
      << "extra-actions = " << chain.extra_actions << "\n"
      << "alpha = " << format_double(alpha) << "\n"
      << "gamma = " << format_double(chain.gamma) << "\n"
      << "samples = " << samples << "\n"
      << "episodes = " << episodes << "\n"
      << "repetitions = " << repetitions << "\n"
      << "estimators = \"" << format_estimator_list(estimators) << "\"\n"
      << "repr = " << to_string(repr) << "\n"
      << "update-mode = " << to_string(update_mode) << "\n"
      << "mse-weighting = " << to_string(mse_weighting) << "\n"
      << "online-order = " << to_string(online_order) << "\n"
      << "objective = " << to_string(objective) << "\n"
      << "start-pairs = " << to_string(start_pairs) << "\n"
      << "episode-cap = " << episode_cap << "\n"
      << "q-param = " << format_double(q_param) << "\n"
      << "q-param-kind = " << to_string(q_param_kind) << "\n"
      << "bootstrap-level = " << format_double(bootstrap_level) << "\n"
      << "bootstrap-resamples = " << bootstrap_resamples << "\n"
      << "enumeration-cap = " << format_double(enumeration_cap) << "\n";
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::string text = std::string(to_string(experiment)) + "\n" + serialize();
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "noise") return SweepAxis::noise;
  if (text == "n") return SweepAxis::horizon;
  if (text == "beta") return SweepAxis::beta;
  if (text == "extra-actions") return SweepAxis::extra_actions;
  throw InputError("unknown sweep axis '" + std::string(text) + "'");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::noise: return "noise";
    case SweepAxis::horizon: return "n";
    case SweepAxis::beta: return "beta";
    case SweepAxis::extra_actions: return "extra-actions";
  }
  return "?";
}

std::vector<double> sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::noise: return {0.0, 0.1, 0.5};
    case SweepAxis::horizon: return {2, 4, 7};
    case SweepAxis::beta: return {0.1, 0.5, 1.0};
    case SweepAxis::extra_actions: return {0, 1, 3};
  }
  return {};
}

std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis) {
  std::vector<ExperimentConfig> out;
  for (double v : sweep_values(axis)) {
    ExperimentConfig c = base;
    switch (axis) {
      case SweepAxis::noise: c.chain.noise = v; break;
      case SweepAxis::horizon: c.n = static_cast<int>(v); break;
      case SweepAxis::beta: c.beta = v; break;
      case SweepAxis::extra_actions: c.chain.extra_actions = static_cast<int>(v); break;
    }
    out.push_back(std::move(c));
  }
  return out;
}

const EstimatorCurve& RunResult::curve(std::string_view estimator_name) const {
  for (const auto& c : curves) {
    if (c.estimator.name() == estimator_name) return c;
  }
  throw InputError("run has no estimator '" + std::string(estimator_name) + "'");
}

int threads_from_environment() {
  const char* raw = std::getenv("CIS_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 1) throw InputError("CIS_THREADS must be a positive integer");
  return static_cast<int>(v);
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, double level, int resamples, Rng& rng) {
  if (samples.empty()) throw InputError("bootstrap needs at least one sample");
  if (!(level > 0.0 && level < 1.0)) throw InputError("bootstrap level must lie in (0, 1)");
  if (resamples < 1) throw InputError("bootstrap needs at least one resample");
  if (std::all_of(samples.begin(), samples.end(), [&](double v) { return v == samples.front(); })) {
    return {samples.front(), samples.front()};
  }
  const std::size_t n = samples.size();
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += samples[static_cast<std::size_t>(rng() % n)];
    m = total / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  // Linear interpolation between order statistics.
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] + frac * (means[hi] - means[lo]);
  };
  return {quantile((1.0 - level) / 2.0), quantile((1.0 + level) / 2.0)};
}

namespace {

struct Instance {
  Mdp mdp;
  Policy pi;
  Policy mu;
};

Instance draw_instance(const ExperimentConfig& config, Rng& rng) {
  Mdp mdp = build_chain(config.chain);
  Policy base = random_dirichlet_policy(mdp, rng);
  Policy mu = random_dirichlet_policy(mdp, rng);
  Policy pi = mix_policies(base, mu, config.beta);
  return {std::move(mdp), std::move(pi), std::move(mu)};
}

std::vector<Scheme> schemes_of(const std::vector<EstimatorSpec>& specs) {
  std::vector<Scheme> out;
  for (const auto& s : specs) {
    if (s.source == WeightSource::oracle && std::find(out.begin(), out.end(), s.scheme) == out.end()) {
      out.push_back(s.scheme);
    }
  }
  return out;
}

}  // namespace

RepetitionCurves run_operator_repetition(const ExperimentConfig& config, int repetition) {
  Rng rng(config.seed + static_cast<std::uint64_t>(repetition));
  const Instance inst = draw_instance(config, rng);
  const QTable q = random_q_function(inst.mdp, config.q_param, rng, config.q_param_kind);
  const double gamma = inst.mdp.gamma();

  std::vector<StateAction> starts = inst.mdp.nonterminal_pairs();
  if (config.start_pairs == StartPairs::initial) {
    std::erase_if(starts, [&](StateAction sa) { return sa.state != config.chain.initial_state; });
  }
  const std::size_t num_est = config.estimators.size();
  const auto samples = static_cast<std::size_t>(config.samples);
  const auto oracle_schemes = schemes_of(config.estimators);

  RepetitionCurves out;
  out.mse.assign(num_est, std::vector<double>(samples, 0.0));
  out.final_error.assign(num_est, 0.0);
  const double pair_weight = 1.0 / static_cast<double>(starts.size());

  for (std::size_t s = 0; s < starts.size(); ++s) {
    const StateAction start = starts[s];
    const double truth = exact_operator(inst.mdp, inst.pi, q, config.n, start, config.enumeration_cap);
    OracleWeights oracle;
    if (!oracle_schemes.empty()) {
      const auto dist = enumerate_trajectories(inst.mdp, inst.mu, inst.pi, start, config.n, config.enumeration_cap);
      for (Scheme scheme : oracle_schemes) add_oracle_tables(oracle, dist, scheme);
    }
    std::vector<std::optional<WeightStore>> stores(num_est);
    std::vector<std::optional<OnlineWeights>> online(num_est);
    std::vector<const WeightProvider*> providers(num_est, nullptr);
    for (std::size_t e = 0; e < num_est; ++e) {
      const auto& spec = config.estimators[e];
      if (!uses_conditional_weights(spec.scheme)) continue;
      if (spec.source == WeightSource::online) {
        stores[e].emplace(config.objective);
        online[e].emplace(*stores[e]);
        providers[e] = &*online[e];
      } else {
        providers[e] = &oracle;
      }
    }

    Rng sampler = rng.split(1000 + s);
    std::vector<double> running(num_est, 0.0);
    for (std::size_t m = 0; m < samples; ++m) {
      const Trajectory traj = sample_trajectory(inst.mdp, inst.mu, start, config.n, sampler);
      const double v_end = state_value(q, inst.pi, traj.final_state());
      for (std::size_t e = 0; e < num_est; ++e) {
        const auto& spec = config.estimators[e];
        const bool observe_first = config.online_order == OnlineOrder::update_then_query;
        if (stores[e] && observe_first) observe_for_scheme(*stores[e], spec.scheme, traj, inst.pi, inst.mu, gamma);
        running[e] += estimate(spec, traj, gamma, v_end, inst.pi, inst.mu, providers[e]);
        if (stores[e] && !observe_first) observe_for_scheme(*stores[e], spec.scheme, traj, inst.pi, inst.mu, gamma);
        const double err = running[e] / static_cast<double>(m + 1) - truth;
        out.mse[e][m] += pair_weight * err * err;
        if (m + 1 == samples) out.final_error[e] += pair_weight * err;
      }
    }
  }
  return out;
}

RepetitionCurves run_policy_eval_repetition(const ExperimentConfig& config, int repetition) {
  Rng rng(config.seed + static_cast<std::uint64_t>(repetition));
  const Instance inst = draw_instance(config, rng);
  const QTable q_pi = solve_q_pi(inst.mdp, inst.pi, config.q_pi_tolerance);

  std::vector<int> horizons(static_cast<std::size_t>(config.n));
  std::iota(horizons.begin(), horizons.end(), 1);
  const OracleWeights oracle = build_oracle_weights(inst.mdp, inst.mu, inst.pi, inst.mdp.nonterminal_pairs(), horizons,
                                                    schemes_of(config.estimators), config.enumeration_cap);

  PolicyEvalOptions options;
  options.horizon = config.n;
  options.episodes = config.episodes;
  options.alpha = config.alpha;
  options.episode_cap = config.episode_cap;
  options.update_mode = config.update_mode;
  options.mse_weighting = config.mse_weighting;
  options.online_order = config.online_order;
  options.objective = config.objective;

  // Every learner replays the same behaviour episodes.
  const Rng episodes = rng.split(1);
  RepetitionCurves out;
  for (const auto& spec : config.estimators) {
    auto result = run_policy_evaluation(inst.mdp, inst.pi, inst.mu, spec, &oracle, config.repr, options, q_pi, episodes);
    out.mse.push_back(std::move(result.mse));
  }
  return out;
}

std::vector<RepetitionCurves> run_repetitions(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const int reps = config.repetitions;
  std::vector<RepetitionCurves> out(static_cast<std::size_t>(reps));
  auto kernel = [&](int r) {
    return config.experiment == ExperimentKind::operator_estimation ? run_operator_repetition(config, r)
                                                                     : run_policy_eval_repetition(config, r);
  };

  if (options.execution == Execution::serial) {
    for (int r = 0; r < reps; ++r) out[r] = kernel(r);
    return out;
  }

  const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
  // Exceptions cannot cross the parallel region; keep the first one.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int r = 0; r < reps; ++r) {
    try {
      out[r] = kernel(r);
    } catch (...) {
#pragma omp critical(cis_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

RunResult aggregate(const ExperimentConfig& config, const std::vector<RepetitionCurves>& reps,
                    const RunOptions& options) {
  if (reps.empty()) throw InputError("nothing to aggregate");
  RunResult result;
  result.config = config;
  result.config_hash = config.hash();
  const std::size_t num_est = config.estimators.size();
  const std::size_t steps = reps.front().mse.front().size();
  // Operator curves start at sample 1; policy-evaluation curves at episode 0.
  const int first_step = config.experiment == ExperimentKind::operator_estimation ? 1 : 0;
  const Rng base = Rng(config.seed).split(0xB007);

  for (std::size_t e = 0; e < num_est; ++e) {
    EstimatorCurve curve;
    curve.estimator = config.estimators[e];
    curve.points.resize(steps);
    const Rng est_rng = base.split(e);
    auto point = [&](std::size_t k) {
      std::vector<double> column(reps.size());
      for (std::size_t r = 0; r < reps.size(); ++r) column[r] = reps[r].mse[e][k];
      double mean = 0.0;
      for (double v : column) mean += v;
      mean /= static_cast<double>(column.size());
      Rng boot = est_rng.split(k);
      auto [lo, hi] = bootstrap_ci(column, config.bootstrap_level, config.bootstrap_resamples, boot);
      // Percentile intervals can miss a skewed mean; widen to keep lo <= mean <= hi.
      curve.points[k] = {first_step + static_cast<int>(k), mean, std::min(lo, mean), std::max(hi, mean)};
    };
    if (options.execution == Execution::serial) {
      for (std::size_t k = 0; k < steps; ++k) point(k);
    } else {
      const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
      for (std::size_t k = 0; k < steps; ++k) point(k);
    }
    for (const auto& rep : reps) {
      curve.final_mse.push_back(rep.mse[e].back());
      if (!rep.final_error.empty()) curve.final_error.push_back(rep.final_error[e]);
    }
    result.curves.push_back(std::move(curve));
  }
  return result;
}

RunResult run_operator_estimation(const ExperimentConfig& config, const RunOptions& options) {
  if (config.experiment != ExperimentKind::operator_estimation) throw InputError("not an operator config");
  return aggregate(config, run_repetitions(config, options), options);
}

RunResult run_policy_evaluation_experiment(const ExperimentConfig& config, const RunOptions& options) {
  if (config.experiment != ExperimentKind::policy_evaluation) throw InputError("not a policy-eval config");
  return aggregate(config, run_repetitions(config, options), options);
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return config.experiment == ExperimentKind::operator_estimation ? run_operator_estimation(config, options)
                                                                  : run_policy_evaluation_experiment(config, options);
}

void write_csv(std::ostream& out, const std::vector<RunResult>& results) {
  out << kCsvHeader << '\n';
  for (const auto& result : results) {
    const auto& c = result.config;
    const std::string prefix_tail = std::to_string(c.chain.n_interior) + ',' + format_double(c.chain.noise) + ',' +
                                    std::to_string(c.n) + ',' + format_double(c.beta) + ',' +
                                    std::to_string(c.chain.extra_actions) + ',' + format_double(c.alpha) + ',' +
                                    format_double(c.chain.gamma) + ',';
    const std::string suffix = ',' + std::to_string(c.repetitions) + ',' + std::to_string(c.seed) + '\n';
    for (const auto& curve : result.curves) {
      const std::string head = std::string(to_string(c.experiment)) + ',' + curve.estimator.name() + ',' + prefix_tail;
      for (const auto& p : curve.points) {
        out << head << p.step << ',' << format_double(p.mean_mse) << ',' << format_double(p.ci_lo) << ','
            << format_double(p.ci_hi) << suffix;
      }
    }
  }
}

}  // namespace cis
