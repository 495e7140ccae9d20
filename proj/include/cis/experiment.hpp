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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cis/environments.hpp"
#include "cis/estimators.hpp"
#include "cis/random.hpp"
#include "cis/value_learning.hpp"
#include "cis/weights.hpp"

namespace cis {

enum class ExperimentKind { operator_estimation, policy_evaluation };
/// Which start pairs the operator-estimation MSE averages over.
enum class StartPairs { all, initial };

std::string_view to_string(ExperimentKind kind);
std::string_view to_string(StartPairs pairs);
StartPairs parse_start_pairs(std::string_view text);
std::string_view to_string(RegressionObjective objective);
RegressionObjective parse_objective(std::string_view text);
std::string_view to_string(GaussianParam kind);
GaussianParam parse_gaussian_param(std::string_view text);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::operator_estimation;
  ChainSpec chain;
  int n = 5;
  double beta = 1.0;
  std::vector<EstimatorSpec> estimators;
  int samples = 1000;
  int episodes = 2000;
  int repetitions = 100;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  double bootstrap_level = 0.95;
  int bootstrap_resamples = 1000;
  ReprKind repr = ReprKind::tabular;
  UpdateMode update_mode = UpdateMode::per_visit;
  MseWeighting mse_weighting = MseWeighting::uniform;
  OnlineOrder online_order = OnlineOrder::update_then_query;
  RegressionObjective objective = RegressionObjective::plain;
  StartPairs start_pairs = StartPairs::all;
  int episode_cap = 100;
  double q_param = 0.1;
  GaussianParam q_param_kind = GaussianParam::variance;
  double enumeration_cap = kDefaultEnumerationCap;
  double q_pi_tolerance = 1e-10;

  /// Operator estimation: n = 5, 100 repetitions. Policy evaluation: n = 3,
  /// 500 repetitions. Both: gamma 0.99, alpha 0.1, 6-state chain, 10% noise.
  static ExperimentConfig defaults(ExperimentKind kind);

  /// Throws InputError on out-of-range values.
  void validate() const;

  /// Flat `key = value` text using the CLI flag names.
  std::string serialize() const;
  std::uint64_t hash() const;
};

/// Axes of the one-at-a-time parameter grid.
enum class SweepAxis { noise, horizon, beta, extra_actions };
SweepAxis parse_sweep_axis(std::string_view text);
std::string_view to_string(SweepAxis axis);
/// Low / medium / high values of an axis.
std::vector<double> sweep_values(SweepAxis axis);
/// `base` with one axis replaced, for every grid value of that axis.
std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis);

/// Per-repetition learning curves, indexed [estimator][step].
struct RepetitionCurves {
  std::vector<std::vector<double>> mse;
  /// Operator estimation only: signed error of the final running mean,
  /// averaged over start pairs, one entry per estimator.
  std::vector<double> final_error;
};

struct CurvePoint {
  int step = 0;
  double mean_mse = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct EstimatorCurve {
  EstimatorSpec estimator;
  std::vector<CurvePoint> points;
  /// Last-step MSE of each repetition.
  std::vector<double> final_mse;
  /// Operator estimation only; see RepetitionCurves::final_error.
  std::vector<double> final_error;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<EstimatorCurve> curves;
  std::uint64_t config_hash = 0;

  const EstimatorCurve& curve(std::string_view estimator_name) const;
};

enum class Execution { serial, parallel };

struct RunOptions {
  Execution execution = Execution::parallel;
  /// Worker cap for the parallel path; <= 0 means the OpenMP default.
  int threads = 0;
};

/// Worker cap from CIS_THREADS, or 0 when unset.
int threads_from_environment();

/// Percentile bootstrap of the mean.
std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, double level, int resamples, Rng& rng);

/// One repetition, seeded with `config.seed + repetition`.
RepetitionCurves run_operator_repetition(const ExperimentConfig& config, int repetition);
RepetitionCurves run_policy_eval_repetition(const ExperimentConfig& config, int repetition);

/// All repetitions; both execution paths return identical data.
std::vector<RepetitionCurves> run_repetitions(const ExperimentConfig& config, const RunOptions& options = {});

/// Mean and bootstrap interval per estimator and step.
RunResult aggregate(const ExperimentConfig& config, const std::vector<RepetitionCurves>& reps,
                    const RunOptions& options = {});

RunResult run_operator_estimation(const ExperimentConfig& config, const RunOptions& options = {});
RunResult run_policy_evaluation_experiment(const ExperimentConfig& config, const RunOptions& options = {});
/// Dispatches on `config.experiment`.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

inline constexpr std::string_view kCsvHeader =
    "experiment,estimator,chain_length,noise,n,beta,extra_actions,alpha,gamma,step,mean_mse,ci_lo,ci_hi,"
    "repetitions,seed";

void write_csv(std::ostream& out, const std::vector<RunResult>& results);

}  // namespace cis
