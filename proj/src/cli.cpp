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

#include "cis/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>

#include "cis/errors.hpp"
#include "cis/exact.hpp"
#include "cis/verification.hpp"

namespace cis {
namespace {

// Raw flag values; unset ones keep the config-file or default value.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> chain_length;
  std::optional<double> noise;
  std::optional<int> n;
  std::optional<double> beta;
  std::optional<int> extra_actions;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<int> samples;
  std::optional<int> episodes;
  std::optional<int> repetitions;
  std::optional<std::string> estimators;
  std::optional<std::string> repr;
  std::optional<std::string> update_mode;
  std::optional<std::string> mse_weighting;
  std::optional<std::string> online_order;
  std::optional<std::string> objective;
  std::optional<std::string> start_pairs;
  std::optional<int> episode_cap;
  std::optional<double> q_param;
  std::optional<std::string> q_param_kind;
  std::optional<double> bootstrap_level;
  std::optional<int> bootstrap_resamples;
  std::optional<double> enumeration_cap;
  std::optional<std::string> sweep;
  std::optional<int> start_state;
  std::optional<int> start_action;
};

// Runs `parse` and renames any InputError after the flag it came from.
template <typename T, typename F>
void apply(const std::optional<T>& value, const char* flag, F&& parse) {
  if (!value) return;
  try {
    parse(*value);
  } catch (const InputError& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

ExperimentConfig build_config(ExperimentKind kind, const Overrides& o) {
  ExperimentConfig c = ExperimentConfig::defaults(kind);
  if (o.seed) c.seed = *o.seed;
  if (o.chain_length) {
    c.chain.n_interior = *o.chain_length;
    c.chain.initial_state = std::min(c.chain.initial_state, std::max(*o.chain_length, 1));
  }
  if (o.noise) c.chain.noise = *o.noise;
  if (o.n) c.n = *o.n;
  if (o.beta) c.beta = *o.beta;
  if (o.extra_actions) c.chain.extra_actions = *o.extra_actions;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.gamma) c.chain.gamma = *o.gamma;
  if (o.samples) c.samples = *o.samples;
  if (o.episodes) c.episodes = *o.episodes;
  if (o.repetitions) c.repetitions = *o.repetitions;
  if (o.episode_cap) c.episode_cap = *o.episode_cap;
  if (o.q_param) c.q_param = *o.q_param;
  if (o.bootstrap_level) c.bootstrap_level = *o.bootstrap_level;
  if (o.bootstrap_resamples) c.bootstrap_resamples = *o.bootstrap_resamples;
  if (o.enumeration_cap) c.enumeration_cap = *o.enumeration_cap;
  apply(o.estimators, "--estimators", [&](const std::string& v) { c.estimators = parse_estimator_list(v); });
  apply(o.repr, "--repr", [&](const std::string& v) { c.repr = parse_repr(v); });
  apply(o.update_mode, "--update-mode", [&](const std::string& v) { c.update_mode = parse_update_mode(v); });
  apply(o.mse_weighting, "--mse-weighting", [&](const std::string& v) { c.mse_weighting = parse_mse_weighting(v); });
  apply(o.online_order, "--online-order", [&](const std::string& v) { c.online_order = parse_online_order(v); });
  apply(o.objective, "--objective", [&](const std::string& v) { c.objective = parse_objective(v); });
  apply(o.start_pairs, "--start-pairs", [&](const std::string& v) { c.start_pairs = parse_start_pairs(v); });
  apply(o.q_param_kind, "--q-param-kind", [&](const std::string& v) { c.q_param_kind = parse_gaussian_param(v); });
  try {
    c.validate();
  } catch (const InputError& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

void add_options(CLI::App& app, Overrides& o) {
  app.add_option("--seed", o.seed, "Base seed; repetition r uses seed + r");
  app.add_option("--chain-length", o.chain_length, "Interior chain states (default 6)");
  app.add_option("--noise", o.noise, "Transition noise probability")->check(CLI::Range(0.0, 1.0));
  app.add_option("--n", o.n, "Window length")->check(CLI::PositiveNumber);
  app.add_option("--beta", o.beta, "Target mixing coefficient")->check(CLI::Range(0.0, 1.0));
  app.add_option("--extra-actions", o.extra_actions, "Extra copies of each move")->check(CLI::NonNegativeNumber);
  app.add_option("--alpha", o.alpha, "TD learning rate")->check(CLI::PositiveNumber);
  app.add_option("--gamma", o.gamma, "Discount")->check(CLI::Range(0.0, 1.0));
  app.add_option("--samples", o.samples, "Trajectories per start pair (operator)")->check(CLI::PositiveNumber);
  app.add_option("--episodes", o.episodes, "Episodes per run (policy-eval)")->check(CLI::NonNegativeNumber);
  app.add_option("--repetitions", o.repetitions, "Independent repetitions")->check(CLI::PositiveNumber);
  app.add_option("--estimators", o.estimators, "Comma list, e.g. ois,pdis,rcis:oracle,scis:online");
  app.add_option("--repr", o.repr, "tabular | tilecode");
  app.add_option("--update-mode", o.update_mode, "per-visit | episode-start");
  app.add_option("--mse-weighting", o.mse_weighting, "uniform | initial");
  app.add_option("--online-order", o.online_order, "update-then-query | query-then-update");
  app.add_option("--objective", o.objective, "Weight regression objective: plain | psi-weighted");
  app.add_option("--start-pairs", o.start_pairs, "Operator MSE over all | initial start pairs");
  app.add_option("--episode-cap", o.episode_cap, "Maximum episode length")->check(CLI::PositiveNumber);
  app.add_option("--q-param", o.q_param, "Gaussian parameter of the random Q")->check(CLI::PositiveNumber);
  app.add_option("--q-param-kind", o.q_param_kind, "variance | stddev");
  app.add_option("--bootstrap-level", o.bootstrap_level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  app.add_option("--bootstrap-resamples", o.bootstrap_resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  app.add_option("--enumeration-cap", o.enumeration_cap, "Largest enumeration allowed")->check(CLI::PositiveNumber);
  app.add_option("--sweep", o.sweep, "Run the grid of one axis: noise | n | beta | extra-actions");
  app.add_option("--start-state", o.start_state, "exact-dump start state");
  app.add_option("--start-action", o.start_action, "exact-dump start action");
}

std::ostream& open_output(const std::optional<std::string>& path, std::ostream& fallback,
                          std::unique_ptr<std::ofstream>& holder) {
  if (!path) return fallback;
  holder = std::make_unique<std::ofstream>(*path, std::ios::binary);
  if (!*holder) throw InputError("cannot open '" + *path + "' for writing");
  return *holder;
}

int run_harness(const CliInvocation& inv, std::ostream& out) {
  const RunOptions options{Execution::parallel, threads_from_environment()};
  std::vector<ExperimentConfig> configs{inv.config};
  if (inv.sweep) configs = sweep_configs(inv.config, *inv.sweep);
  std::vector<RunResult> results;
  for (const auto& c : configs) results.push_back(run_experiment(c, options));
  std::unique_ptr<std::ofstream> file;
  std::ostream& sink = open_output(inv.out_path, out, file);
  write_csv(sink, results);
  sink.flush();
  return sink ? 0 : 1;
}

int run_verify(const CliInvocation& inv, std::ostream& out) {
  std::unique_ptr<std::ofstream> file;
  std::ostream& sink = open_output(inv.out_path, out, file);
  const auto battery = verification_battery();
  bool ok = true;
  for (const auto& r : run_verification(battery)) {
    sink << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.comparisons
         << " comparisons, worst " << format_double(r.worst) << ")";
    if (!r.passed) sink << ": " << r.failure;
    sink << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

int run_exact_dump(const CliInvocation& inv, std::ostream& out) {
  const ExperimentConfig& c = inv.config;
  Rng rng(c.seed);
  std::optional<Mdp> mdp;
  if (inv.mdp_path) {
    std::ifstream in(*inv.mdp_path);
    if (!in) throw InputError("cannot open '" + *inv.mdp_path + "'");
    mdp = read_mdp(in);
  } else {
    mdp = build_chain(c.chain);
  }
  // Same draws as repetition 0 of a harness run with this seed.
  const Policy base = random_dirichlet_policy(*mdp, rng);
  const Policy mu = random_dirichlet_policy(*mdp, rng);
  const Policy pi = mix_policies(base, mu, c.beta);
  if (!mdp->valid(inv.start) || mdp->is_terminal(inv.start.state)) {
    throw InputError("start pair (" + std::to_string(inv.start.state) + ", " + std::to_string(inv.start.action) +
                     ") is not a non-terminal pair of this MDP");
  }
  const auto dist = enumerate_trajectories(*mdp, mu, pi, inv.start, c.n, c.enumeration_cap);

  std::unique_ptr<std::ofstream> file;
  std::ostream& sink = open_output(inv.out_path, out, file);
  sink << "# atoms\n";
  write_atoms_csv(sink, dist);
  sink << "# weights\nconditioner,key,weight\n";
  std::vector<Conditioner> tables{Conditioner::return_value(), Conditioner::reward_sequence()};
  for (int t = 0; t < c.n; ++t) tables.push_back(Conditioner::state_action_reward_at(t));
  for (int t = 0; t < c.n; ++t) tables.push_back(Conditioner::reward_at(t));
  tables.push_back(Conditioner::state_at(c.n));
  for (const auto& phi : tables) {
    const auto table = exact_conditional_weight(dist, phi);
    std::vector<std::pair<GroupKey, double>> rows(table.weights().begin(), table.weights().end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [key, w] : rows) sink << phi.name() << ',' << key.to_string() << ',' << format_double(w) << '\n';
  }
  return sink ? 0 : 1;
}

}  // namespace

CliInvocation parse_invocation(const std::vector<std::string>& args) {
  CLI::App app{"Conditional importance sampling for off-policy evaluation on finite MDPs", "cis"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(false);
  app.set_config("--config", "", "Flat key = value file using the flag names");

  Overrides o;
  CliInvocation inv;
  std::string out_path;
  std::string save_path;
  std::string mdp_path;
  app.add_option("--out", out_path, "Output file (default stdout)");
  app.add_option("--save-config", save_path, "Write the effective configuration to this file");
  add_options(app, o);

  auto* op = app.add_subcommand("operator", "Estimate (T^pi)^n Q on the chain and write MSE curves");
  auto* pe = app.add_subcommand("policy-eval", "Off-policy n-step TD on the chain and write MSE curves");
  auto* ver = app.add_subcommand("verify", "Run the exact-enumeration property suite");
  auto* dump = app.add_subcommand("exact-dump", "Write enumeration atoms and exact weight tables");
  dump->add_option("--mdp", mdp_path, "Read the MDP from this file instead of building the chain");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    inv.help = true;
    inv.help_text = app.help();
    return inv;
  } catch (const CLI::CallForAllHelp&) {
    inv.help = true;
    inv.help_text = app.help("", CLI::AppFormatMode::All);
    return inv;
  } catch (const CLI::ParseError& e) {
    std::string message = e.what();
    if (e.get_name() == "RequiredError" && app.get_subcommands().empty()) {
      message = "a subcommand is required: operator, policy-eval, verify or exact-dump";
    }
    throw UsageError(message);
  }

  ExperimentKind kind = ExperimentKind::operator_estimation;
  if (op->parsed()) {
    inv.subcommand = Subcommand::operator_estimation;
  } else if (pe->parsed()) {
    inv.subcommand = Subcommand::policy_evaluation;
    kind = ExperimentKind::policy_evaluation;
  } else if (ver->parsed()) {
    inv.subcommand = Subcommand::verify;
  } else {
    inv.subcommand = Subcommand::exact_dump;
  }

  inv.config = build_config(kind, o);
  if (auto* cfg = app.get_config_ptr(); cfg && cfg->count() > 0) inv.config_path = cfg->as<std::string>();
  if (!out_path.empty()) inv.out_path = out_path;
  if (!save_path.empty()) inv.save_config_path = save_path;
  if (!mdp_path.empty()) inv.mdp_path = mdp_path;
  apply(o.sweep, "--sweep", [&](const std::string& v) { inv.sweep = parse_sweep_axis(v); });
  if (inv.sweep && (inv.subcommand == Subcommand::verify || inv.subcommand == Subcommand::exact_dump)) {
    throw UsageError("--sweep only applies to operator and policy-eval");
  }
  inv.start = {o.start_state.value_or(inv.config.chain.initial_state), o.start_action.value_or(1)};
  return inv;
}

int execute(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  if (inv.help) {
    out << inv.help_text;
    return 0;
  }
  try {
    if (inv.save_config_path) {
      std::ofstream file(*inv.save_config_path, std::ios::binary);
      if (!file) throw InputError("cannot open '" + *inv.save_config_path + "' for writing");
      file << inv.config.serialize();
    }
    switch (inv.subcommand) {
      case Subcommand::operator_estimation:
      case Subcommand::policy_evaluation:
        return run_harness(inv, out);
      case Subcommand::verify:
        return run_verify(inv, out);
      case Subcommand::exact_dump:
        return run_exact_dump(inv, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const EnumerationLimit& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliInvocation inv;
  try {
    inv = parse_invocation(args);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nrun 'cis --help' for the list of subcommands and flags\n";
    return 2;
  }
  return execute(inv, out, err);
}

}  // namespace cis
