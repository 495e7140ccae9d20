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

#include "cis/mdp.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cis/errors.hpp"

namespace cis {
namespace {

constexpr double kSumTolerance = 1e-12;

void require_distribution(std::span<const double> probs, const std::string& what) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InputError(what + ": negative or non-finite probability");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InputError(what + ": probabilities sum to " + format_double(total));
  }
}

}  // namespace

Mdp::Mdp(int num_states, int num_actions, double gamma, std::vector<bool> terminal,
         std::vector<double> initial, std::vector<std::vector<Outcome>> transitions)
    : num_states_(num_states),
      num_actions_(num_actions),
      gamma_(gamma),
      terminal_(std::move(terminal)),
      initial_(std::move(initial)),
      transitions_(std::move(transitions)) {
  if (num_states_ <= 0 || num_actions_ <= 0) throw InputError("mdp needs at least one state and action");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InputError("gamma must lie in [0, 1)");
  const auto n_states = static_cast<std::size_t>(num_states_);
  if (terminal_.size() != n_states) throw InputError("terminal flags do not match state count");
  if (initial_.size() != n_states) throw InputError("initial distribution does not match state count");
  require_distribution(initial_, "initial distribution");
  transitions_.resize(n_states * num_actions_);

  for (int x = 0; x < num_states_; ++x) {
    for (int a = 0; a < num_actions_; ++a) {
      auto& outs = transitions_[static_cast<std::size_t>(x) * num_actions_ + a];
      if (terminal_[x]) {
        if (a == 0) {
          if (!outs.empty() && !(outs.size() == 1 && outs[0].next_state == x &&
                                 outs[0].reward == 0.0 && outs[0].probability == 1.0)) {
            throw InputError("terminal state " + std::to_string(x) + " must self-loop with reward 0");
          }
          outs = {Outcome{x, 0.0, 1.0}};
        } else if (!outs.empty()) {
          throw InputError("terminal state " + std::to_string(x) + " has a non-stay action");
        }
        continue;
      }
      const std::string where = "outcomes of (" + std::to_string(x) + ", " + std::to_string(a) + ")";
      if (outs.empty()) throw InputError(where + ": empty");
      std::vector<double> probs;
      probs.reserve(outs.size());
      for (const auto& o : outs) {
        if (o.next_state < 0 || o.next_state >= num_states_) throw InputError(where + ": bad successor");
        if (!std::isfinite(o.reward)) throw InputError(where + ": non-finite reward");
        probs.push_back(o.probability);
      }
      require_distribution(probs, where);
    }
  }
}

std::vector<StateAction> Mdp::nonterminal_pairs() const {
  std::vector<StateAction> pairs;
  for (int x = 0; x < num_states_; ++x) {
    if (terminal_[x]) continue;
    for (int a = 0; a < num_actions_; ++a) pairs.push_back({x, a});
  }
  return pairs;
}

Policy::Policy(std::vector<std::vector<double>> probs) : probs_(std::move(probs)) {
  for (std::size_t x = 0; x < probs_.size(); ++x) {
    if (probs_[x].empty()) throw InputError("policy row " + std::to_string(x) + " is empty");
    require_distribution(probs_[x], "policy row " + std::to_string(x));
  }
}

Policy Policy::uniform(const Mdp& mdp) {
  std::vector<std::vector<double>> rows;
  for (int x = 0; x < mdp.num_states(); ++x) {
    const int k = mdp.num_actions(x);
    rows.emplace_back(static_cast<std::size_t>(k), 1.0 / k);
  }
  return Policy(std::move(rows));
}

void Policy::require_compatible(const Mdp& mdp) const {
  if (num_states() != mdp.num_states()) throw InputError("policy and mdp disagree on state count");
  for (int x = 0; x < mdp.num_states(); ++x) {
    if (num_actions(x) != mdp.num_actions(x)) {
      throw InputError("policy row " + std::to_string(x) + " does not match the action set");
    }
  }
}

Trajectory::Trajectory(StateAction start, std::vector<int> states, std::vector<int> actions,
                       std::vector<double> rewards)
    : rewards_(std::move(rewards)) {
  const std::size_t n = rewards_.size();
  if (n == 0) throw InputError("trajectory horizon must be at least 1");
  if (states.size() != n || actions.size() + 1 != n) throw InputError("inconsistent trajectory lengths");
  states_.reserve(n + 1);
  states_.push_back(start.state);
  states_.insert(states_.end(), states.begin(), states.end());
  actions_.reserve(n);
  actions_.push_back(start.action);
  actions_.insert(actions_.end(), actions.begin(), actions.end());
}

QTable::QTable(const Mdp& mdp)
    : num_actions_(mdp.num_actions()),
      terminal_(static_cast<std::size_t>(mdp.num_states())),
      values_(static_cast<std::size_t>(mdp.num_states()) * mdp.num_actions(), 0.0) {
  for (int x = 0; x < mdp.num_states(); ++x) terminal_[x] = mdp.is_terminal(x);
}

void QTable::set(int state, int action, double v) {
  if (terminal_[state]) return;
  values_[static_cast<std::size_t>(state) * num_actions_ + action] = v;
}

int sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = -1;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  // u fell into the rounding gap above the cumulative sum.
  return last_positive;
}

const Outcome& sample_outcome(const Mdp& mdp, StateAction sa, Rng& rng) {
  const auto outs = mdp.outcomes(sa.state, sa.action);
  if (outs.size() == 1) return outs[0];
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    if (outs[i].probability <= 0.0) continue;
    last_positive = i;
    cumulative += outs[i].probability;
    if (u < cumulative) return outs[i];
  }
  return outs[last_positive];
}

Trajectory sample_trajectory(const Mdp& mdp, const Policy& behaviour, StateAction start, int horizon,
                             Rng& rng) {
  if (!mdp.valid(start)) throw InputError("start pair out of range");
  if (horizon < 1) throw InputError("horizon must be at least 1");
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  states.reserve(horizon);
  actions.reserve(horizon - 1);
  rewards.reserve(horizon);
  StateAction current = start;
  for (int t = 0; t < horizon; ++t) {
    const Outcome& o = sample_outcome(mdp, current, rng);
    rewards.push_back(o.reward);
    states.push_back(o.next_state);
    if (t + 1 < horizon) {
      const int a = sample_index(behaviour.row(o.next_state), rng);
      actions.push_back(a);
      current = {o.next_state, a};
    }
  }
  return Trajectory(start, std::move(states), std::move(actions), std::move(rewards));
}

bool check_support_condition(const Policy& pi, const Policy& mu) {
  if (pi.num_states() != mu.num_states()) throw InputError("policies disagree on state count");
  for (int x = 0; x < pi.num_states(); ++x) {
    if (pi.num_actions(x) != mu.num_actions(x)) throw InputError("policies disagree on action sets");
    for (int a = 0; a < pi.num_actions(x); ++a) {
      if (pi.prob(x, a) > 0.0 && !(mu.prob(x, a) > 0.0)) return false;
    }
  }
  return true;
}

Policy mix_policies(const Policy& pi, const Policy& mu, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("beta must lie in [0, 1]");
  if (pi.num_states() != mu.num_states()) throw InputError("policies disagree on state count");
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(pi.num_states()));
  for (int x = 0; x < pi.num_states(); ++x) {
    if (pi.num_actions(x) != mu.num_actions(x)) throw InputError("policies disagree on action sets");
    auto& row = rows[x];
    row.resize(static_cast<std::size_t>(pi.num_actions(x)));
    for (int a = 0; a < pi.num_actions(x); ++a) {
      row[a] = beta * pi.prob(x, a) + (1.0 - beta) * mu.prob(x, a);
    }
  }
  return Policy(std::move(rows));
}

double importance_ratio(const Trajectory& traj, const Policy& pi, const Policy& mu, int s, int t) {
  if (s < 1 || t > traj.horizon() - 1) {
    if (s > t) return 1.0;
    throw InputError("importance ratio range outside [1, n-1]");
  }
  double rho = 1.0;
  for (int i = s; i <= t; ++i) {
    const int x = traj.state(i);
    const int a = traj.action(i);
    const double m = mu.prob(x, a);
    if (!(m > 0.0)) throw SupportViolation(x, a);
    rho *= pi.prob(x, a) / m;
  }
  return rho;
}

double truncated_return(const Trajectory& traj, double gamma) {
  double g = 0.0;
  double discount = 1.0;
  for (double r : traj.rewards()) {
    g += discount * r;
    discount *= gamma;
  }
  return g;
}

double bootstrapped_return(const Trajectory& traj, double gamma, double terminal_value) {
  double g = 0.0;
  double discount = 1.0;
  for (double r : traj.rewards()) {
    g += discount * r;
    discount *= gamma;
  }
  return g + discount * terminal_value;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_mdp(std::ostream& out, const Mdp& mdp) {
  out << "cis-mdp 1\n";
  out << "states " << mdp.num_states() << "\n";
  out << "actions " << mdp.num_actions() << "\n";
  out << "gamma " << format_double(mdp.gamma()) << "\n";
  out << "terminal";
  for (int x = 0; x < mdp.num_states(); ++x) out << ' ' << (mdp.is_terminal(x) ? 1 : 0);
  out << "\ninitial";
  for (double p : mdp.initial()) out << ' ' << format_double(p);
  out << "\n";
  for (int x = 0; x < mdp.num_states(); ++x) {
    if (mdp.is_terminal(x)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      for (const auto& o : mdp.outcomes(x, a)) {
        out << "outcome " << x << ' ' << a << ' ' << o.next_state << ' ' << format_double(o.reward)
            << ' ' << format_double(o.probability) << "\n";
      }
    }
  }
  out << "end\n";
}

namespace {

double parse_double(const std::string& token, int line) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw InputError("mdp line " + std::to_string(line) + ": bad number '" + token + "'");
  }
  return v;
}

int parse_int(const std::string& token, int line) {
  int v = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw InputError("mdp line " + std::to_string(line) + ": bad integer '" + token + "'");
  }
  return v;
}

}  // namespace

Mdp read_mdp(std::istream& in) {
  int num_states = -1;
  int num_actions = -1;
  double gamma = -1.0;
  std::vector<bool> terminal;
  std::vector<double> initial;
  std::vector<std::vector<Outcome>> transitions;
  bool saw_header = false;
  bool saw_end = false;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    auto need = [&](std::size_t k) {
      if (fields.size() != k) {
        throw InputError("mdp line " + std::to_string(line_no) + ": '" + tag + "' expects " +
                         std::to_string(k) + " fields");
      }
    };
    if (!saw_header) {
      if (tag != "cis-mdp" || fields.size() != 1 || fields[0] != "1") {
        throw InputError("mdp file must start with 'cis-mdp 1'");
      }
      saw_header = true;
    } else if (tag == "states") {
      need(1);
      num_states = parse_int(fields[0], line_no);
    } else if (tag == "actions") {
      need(1);
      num_actions = parse_int(fields[0], line_no);
    } else if (tag == "gamma") {
      need(1);
      gamma = parse_double(fields[0], line_no);
    } else if (tag == "terminal") {
      for (const auto& f : fields) terminal.push_back(parse_int(f, line_no) != 0);
    } else if (tag == "initial") {
      for (const auto& f : fields) initial.push_back(parse_double(f, line_no));
    } else if (tag == "outcome") {
      need(5);
      if (num_states <= 0 || num_actions <= 0) {
        throw InputError("mdp line " + std::to_string(line_no) + ": outcome before states/actions");
      }
      transitions.resize(static_cast<std::size_t>(num_states) * num_actions);
      const int x = parse_int(fields[0], line_no);
      const int a = parse_int(fields[1], line_no);
      if (x < 0 || x >= num_states || a < 0 || a >= num_actions) {
        throw InputError("mdp line " + std::to_string(line_no) + ": state/action out of range");
      }
      transitions[static_cast<std::size_t>(x) * num_actions + a].push_back(
          {parse_int(fields[2], line_no), parse_double(fields[3], line_no), parse_double(fields[4], line_no)});
    } else if (tag == "end") {
      saw_end = true;
      break;
    } else {
      throw InputError("mdp line " + std::to_string(line_no) + ": unknown record '" + tag + "'");
    }
  }
  if (!saw_header || !saw_end) throw InputError("truncated mdp file");
  return Mdp(num_states, num_actions, gamma, std::move(terminal), std::move(initial), std::move(transitions));
}

}  // namespace cis
