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

// One PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cis/experiment.hpp"
#include "cis/mdp.hpp"
#include "cis/verification.hpp"

namespace {

struct Verdict {
  bool passed = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += !o.passed;
  std::cout << (o.passed ? "PASS" : "FAIL") << ' ' << id << ' ' << title << " (" << o.detail << "; "
            << cis::format_double(std::round(secs * 10.0) / 10.0) << " s)" << std::endl;
}

Verdict combine(const std::vector<cis::CheckResult>& checks) {
  Verdict o;
  std::ostringstream detail;
  std::size_t comparisons = 0;
  double worst = 0.0;
  for (const auto& c : checks) {
    comparisons += c.comparisons;
    worst = std::max(worst, c.worst);
    if (!c.passed) {
      o.passed = false;
      detail << c.name << ": " << c.failure << "; ";
    }
  }
  detail << comparisons << " comparisons, worst " << cis::format_double(worst);
  o.detail = detail.str();
  return o;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

const cis::CurvePoint& final_point(const cis::RunResult& r, const std::string& name) {
  return r.curve(name).points.back();
}

std::string run_command(const std::string& args, int& status) {
  const std::string command = std::string(CIS_BINARY) + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("cannot spawn " + command);
  std::string out;
  char buffer[1 << 16];
  std::size_t got = 0;
  while ((got = fread(buffer, 1, sizeof buffer, pipe)) > 0) out.append(buffer, got);
  const int raw = pclose(pipe);
  status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(line);
  std::string part;
  while (std::getline(ss, part, sep)) parts.push_back(part);
  return parts;
}

// Largest spread of mean_mse across estimators at any step.
double largest_step_spread(const std::string& csv, int& estimators) {
  std::map<int, std::pair<double, double>> range;
  std::map<std::string, int> names;
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  if (line != cis::kCsvHeader) throw std::runtime_error("unexpected CSV header: " + line);
  while (std::getline(lines, line)) {
    const auto f = split(line, ',');
    const int step = std::stoi(f.at(9));
    const double mse = std::stod(f.at(10));
    ++names[f.at(1)];
    auto [it, fresh] = range.try_emplace(step, mse, mse);
    if (!fresh) {
      it->second.first = std::min(it->second.first, mse);
      it->second.second = std::max(it->second.second, mse);
    }
  }
  estimators = static_cast<int>(names.size());
  double spread = 0.0;
  for (const auto& [step, r] : range) spread = std::max(spread, r.second - r.first);
  return spread;
}

const std::string kAllEstimators = "ois,pdis,rcis:oracle,rcis:online,scis:oracle,scis:online,reward_cis,uncorrected";

}  // namespace

int main() {
  using namespace cis;
  const auto battery = verification_battery();

  report(1, "exact unbiasedness of OIS, PDIS, oracle RCIS and per-term oracle SCIS", [&] {
    return combine({check_ois_unbiased(battery), check_pdis(battery), check_conditional_unbiased(battery),
                    check_operator_routes(battery)});
  });
  report(2, "PDIS term variance <= OIS term variance",
         [&] { return combine({check_pdis(battery)}); });
  report(3, "variance ordering along the refinement chain return <= rewards <= trajectory",
         [&] { return combine({check_refinement(battery), check_optimal_conditioner(battery)}); });
  report(4, "return-conditioned weights equal return pmf ratios",
         [&] { return combine({check_return_ratio(battery)}); });
  report(5, "state-conditioned weights equal marginal ratio times action ratio",
         [&] { return combine({check_state_ratio(battery)}); });
  report(6, "weight store matches the numerical regression minimiser and converges",
         [&] { return combine({check_regression()}); });

  report(7, "operator estimation orderings at default settings", [&] {
    const auto base = ExperimentConfig::defaults(ExperimentKind::operator_estimation);
    const auto main_run = run_operator_estimation(base);
    const double ois = final_point(main_run, "ois").mean_mse;
    const double pdis = final_point(main_run, "pdis").mean_mse;
    const double rcis = final_point(main_run, "rcis:oracle").mean_mse;
    const double scis = final_point(main_run, "scis:oracle").mean_mse;
    auto ratio_at = [&](double noise) {
      auto config = base;
      config.chain.noise = noise;
      config.estimators = parse_estimator_list("ois,rcis:oracle");
      const auto r = run_operator_estimation(config);
      return final_point(r, "ois").mean_mse / final_point(r, "rcis:oracle").mean_mse;
    };
    const double quiet = ratio_at(0.0);
    const double noisy = ratio_at(0.5);
    std::ostringstream d;
    d << "final MSE ois " << format_double(ois) << " rcis " << format_double(rcis) << " pdis " << format_double(pdis)
      << " scis " << format_double(scis) << "; ois/rcis at noise 0 " << format_double(quiet) << ", at noise 0.5 "
      << format_double(noisy);
    return Verdict{rcis < ois && scis < pdis && noisy > quiet, d.str()};
  });

  report(8, "policy evaluation orderings, tabular and tile-coded", [&] {
    Verdict o;
    std::ostringstream d;
    for (ReprKind repr : {ReprKind::tabular, ReprKind::tilecode}) {
      auto config = ExperimentConfig::defaults(ExperimentKind::policy_evaluation);
      config.repr = repr;
      const auto r = run_policy_evaluation_experiment(config);
      const auto& ois = final_point(r, "ois");
      const auto& rcis_online = final_point(r, "rcis:online");
      const bool beats_ois = rcis_online.mean_mse < ois.mean_mse;
      d << to_string(repr) << ": rcis:online " << format_double(rcis_online.mean_mse) << (beats_ois ? " < " : " >= ")
        << "ois " << format_double(ois.mean_mse) << " (medians " << format_double(median(r.curve("rcis:online").final_mse))
        << " vs " << format_double(median(r.curve("ois").final_mse)) << ")";
      o.passed = o.passed && beats_ois;
      for (const std::string scheme : {"rcis", "scis"}) {
        const auto& oracle = final_point(r, scheme + ":oracle");
        const auto& online = final_point(r, scheme + ":online");
        const bool tracks = oracle.mean_mse <= online.mean_mse + (online.ci_hi - online.ci_lo);
        d << ", " << scheme << " oracle " << format_double(oracle.mean_mse) << (tracks ? " within" : " outside")
          << " online " << format_double(online.mean_mse) << " + CI width";
        o.passed = o.passed && tracks;
      }
      d << "; ";
    }
    o.detail = d.str();
    o.detail.resize(o.detail.size() - 2);
    return o;
  });

  report(9, "beta = 0 makes every estimator identical through the CLI", [&] {
    const std::vector<std::string> runs = {
        "operator --beta 0 --samples 300 --repetitions 1 --seed 3 --estimators " + kAllEstimators,
        "operator --beta 0 --samples 300 --repetitions 1 --seed 4 --noise 0.5 --extra-actions 1 --estimators " +
            kAllEstimators,
        "operator --beta 0 --samples 100 --repetitions 20 --estimators " + kAllEstimators,
        "policy-eval --beta 0 --episodes 200 --repetitions 1 --seed 3 --estimators " + kAllEstimators,
        "policy-eval --beta 0 --episodes 200 --repetitions 1 --seed 4 --repr tilecode --estimators " + kAllEstimators,
    };
    Verdict o;
    double worst = 0.0;
    for (const auto& args : runs) {
      int status = 0;
      const auto csv = run_command(args, status);
      if (status != 0) return Verdict{false, "'" + args + "' exited with " + std::to_string(status)};
      int estimators = 0;
      const double spread = largest_step_spread(csv, estimators);
      worst = std::max(worst, spread);
      if (estimators != 8 || !(spread <= 1e-12)) o.passed = false;
    }
    o.detail = std::to_string(runs.size()) + " runs, largest per-step spread " + format_double(worst);
    return o;
  });

  report(10, "repeated CLI runs give byte-identical CSV", [&] {
    const std::vector<std::string> runs = {
        "operator --samples 200 --repetitions 8 --seed 11",
        "policy-eval --episodes 100 --repetitions 8 --seed 11 --repr tilecode",
        "operator --samples 50 --repetitions 3 --sweep noise",
    };
    for (const auto& args : runs) {
      int s1 = 0;
      int s2 = 0;
      const auto a = run_command(args, s1);
      const auto b = run_command(args, s2);
      if (s1 != 0 || s2 != 0) return Verdict{false, "'" + args + "' failed"};
      if (a != b) return Verdict{false, "'" + args + "' differs between runs"};
    }
    return Verdict{true, std::to_string(runs.size()) + " commands run twice each"};
  });

  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures == 0 ? 0 : 1;
}
