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

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cis/experiment.hpp"

namespace cis {

enum class Subcommand { operator_estimation, policy_evaluation, verify, exact_dump };

/// Bad flags, values or config files. Exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliInvocation {
  Subcommand subcommand = Subcommand::verify;
  std::optional<std::string> config_path;
  std::optional<std::string> out_path;
  std::optional<std::string> save_config_path;
  /// Defaults for the subcommand, then the config file, then flags.
  ExperimentConfig config;
  std::optional<SweepAxis> sweep;
  // exact-dump only.
  std::optional<std::string> mdp_path;
  StateAction start{3, 1};
  /// Set when --help was given; `help_text` holds the usage.
  bool help = false;
  std::string help_text;
};

/// `args` excludes the program name. Throws UsageError.
CliInvocation parse_invocation(const std::vector<std::string>& args);

/// Exit status: 0 success, 1 verification or run failure, 2 config error.
int execute(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

/// parse_invocation + execute with errors mapped to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cis
