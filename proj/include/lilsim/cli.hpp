#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lilsim/config.hpp"

namespace lilsim {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

/// Values given on the command line; they take precedence over the
/// environment (LILSIM_WORKERS, LILSIM_OUT_DIR), which beats the file.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> workers;
  bool fail_fast = false;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

RunConfig apply_overrides(RunConfig config, const CliOverrides& flags, const EnvLookup& env);

const std::vector<std::string>& subcommands();

/// Runs one subcommand on a validated config and writes its artifacts into
/// output.dir. Returns the exit status; errors propagate.
int dispatch(const RunConfig& config, const std::string& subcommand, std::ostream& out);

/// Full front end: parse the file text, apply overrides, dispatch, map
/// errors to exit codes (1 validation or horizon, 2 runtime).
int run_cli(const std::string& subcommand, const std::string& config_text, const CliOverrides& flags,
            const EnvLookup& env, std::ostream& out, std::ostream& err);

}  // namespace lilsim
