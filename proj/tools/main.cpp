#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lilsim/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lilsim: decreasing-step simulation of ergodic SDEs and LIL diagnostics"};
  app.require_subcommand(1, 1);

  std::string config_path;
  lilsim::CliOverrides flags;
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned workers = 0;

  for (const auto& name : lilsim::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "configuration file (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the file)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--fail-fast", flags.fail_fast, "stop at the first failing path");
  }
  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) flags.seed = seed;
  if (sub->count("--out")) flags.out_dir = out_dir;
  if (sub->count("--workers")) flags.workers = workers;

  std::ifstream is(config_path, std::ios::binary);
  if (!is) {
    std::cerr << "error: cannot read " << config_path << "\n";
    return lilsim::exit_validation;
  }
  std::stringstream text;
  text << is.rdbuf();
  return lilsim::run_cli(sub->get_name(), text.str(), flags, lilsim::process_env, std::cout, std::cerr);
}
