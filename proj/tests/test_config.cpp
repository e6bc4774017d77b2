#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "lilsim/cli.hpp"
#include "lilsim/config.hpp"

using namespace lilsim;

namespace {

const char* kMinimal =
    "model.kind=ou\nmodel.a=1\nmodel.sigma=1\ngrid.kind=harmonic\ngrid.n_steps=1000\nmc.paths=1\nseed=42\n";

std::vector<Diagnostic> diagnostics_of(const std::string& text) {
  auto r = try_parse_config(text);
  CHECK_FALSE(r.config.has_value());
  return r.diagnostics;
}

bool mentions(const std::vector<Diagnostic>& d, const std::string& needle) {
  for (const auto& x : d) {
    if (x.format().find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

EnvLookup no_env() {
  return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lilsim_cli_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("parse_config fills documented defaults") {
  const auto c = parse_config(kMinimal);
  CHECK(c.integer("seed") == 42);
  CHECK(c.string("model.kind") == "ou");
  CHECK(c.integer("grid.n_steps") == 1000);
  CHECK(c.real("grid.scale") == 1.0);
  CHECK(c.real("grid.cap") == 1.0);
  CHECK(c.string("scheme.kind") == "bem");
  CHECK(c.real("scheme.newton_tol") == 1e-12);
  CHECK(c.integer("scheme.newton_max_iter") == 50);
  CHECK(c.string("f.kind") == "identity");
  CHECK(c.real("stats.checkpoint_ratio") == 1.2);
  CHECK(c.integer("mc.workers") == 1);
  CHECK(c.string("output.dir") == "out");
  CHECK_FALSE(c.has("f.mu_exact"));

  const auto spde = parse_config("seed=1\nmodel.kind=spde\ngrid.kind=harmonic\ngrid.n_steps=10\nmc.paths=1\n");
  CHECK(spde.string("scheme.kind") == "exp_euler");
}

TEST_CASE("parse_config accepts sections and comments") {
  const auto c = parse_config(
      "# experiment\nseed = 7\n[model]\nkind = ou ; linear\na = 2\n[grid]\nkind = power\ntheta = 0.5\n"
      "n_steps = 10\n\n[mc]\npaths = 3\n");
  CHECK(c.real("model.a") == 2.0);
  CHECK(c.real("grid.theta") == 0.5);
  CHECK(c.integer("mc.paths") == 3);
}

TEST_CASE("parse_config diagnostics") {
  auto d = diagnostics_of(std::string(kMinimal) + "grid.theta=1.5\n");
  REQUIRE(d.size() == 1);
  CHECK(d[0].key == "grid.theta");
  CHECK(d[0].line == 8);
  CHECK(d[0].message.find("(0,1]") != std::string::npos);

  d = diagnostics_of(std::string(kMinimal) + "grid.thetta=0.5\n");
  REQUIRE(d.size() == 1);
  CHECK(d[0].message.find("did you mean 'grid.theta'") != std::string::npos);

  d = diagnostics_of("model.kind=ou\nthis line is wrong\nmodel.c5 = 2\nmodel.sigma=-1\n[gird]\n");
  CHECK(mentions(d, "line 2: syntax error"));
  CHECK(mentions(d, "model.c5 is derived"));
  CHECK(mentions(d, "line 4: model.sigma"));
  CHECK(mentions(d, "unknown section 'gird' (did you mean 'grid'?)"));
  for (const char* key : {"seed", "grid.kind", "grid.n_steps", "mc.paths"}) {
    CHECK(mentions(d, std::string(key) + ": missing required key"));
  }

  d = diagnostics_of(std::string(kMinimal) + "seed=43\n");
  CHECK(mentions(d, "duplicate key (first set on line 7)"));
  d = diagnostics_of(std::string(kMinimal) + "mc.workers=two\n");
  CHECK(mentions(d, "expected an integer"));
  d = diagnostics_of(std::string(kMinimal) + "verify.q=3.9\n");
  CHECK(mentions(d, "p <= r ^ q/4"));
  d = diagnostics_of(std::string(kMinimal) + "f.kind=coordinate\nf.index=2\n");
  CHECK(mentions(d, "f.index"));
  d = diagnostics_of(std::string(kMinimal) + "scheme.kind=exp_euler\n");
  CHECK(d.size() == 1);
  CHECK_THROWS_AS(parse_config("seed=1\n"), ConfigDiagnostics);
}

TEST_CASE("parse_config is total") {
  std::mt19937_64 gen(3);
  const std::string alphabet = "ab.=[]# \n\t;0123456789-e+xyzgridmodelkind";
  for (int i = 0; i < 2000; ++i) {
    std::string text;
    const int len = static_cast<int>(gen() % 120);
    for (int j = 0; j < len; ++j) text += alphabet[gen() % alphabet.size()];
    if (i % 2) text = std::string(kMinimal) + text;
    const auto r = try_parse_config(text);
    CHECK(r.config.has_value() != !r.diagnostics.empty());
  }
}

TEST_CASE("emit_config round trips") {
  for (const std::string extra : {"", "f.mu_exact=0.25\nstats.window_start=5\nstats.window_end=7\n",
                                  "grid.kind=power\ngrid.theta=0.1\nmodel.x0=0.30000000000000004\n"}) {
    std::string text = kMinimal;
    if (extra.find("grid.kind") != std::string::npos) text.replace(text.find("grid.kind=harmonic\n"), 19, "");
    const auto c = parse_config(text + extra);
    const auto again = parse_config(emit_config(c));
    CHECK(again == c);
    CHECK(emit_config(again) == emit_config(c));
  }
}

TEST_CASE("fingerprint ignores scheduling keys only") {
  const auto a = parse_config(kMinimal);
  const auto b = parse_config(std::string(kMinimal) + "mc.workers=4\nmc.first_path_id=9\noutput.dir=x\n");
  const auto c = parse_config(std::string(kMinimal) + "model.x0=1\n");
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(config_fingerprint(a) != config_fingerprint(c));
}

TEST_CASE("suggest_key and levenshtein") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(suggest_key("mc.path") == "mc.paths");
  CHECK_FALSE(suggest_key("completely.unrelated.key").has_value());
}

TEST_CASE("override precedence: flags over environment over file") {
  const auto file = parse_config(std::string(kMinimal) + "mc.workers=2\noutput.dir=from_file\n");
  auto env = [](const std::string& k) -> std::optional<std::string> {
    if (k == "LILSIM_WORKERS") return "3";
    if (k == "LILSIM_OUT_DIR") return "from_env";
    return std::nullopt;
  };
  auto c = apply_overrides(file, {}, no_env());
  CHECK(c.integer("mc.workers") == 2);
  c = apply_overrides(file, {}, env);
  CHECK(c.integer("mc.workers") == 3);
  CHECK(c.string("output.dir") == "from_env");
  CliOverrides flags;
  flags.workers = 5;
  flags.out_dir = "from_flag";
  flags.seed = 9;
  flags.fail_fast = true;
  c = apply_overrides(file, flags, env);
  CHECK(c.integer("mc.workers") == 5);
  CHECK(c.string("output.dir") == "from_flag");
  CHECK(c.integer("seed") == 9);
  CHECK(c.boolean("mc.fail_fast"));
  auto bad = [](const std::string& k) -> std::optional<std::string> {
    if (k == "LILSIM_WORKERS") return "zero";
    return std::nullopt;
  };
  CHECK_THROWS_AS(apply_overrides(file, {}, bad), ConfigError);
}

TEST_CASE("verify on the example parameters passes") {
  const auto dir = scratch("verify");
  std::ostringstream out, err;
  const std::string text = std::string(kMinimal) + "verify.horizon=100000\n";
  CliOverrides flags;
  flags.out_dir = dir.string();
  CHECK(run_cli("verify", text, flags, no_env(), out, err) == exit_ok);
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["all_pass"] == true);
  CHECK(j["condition_report"].size() == 12);
  for (const auto& e : j["condition_report"]) {
    CHECK(e.contains("condition"));
    CHECK(e["verdict"] == "pass");
    CHECK(e.contains("witness"));
    CHECK(e.contains("detail"));
  }
  CHECK(out.str().find("step_ii") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "config.ini"));

  const std::string failing = std::string(kMinimal) + "verify.horizon=1000\ngrid.kind=power\ngrid.theta=0.5\n";
  std::string f = failing;
  f.replace(f.find("grid.kind=harmonic\n"), 19, "");
  CHECK(run_cli("verify", f, flags, no_env(), out, err) == exit_validation);
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulate with an unreachable horizon exits 1") {
  const auto dir = scratch("horizon");
  std::ostringstream out, err;
  CliOverrides flags;
  flags.out_dir = dir.string();
  CHECK(run_cli("simulate", std::string(kMinimal) + "stats.k_max=50\n", flags, no_env(), out, err) == exit_validation);
  CHECK(err.str().find("k = 8") != std::string::npos);
  CHECK(run_cli("simulate", "seed=1\n", flags, no_env(), out, err) == exit_validation);
  CHECK(run_cli("nonsense", kMinimal, flags, no_env(), out, err) == exit_validation);
  std::filesystem::remove_all(dir);
}

TEST_CASE("estimate-v writes exact and batch-means entries") {
  const auto dir = scratch("estimate");
  std::ostringstream out, err;
  CliOverrides flags;
  flags.out_dir = dir.string();
  CHECK(run_cli("estimate-v", kMinimal, flags, no_env(), out, err) == exit_ok);
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  std::set<std::string> methods;
  for (const auto& v : j["v_estimates"]) methods.insert(v["method"].get<std::string>());
  CHECK(methods.count("exact_linear"));
  CHECK(methods.count("batch_means"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("injected failures exit 2 and outputs are worker independent") {
  const auto dir = scratch("determinism");
  std::ostringstream out, err;
  const std::string text = std::string(kMinimal).replace(std::string(kMinimal).find("mc.paths=1"), 10, "mc.paths=12");
  for (const std::string sub : {"simulate", "lil-curve", "estimate-v", "decompose"}) {
    CliOverrides one, four;
    one.out_dir = (dir / (sub + "1")).string();
    four.out_dir = (dir / (sub + "4")).string();
    one.workers = 1;
    four.workers = 4;
    REQUIRE(run_cli(sub, text, one, no_env(), out, err) == exit_ok);
    REQUIRE(run_cli(sub, text, four, no_env(), out, err) == exit_ok);
    for (const auto& entry : std::filesystem::directory_iterator(one.out_dir.value())) {
      const auto name = entry.path().filename();
      if (name == "config.ini") continue;
      CAPTURE(sub);
      CAPTURE(name.string());
      CHECK(slurp(entry.path()) == slurp(std::filesystem::path(*four.out_dir) / name));
    }
  }
  CliOverrides flags;
  flags.out_dir = (dir / "fail").string();
  CHECK(run_cli("simulate", text + "mc.inject_failure_path=3\n", flags, no_env(), out, err) == exit_runtime);
  const auto j = nlohmann::json::parse(slurp(dir / "fail" / "summary.json"));
  CHECK(j["failed_paths"] == 1);
  flags.fail_fast = true;
  CHECK(run_cli("simulate", text + "mc.inject_failure_path=3\n", flags, no_env(), out, err) == exit_runtime);
  std::filesystem::remove_all(dir);
}

TEST_CASE("decompose writes the residual table") {
  const auto dir = scratch("decompose");
  std::ostringstream out, err;
  CliOverrides flags;
  flags.out_dir = dir.string();
  REQUIRE(run_cli("decompose", kMinimal, flags, no_env(), out, err) == exit_ok);
  const auto csv = slurp(dir / "decompose.csv");
  CHECK(csv.rfind("k,t_k,R,Mtilde,Rtilde,Z,reconstruction_residual\n", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["mode"] == "closed_form_linear");
  CHECK(j["paths"][0]["lambda_N"].size() == 5);
  CHECK(j["paths"][0]["lambda_N"][0]["value"] == 0.0);
  std::filesystem::remove_all(dir);
}
