#include "lilsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>

#include "lilsim/martingale.hpp"
#include "lilsim/parallel.hpp"

namespace lilsim {
namespace {

using nlohmann::json;

std::string out_path(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.string("output.dir")) / name).string();
}

void write_json(const RunConfig& c, const std::string& name, const json& j) {
  write_file_atomic(out_path(c, name), j.dump(2) + "\n");
}

TimeGrid build_grid(const RunConfig& c) {
  return TimeGrid::build(make_step_spec(c), static_cast<std::uint64_t>(c.integer("grid.n_steps")));
}

void check_horizons(const RunConfig& c, const TimeGrid& grid) {
  if (c.integer("stats.k_max") > 0) quasi_uniform_index(grid, static_cast<std::uint64_t>(c.integer("stats.k_max")));
  if (c.has("stats.window_end") && c.real("stats.window_end") > grid.horizon()) {
    throw HorizonError("stats.window_end = " + format_double(c.real("stats.window_end")) +
                       " lies beyond the grid horizon t_N = " + format_double(grid.horizon()));
  }
}

EnsembleSummary run(const RunConfig& c, const TimeGrid& grid) {
  check_horizons(c, grid);
  return run_ensemble(make_ensemble_config(c), grid);
}

int finish(const EnsembleSummary& s, std::ostream& out) {
  out << "paths: " << s.records.size() << ", failed: " << s.failures() << "\n";
  return s.failures() > 0 ? exit_runtime : exit_ok;
}

void print_estimates(const EnsembleSummary& s, std::ostream& out) {
  for (const auto& v : s.v_estimates) {
    out << std::left << std::setw(14) << to_string(v.method) << " v2 = " << format_double(v.v2)
        << "  stderr = " << format_double(v.stderr_v2) << "\n";
  }
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const auto grid = build_grid(c);
  const auto s = run(c, grid);
  write_file_atomic(out_path(c, "paths.csv"), paths_csv(s));
  write_json(c, "summary.json", summary_json(s));
  print_estimates(s, out);
  return finish(s, out);
}

int cmd_lil_curve(const RunConfig& c, std::ostream& out) {
  const auto grid = build_grid(c);
  const auto s = run(c, grid);
  write_file_atomic(out_path(c, "lil_curve.csv"), paths_csv(s));
  json j = summary_json(s);
  std::optional<double> v;
  if (s.exact) v = s.exact->v();
  else if (!s.v_estimates.empty()) v = s.v_estimates.back().v();
  if (v) {
    std::uint64_t inside = 0, nondegenerate = 0, ok = 0;
    for (const auto& r : s.records) {
      if (!r.ok) continue;
      const auto hi = c.has("stats.window_start") ? r.window_max : r.checkpoints.back().run_max;
      const auto lo = c.has("stats.window_start") ? r.window_min : r.checkpoints.back().run_min;
      if (!hi || !lo) continue;
      ++ok;
      if (std::max(std::fabs(*hi), std::fabs(*lo)) <= 1.6 * *v) ++inside;
      if (std::max(std::fabs(*hi), std::fabs(*lo)) > 0.3) ++nondegenerate;
    }
    j["envelope"] = {{"v", *v},
                     {"paths", ok},
                     {"within_1_6v", inside},
                     {"abs_max_above_0_3", nondegenerate}};
  }
  write_json(c, "summary.json", j);
  return finish(s, out);
}

int cmd_estimate_v(const RunConfig& c, std::ostream& out) {
  const auto grid = build_grid(c);
  const auto s = run(c, grid);
  write_json(c, "summary.json", summary_json(s));
  print_estimates(s, out);
  return finish(s, out);
}

int cmd_verify(const RunConfig& c, std::ostream& out) {
  const auto context = constraint_context_from_string(c.string("verify.context"));
  ConditionReport report = check_exponent_constraints(make_exponent_params(c), context);
  report.append(check_step_conditions(make_step_inputs(c)));
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"condition", e.name},
                       {"verdict", to_string(e.verdict)},
                       {"witness", e.witness},
                       {"detail", e.detail}});
    out << std::left << std::setw(14) << e.name << std::setw(10) << to_string(e.verdict) << e.witness << "\n";
  }
  json j;
  j["config_fingerprint"] = hex64(config_fingerprint(c));
  j["context"] = to_string(context);
  j["all_pass"] = report.all_pass();
  j["condition_report"] = entries;
  write_json(c, "summary.json", j);
  return report.all_pass() ? exit_ok : exit_validation;
}

int cmd_decompose(const RunConfig& c, std::ostream& out) {
  const auto grid = build_grid(c);
  const Model model = make_model(c);
  const auto* sode = std::get_if<SodeModel>(&model);
  if (!sode) throw ConfigError("decompose needs model.kind = ou or sode");
  const auto e = make_ensemble_config(c);
  if (!e.mu) throw ConfigError("decompose needs f.mu_exact for this test function");
  std::uint64_t k_max = static_cast<std::uint64_t>(c.integer("stats.k_max"));
  if (k_max == 0) k_max = static_cast<std::uint64_t>(std::max(1.0, std::floor(grid.horizon()) - 1.0));
  const auto index = quasi_uniform_index(grid, k_max);
  const bool closed = sode->linear && e.f.name == "identity" && *e.mu == 0.0 && sode->dim == 1;
  std::shared_ptr<const LinearTailTable> tails;
  if (closed) tails = LinearTailTable::build(grid, sode->linear->a);
  NestedMcOptions nested;
  nested.inner_paths = static_cast<std::uint64_t>(c.integer("mc.inner_paths"));
  nested.horizon = index.n_of[k_max];

  struct Row {
    std::uint64_t k;
    double t;
    Decomposition d;
    double z;
  };
  struct PathOut {
    double qv = 0.0;
    std::vector<std::pair<double, double>> lambda;
    std::vector<Row> rows;
  };
  std::vector<PathOut> results(e.paths);
  const std::uint64_t last = index.n_of[k_max];
  std::vector<std::uint64_t> ks;
  for (double k = 1.0; static_cast<std::uint64_t>(k) <= last; k = std::max(k + 1.0, std::floor(k * e.lil.checkpoint_ratio))) {
    ks.push_back(static_cast<std::uint64_t>(k));
  }
  if (ks.empty() || ks.back() != last) ks.push_back(last);

  parallel_for(e.paths, e.workers, [&](std::uint64_t i) {
    const std::uint64_t path = e.first_path_id + i;
    auto ledger = closed ? MartingaleLedger(grid, index, *sode, e.f, *e.mu, tails, e.x0)
                         : MartingaleLedger(grid, index, model, e.scheme, e.f, *e.mu, nested, e.x0, e.seed, path);
    PathObserver* obs[] = {&ledger};
    simulate_path(model, e.scheme, grid, e.x0, NormalStream(e.seed, path), obs, 0, last);
    PathOut& o = results[i];
    o.qv = ledger.qv_average(k_max);
    const double v_hat = closed ? v_exact_linear(sode->linear->a, sode->linear->sigma).v() : std::sqrt(o.qv);
    const auto m_tilde = ledger.tilde_martingale(k_max);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      o.lambda.emplace_back(t, strassen_functional(m_tilde, v_hat, index.tilde_times, k_max, t));
    }
    if (i == 0) {
      for (auto k : ks) o.rows.push_back({k, grid.time(k), ledger.decomposition(k), ledger.martingale_increment(k)});
    }
  });

  std::string csv = "k,t_k,R,Mtilde,Rtilde,Z,reconstruction_residual\n";
  for (const auto& r : results.front().rows) {
    csv += std::to_string(r.k) + ',' + format_double(r.t) + ',' + format_double(r.d.R) + ',' +
           format_double(r.d.M_tilde) + ',' + format_double(r.d.R_tilde) + ',' + format_double(r.z) + ',' +
           format_double(r.d.residual) + '\n';
  }
  write_file_atomic(out_path(c, "decompose.csv"), csv);

  json j;
  j["config_fingerprint"] = hex64(e.fingerprint);
  j["mode"] = closed ? "closed_form_linear" : "nested_mc";
  j["k_max"] = k_max;
  j["csv_path_id"] = e.first_path_id;
  json paths = json::array();
  double qv_sum = 0.0;
  for (std::uint64_t i = 0; i < e.paths; ++i) {
    json lam = json::array();
    for (const auto& [t, v] : results[i].lambda) lam.push_back({{"t", t}, {"value", v}});
    paths.push_back({{"path_id", e.first_path_id + i}, {"qv_average", results[i].qv}, {"lambda_N", lam}});
    qv_sum += results[i].qv;
  }
  j["qv_average_mean"] = qv_sum / static_cast<double>(e.paths);
  j["paths"] = paths;
  write_json(c, "summary.json", j);
  out << "k_max: " << k_max << ", mean qv_average: " << format_double(qv_sum / static_cast<double>(e.paths)) << "\n";
  return exit_ok;
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

RunConfig apply_overrides(RunConfig c, const CliOverrides& flags, const EnvLookup& env) {
  if (auto w = env("LILSIM_WORKERS")) {
    std::int64_t n = 0;
    try {
      std::size_t used = 0;
      n = std::stoll(*w, &used);
      if (used != w->size()) n = 0;
    } catch (const std::exception&) {
      n = 0;
    }
    if (n < 1) throw ConfigError("LILSIM_WORKERS must be a positive integer, got '" + *w + "'");
    c.values["mc.workers"] = n;
  }
  if (auto d = env("LILSIM_OUT_DIR")) {
    if (d->empty()) throw ConfigError("LILSIM_OUT_DIR is empty");
    c.values["output.dir"] = *d;
  }
  if (flags.seed) c.values["seed"] = static_cast<std::int64_t>(*flags.seed);
  if (flags.out_dir) c.values["output.dir"] = *flags.out_dir;
  if (flags.workers) {
    if (*flags.workers < 1) throw ConfigError("--workers must be >= 1");
    c.values["mc.workers"] = static_cast<std::int64_t>(*flags.workers);
  }
  if (flags.fail_fast) c.values["mc.fail_fast"] = true;
  validate_config(c);
  return c;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"simulate", "lil-curve", "estimate-v", "verify", "decompose"};
  return names;
}

int dispatch(const RunConfig& c, const std::string& sub, std::ostream& out) {
  std::filesystem::create_directories(c.string("output.dir"));
  write_file_atomic(out_path(c, "config.ini"), emit_config(c));
  if (sub == "simulate") return cmd_simulate(c, out);
  if (sub == "lil-curve") return cmd_lil_curve(c, out);
  if (sub == "estimate-v") return cmd_estimate_v(c, out);
  if (sub == "verify") return cmd_verify(c, out);
  if (sub == "decompose") return cmd_decompose(c, out);
  throw ConfigError("unknown subcommand '" + sub + "'");
}

int run_cli(const std::string& sub, const std::string& text, const CliOverrides& flags, const EnvLookup& env,
            std::ostream& out, std::ostream& err) {
  try {
    if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end()) {
      throw ConfigError("unknown subcommand '" + sub + "'");
    }
    const RunConfig c = apply_overrides(parse_config(text), flags, env);
    return dispatch(c, sub, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const HorizonError& e) {
    err << "horizon error: " << e.what() << "\n";
    return exit_validation;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return exit_runtime;
  }
}

}  // namespace lilsim
