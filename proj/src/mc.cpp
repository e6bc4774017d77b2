#include "lilsim/mc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "lilsim/errors.hpp"
#include "lilsim/numeric.hpp"
#include "lilsim/parallel.hpp"

namespace lilsim {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

bool operator==(const PathRecord& a, const PathRecord& b) {
  return a.path_id == b.path_id && a.ok == b.ok && a.error == b.error && a.checkpoints == b.checkpoints &&
         a.final_S == b.final_S && a.final_T == b.final_T && a.window_max == b.window_max &&
         a.window_min == b.window_min && a.block_sums == b.block_sums;
}

std::uint64_t EnsembleSummary::failures() const noexcept {
  return static_cast<std::uint64_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
}

namespace {

class PathAccumulator : public PathObserver {
 public:
  PathAccumulator(const TestFunction& f, double mu, LilOptions lil, double batch_length,
                  std::optional<std::uint64_t> fail_at)
      : f_(f), mu_(mu), lil_(std::move(lil)), batch_(batch_length, mu), fail_at_(fail_at) {}

  void on_step(const StepView& v) override {
    if (fail_at_ && v.n == *fail_at_) throw StepError("injected step failure at step " + std::to_string(v.n), v.n, 0.0);
    const double fv = f_(v.state);
    lil_.update(v.tau, fv);
    batch_.add(v.tau, fv);
    S_.add(v.tau * (fv - mu_));
  }

  LilAccumulator& lil() { return lil_; }
  const BatchMeansAccumulator& batch() const { return batch_; }
  double S() const { return S_.value(); }

 private:
  const TestFunction& f_;
  double mu_;
  LilAccumulator lil_;
  BatchMeansAccumulator batch_;
  CompensatedSum S_;
  std::optional<std::uint64_t> fail_at_;
};

std::optional<VEstimate> closed_form_v(const EnsembleConfig& c) {
  if (const auto* m = std::get_if<SodeModel>(&c.model)) {
    if (m->linear && c.f.name == "identity") return v_exact_linear(m->linear->a, m->linear->sigma);
  }
  return std::nullopt;
}

}  // namespace

EnsembleSummary run_ensemble(const EnsembleConfig& config, const TimeGrid& grid) {
  if (config.paths == 0) throw ConfigError("mc.paths must be >= 1");
  check_compatible(config.model, config.scheme);
  const double L = config.batch_length > 0.0 ? config.batch_length : std::sqrt(grid.horizon());
  LilOptions lil = config.lil;
  lil.mu = config.mu.value_or(0.0);
  lil.self_center = !config.mu.has_value();
  const double mu = config.mu.value_or(0.0);

  EnsembleSummary out;
  out.fingerprint = config.fingerprint;
  out.batch_length = L;
  out.exact = closed_form_v(config);
  out.records.resize(config.paths);

  parallel_for(config.paths, config.workers, [&](std::uint64_t i) {
    const auto begin = std::chrono::steady_clock::now();
    PathRecord& rec = out.records[i];
    rec.path_id = config.first_path_id + i;
    std::optional<std::uint64_t> fail_at;
    if (config.inject_failure_path && *config.inject_failure_path == rec.path_id) {
      fail_at = std::max<std::uint64_t>(1, grid.n_max() / 2);
    }
    PathAccumulator acc(config.f, mu, lil, L, fail_at);
    PathObserver* obs[] = {&acc};
    try {
      simulate_path(config.model, config.scheme, grid, config.x0, NormalStream(config.seed, rec.path_id), obs);
      acc.lil().close();
      rec.checkpoints = acc.lil().checkpoints();
      rec.final_S = acc.S();
      rec.final_T = acc.lil().time();
      rec.window_max = acc.lil().window_max();
      rec.window_min = acc.lil().window_min();
      rec.block_sums = acc.batch().block_sums();
    } catch (const Error& e) {
      if (config.fail_fast) throw;
      rec = PathRecord{};
      rec.path_id = config.first_path_id + i;
      rec.ok = false;
      rec.error = e.what();
    }
    rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  });
  recompute_aggregates(out);
  return out;
}

void recompute_aggregates(EnsembleSummary& s) {
  s.v_estimates.clear();
  if (s.exact) s.v_estimates.push_back(*s.exact);
  std::vector<double> blocks;
  std::vector<std::pair<double, double>> finals;
  for (const auto& r : s.records) {
    if (!r.ok) continue;
    blocks.insert(blocks.end(), r.block_sums.begin(), r.block_sums.end());
    finals.emplace_back(r.final_S, r.final_T);
  }
  if (blocks.size() >= 2) {
    CompensatedSum sum;
    for (double b : blocks) sum.add(b);
    const auto n = static_cast<double>(blocks.size());
    const double mean = sum.value() / n;
    CompensatedSum ss;
    for (double b : blocks) ss.add((b - mean) * (b - mean));
    VEstimate v;
    v.method = VMethod::batch_means;
    v.v2 = ss.value() / (n - 1.0) / s.batch_length;
    v.stderr_v2 = std::sqrt(2.0 / (n - 1.0)) * v.v2;
    v.count = blocks.size();
    s.v_estimates.push_back(v);
  }
  if (finals.size() >= 2) s.v_estimates.push_back(v_ensemble(finals));
}

EnsembleSummary merge_summaries(const EnsembleSummary& a, const EnsembleSummary& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.fingerprint != b.fingerprint) {
    throw UsageError("cannot merge summaries with config fingerprints " + hex64(a.fingerprint) + " and " +
                     hex64(b.fingerprint));
  }
  std::set<std::uint64_t> ids;
  for (const auto& r : a.records) ids.insert(r.path_id);
  for (const auto& r : b.records) {
    if (ids.count(r.path_id)) throw UsageError("cannot merge summaries: path id " + std::to_string(r.path_id) + " appears in both");
  }
  EnsembleSummary out = a;
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  std::sort(out.records.begin(), out.records.end(), [](const auto& x, const auto& y) { return x.path_id < y.path_id; });
  recompute_aggregates(out);
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string paths_csv(const EnsembleSummary& s) {
  std::string out = "path_id,t,S,lil_stat,run_max,run_min\n";
  for (const auto& r : s.records) {
    if (!r.ok) continue;
    const std::string id = std::to_string(r.path_id);
    for (const auto& c : r.checkpoints) {
      out += id + ',' + format_double(c.t) + ',' + format_double(c.S) + ',' + format_optional(c.stat) + ',' +
             format_optional(c.run_max) + ',' + format_optional(c.run_min) + '\n';
    }
  }
  return out;
}

nlohmann::json v_estimate_json(const VEstimate& v) {
  nlohmann::json j;
  j["method"] = to_string(v.method);
  j["v2"] = v.v2;
  j["v"] = v.v();
  j["stderr"] = v.stderr_v2;
  if (v.method == VMethod::batch_means) j["n_blocks"] = v.count;
  if (v.method == VMethod::ensemble) j["n_paths"] = v.count;
  return j;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json summary_json(const EnsembleSummary& s) {
  nlohmann::json j;
  j["config_fingerprint"] = hex64(s.fingerprint);
  j["paths"] = s.records.size();
  j["failed_paths"] = s.failures();
  j["batch_length"] = s.batch_length;
  j["v_estimates"] = nlohmann::json::array();
  for (const auto& v : s.v_estimates) j["v_estimates"].push_back(v_estimate_json(v));
  j["errors"] = nlohmann::json::array();
  for (const auto& r : s.records) {
    if (!r.ok) j["errors"].push_back({{"path_id", r.path_id}, {"message", r.error}});
  }
  return j;
}

std::uint64_t summary_hash(const EnsembleSummary& s) { return fnv1a64(paths_csv(s) + summary_json(s).dump()); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << contents;
    os.flush();
    if (!os) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace lilsim
