#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lilsim/grid.hpp"
#include "lilsim/integrate.hpp"
#include "lilsim/lilstat.hpp"
#include "lilsim/model.hpp"

namespace lilsim {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Everything an ensemble run needs besides the grid.
struct EnsembleConfig {
  Model model;
  SchemeSpec scheme;
  State x0;
  TestFunction f = TestFunction::identity();
  std::optional<double> mu;   // mu(f); the LIL statistic self-centers when absent
  LilOptions lil;             // mu and self_center are filled from `mu`
  double batch_length = 0.0;  // <= 0 selects sqrt(T)
  std::uint64_t paths = 1;
  std::uint64_t first_path_id = 0;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  bool fail_fast = false;
  std::optional<std::uint64_t> inject_failure_path;
  std::uint64_t fingerprint = 0;
};

struct PathRecord {
  std::uint64_t path_id = 0;
  bool ok = true;
  std::string error;
  std::vector<LilCheckpoint> checkpoints;
  double final_S = 0.0;  // sum tau (f - mu), mu = 0 when unknown
  double final_T = 0.0;
  std::optional<double> window_max, window_min;
  std::vector<double> block_sums;
  double runtime_seconds = 0.0;  // not part of outputs or hashes

  /// Equality ignores the runtime.
  friend bool operator==(const PathRecord& a, const PathRecord& b);
};

struct EnsembleSummary {
  std::uint64_t fingerprint = 0;
  double batch_length = 0.0;
  std::optional<VEstimate> exact;  // closed-form v when available
  std::vector<PathRecord> records; // sorted by path id
  std::vector<VEstimate> v_estimates;

  bool empty() const noexcept { return records.empty(); }
  std::uint64_t failures() const noexcept;
};

/// Simulates all paths on up to `workers` threads. The summary is a pure
/// function of the config and the grid. A failing path is recorded and the
/// run continues unless fail_fast is set, in which case the error propagates.
EnsembleSummary run_ensemble(const EnsembleConfig& config, const TimeGrid& grid);

/// Recomputes the v estimates from the records.
void recompute_aggregates(EnsembleSummary& summary);

/// Union of disjoint path sets with equal fingerprints.
EnsembleSummary merge_summaries(const EnsembleSummary& a, const EnsembleSummary& b);

/// IEEE doubles with 17 significant digits; "" for a missing value.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

/// paths.csv: path_id,t,S,lil_stat,run_max,run_min (successful paths only).
std::string paths_csv(const EnsembleSummary& summary);

nlohmann::json v_estimate_json(const VEstimate& v);
nlohmann::json summary_json(const EnsembleSummary& summary);

/// Hash of the serialized outputs.
std::uint64_t summary_hash(const EnsembleSummary& summary);

std::string hex64(std::uint64_t v);

/// Writes via a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace lilsim
