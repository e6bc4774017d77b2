#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lilsim/errors.hpp"
#include "lilsim/mc.hpp"

using namespace lilsim;

namespace {

EnsembleConfig ou_config(std::uint64_t paths) {
  EnsembleConfig c;
  c.model = SodeModel::ornstein_uhlenbeck(1.0, 1.0);
  c.x0 = State{0.0};
  c.mu = 0.0;
  c.paths = paths;
  c.seed = 42;
  c.fingerprint = 0xabc;
  return c;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("run_ensemble produces one record per path") {
  const auto grid = TimeGrid::build(StepSpec::harmonic(), 2000);
  const auto s = run_ensemble(ou_config(2), grid);
  REQUIRE(s.records.size() == 2);
  CHECK(s.records[0].path_id == 0);
  CHECK(s.records[1].path_id == 1);
  CHECK(s.failures() == 0);
  CHECK(s.records[0].final_T == grid.horizon());
  CHECK_FALSE(s.records[0].checkpoints.empty());
  CHECK(s.records[0].checkpoints.back().t == grid.horizon());
  CHECK(s.v_estimates.front().method == VMethod::exact_linear);
}

TEST_CASE("run_ensemble is independent of the worker count") {
  const auto grid = TimeGrid::build(StepSpec::harmonic(), 3000);
  auto c = ou_config(24);
  const auto one = run_ensemble(c, grid);
  c.workers = 8;
  const auto eight = run_ensemble(c, grid);
  CHECK(summary_hash(one) == summary_hash(eight));
  CHECK(paths_csv(one) == paths_csv(eight));
  CHECK(one.records == eight.records);
}

TEST_CASE("run_ensemble records injected failures and continues") {
  const auto grid = TimeGrid::build(StepSpec::harmonic(), 500);
  auto c = ou_config(2);
  c.first_path_id = 2;
  c.inject_failure_path = 3;
  const auto s = run_ensemble(c, grid);
  REQUIRE(s.records.size() == 2);
  CHECK(s.records[0].ok);
  CHECK_FALSE(s.records[1].ok);
  CHECK(s.records[1].path_id == 3);
  CHECK(s.records[1].error.find("injected") != std::string::npos);
  CHECK(s.failures() == 1);
  CHECK(summary_json(s)["errors"].size() == 1);

  c.fail_fast = true;
  CHECK_THROWS_AS(run_ensemble(c, grid), StepError);
}

TEST_CASE("merge_summaries") {
  const auto grid = TimeGrid::build(StepSpec::harmonic(), 1000);
  auto c = ou_config(6);
  const auto whole = run_ensemble(c, grid);
  c.paths = 4;
  const auto a = run_ensemble(c, grid);
  c.first_path_id = 4;
  c.paths = 2;
  const auto b = run_ensemble(c, grid);

  const auto ab = merge_summaries(a, b);
  const auto ba = merge_summaries(b, a);
  CHECK(ab.records == ba.records);
  CHECK(ab.records == whole.records);
  CHECK(ab.v_estimates == whole.v_estimates);
  CHECK(summary_hash(ab) == summary_hash(whole));

  const EnsembleSummary empty;
  CHECK(merge_summaries(a, empty).records == a.records);
  CHECK(merge_summaries(empty, a).records == a.records);
  CHECK_THROWS_AS(merge_summaries(a, a), UsageError);
  auto other = b;
  other.fingerprint = 0xdef;
  CHECK_THROWS_AS(merge_summaries(a, other), UsageError);

  c.first_path_id = 10;
  c.paths = 3;
  const auto d = run_ensemble(c, grid);
  CHECK(merge_summaries(merge_summaries(a, b), d).records == merge_summaries(a, merge_summaries(b, d)).records);
}

TEST_CASE("records hold checkpoints, not steps") {
  const auto grid = TimeGrid::build(StepSpec::power(0.75), 200000);
  const auto s = run_ensemble(ou_config(1), grid);
  CHECK(s.records[0].checkpoints.size() < 100);
  CHECK(s.records[0].block_sums.size() < 100);
}

TEST_CASE("ensemble v estimates on the OU model") {
  const auto grid = TimeGrid::build(StepSpec::power(0.5), 20000);  // t ~ 282
  auto c = ou_config(64);
  const auto s = run_ensemble(c, grid);
  REQUIRE(s.v_estimates.size() == 3);
  CHECK(s.v_estimates[0].v2 == 1.0);
  CHECK(s.v_estimates[1].method == VMethod::batch_means);
  CHECK(std::abs(s.v_estimates[1].v2 - 1.0) < 4 * s.v_estimates[1].stderr_v2 + 0.05);
  CHECK(s.v_estimates[2].method == VMethod::ensemble);
  CHECK(std::abs(s.v_estimates[2].v2 - 1.0) < 4 * s.v_estimates[2].stderr_v2 + 0.05);
}

TEST_CASE("output formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_optional(std::nullopt).empty());
  CHECK(hex64(255) == "00000000000000ff");

  const auto dir = std::filesystem::temp_directory_path() / "lilsim_mc_test";
  std::filesystem::remove_all(dir);
  const auto file = (dir / "x.txt").string();
  write_file_atomic(file, "a\nb\n");
  std::ifstream is(file, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  CHECK(ss.str() == "a\nb\n");
  CHECK_FALSE(std::filesystem::exists(file + ".tmp"));
  std::filesystem::remove_all(dir);
}
