#include "doctest.h"

#include <cmath>
#include <numbers>

#include "lilsim/errors.hpp"
#include "lilsim/grid.hpp"
#include "lilsim/integrate.hpp"
#include "lilsim/lilstat.hpp"
#include "lilsim/rng.hpp"
#include "oracles.hpp"

using namespace lilsim;

TEST_CASE("time_average_update examples") {
  LilAccumulator acc({.mu = 0.5});
  for (int i = 0; i < 20; ++i) time_average_update(acc, 0.3, 0.5);
  CHECK(acc.sum() == 0.0);
  for (const auto& cp : acc.checkpoints()) CHECK(cp.S == 0.0);

  LilAccumulator b;
  time_average_update(b, 1.0, 2.0);
  time_average_update(b, 0.5, -2.0);
  CHECK(b.sum() == 1.0);
  CHECK(b.time() == 1.5);

  CHECK_THROWS_AS(b.merge(acc), UsageError);
  CHECK_THROWS_AS(b.update(0.1, NAN), NumericError);
  CHECK_THROWS_AS(b.update(0.0, 1.0), DomainError);
}

TEST_CASE("lil_statistic examples") {
  CHECK(lil_statistic(0.0, 10.0) == 0.0);
  const double t = std::exp(std::numbers::e);
  CHECK(lil_statistic(3.0, t) == doctest::Approx(3.0 / std::sqrt(2.0 * t)).epsilon(1e-14));
  CHECK(lil_statistic(3.0, t) == doctest::Approx(0.54492).epsilon(1e-5));
  CHECK_THROWS_AS(lil_statistic(1.0, std::numbers::e), DomainError);
}

TEST_CASE("lil_statistic is positively homogeneous") {
  for (double c : {0.5, 2.0, 17.0}) {
    CHECK(lil_statistic(c * 1.3, 50.0) == doctest::Approx(c * lil_statistic(1.3, 50.0)).epsilon(1e-15));
  }
}

TEST_CASE("accumulator time equals the grid time") {
  const auto g = TimeGrid::build(StepSpec::power(0.75), 50000);
  LilAccumulator acc;
  for (auto c = g.cursor(); !c.done();) {
    c.advance();
    acc.update(c.step(), 0.0);
    REQUIRE(acc.time() == c.time());
  }
}

TEST_CASE("checkpoints are geometric, statistic null below e, extrema bracket the statistic") {
  const auto g = TimeGrid::build(StepSpec::harmonic(), 200000);
  LilAccumulator acc({.window = std::make_pair(3.0, 8.0)});
  NormalStream s(11, 0);
  for (auto c = g.cursor(); !c.done();) {
    c.advance();
    acc.update(c.step(), s.at(c.index()));
  }
  acc.close();
  const auto& log = acc.checkpoints();
  REQUIRE(log.size() > 5);
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].t <= std::numbers::e) {
      CHECK_FALSE(log[i].stat.has_value());
    } else {
      REQUIRE(log[i].stat.has_value());
      CHECK(*log[i].run_max >= *log[i].stat);
      CHECK(*log[i].stat >= *log[i].run_min);
    }
    if (i > 0 && i + 1 < log.size()) CHECK(log[i].t >= 1.2 * log[i - 1].t * (1 - 1e-12) - 1.0);
  }
  CHECK(log.back().t == acc.time());
  REQUIRE(acc.window_max().has_value());
  CHECK(*acc.window_max() <= *acc.running_max());
  CHECK(*acc.window_min() >= *acc.running_min());
}

TEST_CASE("negating f negates S and swaps the extrema") {
  const auto g = TimeGrid::build(StepSpec::harmonic(), 5000);
  LilAccumulator pos, neg;
  NormalStream s(12, 0);
  for (auto c = g.cursor(); !c.done();) {
    c.advance();
    const double f = s.at(c.index());
    pos.update(c.step(), f);
    neg.update(c.step(), -f);
  }
  CHECK(neg.sum() == -pos.sum());
  CHECK(*neg.statistic() == -*pos.statistic());
  CHECK(*neg.running_max() == -*pos.running_min());
  CHECK(*neg.running_min() == -*pos.running_max());
}

TEST_CASE("v_exact_linear examples") {
  CHECK(v_exact_linear(1, 1).v() == 1.0);
  CHECK(v_exact_linear(2, 1).v() == 0.5);
  CHECK(v_exact_linear(0.5, 2).v() == 4.0);
  CHECK(v_exact_linear(1, 1).stderr_v2 == 0.0);
  CHECK_THROWS_AS(v_exact_linear(0, 1), DomainError);
}

TEST_CASE("v_batch_means examples") {
  std::vector<std::pair<double, double>> inc{{1, 1}, {1, -1}, {1, 1}, {1, -1}};
  auto e = v_batch_means(inc, 1.0, 0.0);
  CHECK(e.v2 == doctest::Approx(4.0 / 3.0));
  CHECK(e.count == 4);
  CHECK(e.stderr_v2 == doctest::Approx(std::sqrt(2.0 / 3.0) * 4.0 / 3.0));

  std::vector<std::pair<double, double>> flat(100, {0.1, 0.7});
  CHECK(v_batch_means(flat, 1.0, 0.7).v2 == 0.0);

  std::vector<std::pair<double, double>> one{{1, 1}, {0.5, 1}};
  CHECK_THROWS_AS(v_batch_means(one, 1.0, 0.0), DomainError);
}

TEST_CASE("batch means splits straddling steps in proportion") {
  BatchMeansAccumulator acc(1.0, 0.0);
  acc.add(0.75, 2.0);
  acc.add(0.5, 4.0);   // 0.25 to block 1, 0.25 to block 2
  acc.add(2.0, -1.0);  // 0.75 to block 2, 1 to block 3, 0.25 left over
  REQUIRE(acc.complete_blocks() == 3);
  CHECK(acc.block_sums()[0] == doctest::Approx(2.5));
  CHECK(acc.block_sums()[1] == doctest::Approx(0.25));
  CHECK(acc.block_sums()[2] == doctest::Approx(-1.0));
}

TEST_CASE("batch means is invariant to a constant shift of mu") {
  std::vector<std::pair<double, double>> inc{{1, 4}, {1, 2}, {1, 4}, {1, 2}};
  CHECK(v_batch_means(inc, 1.0, 0.0).v2 == doctest::Approx(4.0 / 3.0));
  CHECK(v_batch_means(inc, 1.0, 3.0).v2 == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("self-centering by the running mean") {
  LilAccumulator acc({.mu = 100.0, .self_center = true});
  acc.update(1.0, 2.0);  // first step uses mu
  acc.update(1.0, 4.0);  // centered by 2
  acc.update(2.0, 1.0);  // centered by 3
  CHECK(acc.sum() == doctest::Approx(-98.0 + 2.0 - 4.0));
}

TEST_CASE("batch means recovers v^2 on synthetic white-noise increments") {
  for (double v : {0.5, 1.0, 2.0}) {
    const auto g = TimeGrid::build(StepSpec::power(0.5), 400000);
    BatchMeansAccumulator acc(std::sqrt(g.horizon()), 0.0);
    NormalStream s(21, static_cast<std::uint64_t>(v * 10));
    for (auto c = g.cursor(); !c.done();) {
      c.advance();
      // f with tau f ~ N(0, tau v^2).
      acc.add(c.step(), v * s.at(c.index()) / std::sqrt(c.step()));
    }
    const auto e = acc.estimate();
    CHECK(std::fabs(e.v2 - v * v) <= 3.0 * e.stderr_v2);
  }
}

TEST_CASE("v_ensemble examples") {
  std::vector<std::pair<double, double>> f{{2, 4}, {-2, 4}};
  CHECK(v_ensemble(f).v2 == 2.0);
  std::vector<std::pair<double, double>> same{{1, 4}, {1, 4}, {1, 4}};
  CHECK(v_ensemble(same).v2 == 0.0);
  std::vector<std::pair<double, double>> mixed{{1, 4}, {1, 5}};
  CHECK_THROWS_AS(v_ensemble(mixed), DomainError);
}

TEST_CASE("normality_check examples") {
  std::vector<double> q(100);
  for (int i = 0; i < 100; ++i) q[i] = oracle::normal_quantile((i + 0.5) / 100.0);
  const auto r = normality_check(q);
  CHECK(r.statistic <= 0.005 + 1e-12);
  CHECK(r.pass);

  std::vector<double> c(60, 1.0);
  CHECK_THROWS_AS(normality_check(c), DomainError);

  std::vector<double> u(1000);
  NormalStream s(5, 5);
  for (int i = 0; i < 1000; ++i) u[i] = 0.5 * (1.0 + std::erf(s.at(i) / std::sqrt(2.0)));
  CHECK_FALSE(normality_check(u).pass);

  std::vector<double> small(10, 0.0);
  CHECK_THROWS_AS(normality_check(small), DomainError);
}

TEST_CASE("normality_check scales by the supplied factor") {
  std::vector<double> z(500);
  NormalStream s(6, 6);
  for (int i = 0; i < 500; ++i) z[i] = 3.0 * s.at(i);
  CHECK(normality_check(z, 3.0).pass);
  CHECK_FALSE(normality_check(z, 1.0).pass);
}

TEST_CASE("kolmogorov survival reference values") {
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0494).epsilon(1e-2));
  CHECK(kolmogorov_survival(1.63) == doctest::Approx(0.0098).epsilon(2e-2));
  CHECK(kolmogorov_survival(0.1) == 1.0);
}

TEST_CASE("exact and batch-means v agree on one long OU path") {
  const auto g = TimeGrid::build(StepSpec::harmonic(), 1000000);
  // t ~ 14.4 is far too short for batch means; use a power grid reaching t ~ 2000.
  const auto gp = TimeGrid::build(StepSpec::power(0.6), 1000000);
  const Model ou = SodeModel::ornstein_uhlenbeck(1.0, 1.0);
  struct Feed : PathObserver {
    BatchMeansAccumulator acc;
    explicit Feed(double L) : acc(L, 0.0) {}
    void on_step(const StepView& v) override { acc.add(v.tau, v.state[0]); }
  } feed(std::sqrt(gp.horizon()));
  PathObserver* obs[] = {&feed};
  simulate_path(ou, SchemeSpec{}, gp, State{0.0}, NormalStream(31, 0), obs);
  const auto e = feed.acc.estimate();
  CHECK(e.v2 == doctest::Approx(v_exact_linear(1, 1).v2).epsilon(0.2));
  CHECK(g.horizon() > 14.0);
}
