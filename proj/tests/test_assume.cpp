#include "doctest.h"

#include <cmath>
#include <random>

#include "lilsim/assume.hpp"
#include "lilsim/errors.hpp"

using namespace lilsim;

namespace {

ExponentParams sode_example() {
  ExponentParams x;
  x.r = x.q = 100;
  x.r_tilde = x.q_tilde = 1;
  x.beta = x.kappa = 0;
  x.l_tilde = 0.5;
  x.gamma = x.gamma1 = 1;
  x.p = 1;
  x.l = 3;
  return x;
}

const ConditionEntry& first_failure(const ConditionReport& r) {
  for (const auto& e : r.entries) {
    if (e.verdict == Verdict::fail) return e;
  }
  FAIL("no failing entry");
  return r.entries.front();
}

}  // namespace

TEST_CASE("check_exponent_constraints examples") {
  ExponentParams x;
  x.p = 2;
  x.r = 8;
  x.r_tilde = 1;
  x.beta = 0;
  x.gamma1 = 1;
  auto rep = check_exponent_constraints(x, ConstraintContext::prop2_2);
  CHECK(rep.all_pass());
  CHECK(rep.at("moment_r").value == 8.0);
  CHECK(rep.at("moment_r2").value == 8.0);

  x.r = 7;
  rep = check_exponent_constraints(x, ConstraintContext::prop2_2);
  CHECK_FALSE(rep.all_pass());
  CHECK(first_failure(rep).name == "moment_r");
  CHECK(first_failure(rep).value == 8.0);

  for (auto c : {ConstraintContext::thm3_1, ConstraintContext::prop4_3, ConstraintContext::prop4_4}) {
    const auto r = check_exponent_constraints(sode_example(), c);
    CHECK(r.all_pass());
  }
}

TEST_CASE("check_exponent_constraints rejects out-of-range parameters") {
  ExponentParams x = sode_example();
  x.gamma1 = 1.5;
  CHECK_THROWS_AS(check_exponent_constraints(x, ConstraintContext::thm3_1), ConfigError);
  x = sode_example();
  x.p = 0.5;
  CHECK_THROWS_WITH_AS(check_exponent_constraints(x, ConstraintContext::thm3_1), doctest::Contains("p >= 1"),
                       ConfigError);
  CHECK_THROWS_AS(constraint_context_from_string("thm9"), ConfigError);
  CHECK(constraint_context_from_string("prop4_4") == ConstraintContext::prop4_4);
}

TEST_CASE("full context list contains the q/4 bound and the p~_F inequalities") {
  ExponentParams x = sode_example();
  x.q = 3.9;  // p = 1 > q/4
  const auto rep = check_exponent_constraints(x, ConstraintContext::thm3_1);
  CHECK(rep.at("p_range").verdict == Verdict::fail);
  CHECK(rep.at("p_tilde_F").value == doctest::Approx(2.0));
  CHECK(rep.at("moment_q_F").value == doctest::Approx(2 * 2.0 + 4.0));
  CHECK(rep.at("p_range").witness.find("r ^ q/4") != std::string::npos);
}

TEST_CASE("check_exponent_constraints is pure and monotone in r and q") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 400; ++trial) {
    ExponentParams x;
    x.r = 2 + 30 * u(gen);
    x.q = 2 + 30 * u(gen);
    x.r_tilde = 1 + 2 * u(gen);
    x.q_tilde = 1 + 2 * u(gen);
    x.beta = (x.r - 1) * u(gen) * 0.2;
    x.kappa = (x.q - 1) * u(gen) * 0.2;
    x.gamma1 = 0.05 + 0.95 * u(gen);
    x.gamma = x.gamma1 + (1 - x.gamma1) * u(gen);
    x.l = x.r * u(gen) * 0.3;
    x.l_tilde = 0.05 + 0.95 * u(gen);
    x.alpha = 2 * u(gen);
    x.p = 1 + 3 * u(gen);
    for (auto c : {ConstraintContext::prop2_2, ConstraintContext::thm3_1, ConstraintContext::prop4_3,
                   ConstraintContext::prop4_4}) {
      const auto base = check_exponent_constraints(x, c);
      CHECK(base == check_exponent_constraints(x, c));
      ExponentParams y = x;
      y.r += 10 * u(gen);
      y.q += 10 * u(gen);
      const auto relaxed = check_exponent_constraints(y, c);
      REQUIRE(relaxed.entries.size() == base.entries.size());
      for (std::size_t i = 0; i < base.entries.size(); ++i) {
        if (base.entries[i].verdict == Verdict::pass) CHECK(relaxed.entries[i].verdict == Verdict::pass);
      }
    }
  }
}

TEST_CASE("largest_feasible_gamma") {
  CHECK(largest_feasible_gamma(sode_example(), ConstraintContext::thm3_1) == 1.0);
  ExponentParams x = sode_example();
  x.gamma1 = 0.1;
  x.gamma = 0.1;
  x.q = 20;  // 4 p q~ + 8 gamma <= 20 needs gamma <= 2, 2 p~_F + 4 gamma <= 20 with p~_F = 1 + gamma
  x.r = 4;   // 1/2 + max(1/2 + gamma, 1/2 + 3 gamma) <= 4 needs gamma <= 1
  CHECK(largest_feasible_gamma(x, ConstraintContext::thm3_1) == doctest::Approx(1.0));
  x.l = 2;
  x.r = 2.5;  // 1 + 2 gamma <= 2.5
  CHECK(largest_feasible_gamma(x, ConstraintContext::thm3_1) == doctest::Approx(0.75));
  x.r = 1.2 + 1.0;
  x.gamma1 = 0.9;
  x.gamma = 0.9;
  CHECK_FALSE(largest_feasible_gamma(x, ConstraintContext::thm3_1).has_value());
}

TEST_CASE("check_step_conditions examples") {
  StepConditionInputs in;
  in.spec = StepSpec::harmonic();
  in.gamma = 1;
  in.alpha = 1;
  in.l_tilde = 0.5;
  in.rho = in.rho_tau = RhoLaw::exponential(1.0);
  in.horizon = 100000;
  auto rep = check_step_conditions(in);
  CHECK(rep.all_pass());
  CHECK(rep.at("step_ii").value <= 2.0 + 1e-6);
  CHECK(rep.at("step_iii").value <= 2.0 + 1e-6);

  in.spec = StepSpec::power(0.5);
  rep = check_step_conditions(in);
  CHECK(rep.at("step_i").verdict == Verdict::fail);

  in.spec = StepSpec::power(0.75);
  rep = check_step_conditions(in);
  CHECK(rep.at("step_i").verdict == Verdict::pass);
  CHECK(rep.at("step_iv").verdict == Verdict::pass);
  CHECK(rep.at("step_iv").witness.find("1.125") != std::string::npos);

  in.spec = StepSpec::constant(0.1);
  rep = check_step_conditions(in);
  CHECK(rep.at("step_i").verdict == Verdict::fail);
  CHECK(rep.at("step_iv").verdict == Verdict::fail);
}

TEST_CASE("check_step_conditions refuses to pass on a horizon below the uncapped index") {
  StepConditionInputs in;
  in.spec = StepSpec::harmonic(1000.0, 0.5);  // cap binds until k = 2000
  in.horizon = 500;
  const auto rep = check_step_conditions(in);
  CHECK(rep.at("step_i").verdict == Verdict::undecided);
  CHECK(rep.at("step_iv").verdict == Verdict::undecided);
  in.horizon = 4000;
  CHECK(check_step_conditions(in).at("step_i").verdict == Verdict::pass);
}

TEST_CASE("check_step_conditions with power-law and custom kernels") {
  StepConditionInputs in;
  in.horizon = 20000;
  in.rho = RhoLaw::power(2.0);
  in.gamma = 1.0;
  auto rep = check_step_conditions(in);
  CHECK(rep.at("step_ii").verdict == Verdict::pass);
  CHECK(rep.at("step_ii").value == doctest::Approx(2.0));
  CHECK(rep.at("rho_summable").verdict == Verdict::pass);
  in.rho = RhoLaw::power(0.8);
  rep = check_step_conditions(in);
  CHECK(rep.at("step_ii").verdict == Verdict::fail);
  CHECK(rep.at("rho_summable").verdict == Verdict::fail);
  in.rho = RhoLaw{RhoLaw::Kind::custom, 0.0, [](double t) { return 1.0 / (1.0 + t * t); }};
  rep = check_step_conditions(in);
  CHECK(rep.at("step_ii").verdict == Verdict::undecided);
  CHECK(rep.at("rho_summable").verdict == Verdict::undecided);
  CHECK_THROWS_AS(check_step_conditions(StepConditionInputs{.rho = RhoLaw::exponential(-1.0)}), ConfigError);
}

TEST_CASE("step condition (i) verdicts agree with brute-force partial sums") {
  // Growth of the partial sum between decades: ratio < 1 for a convergent tail, >= 1 otherwise.
  const std::uint64_t H = 1000000;
  struct Case {
    StepSpec spec;
    double alpha;
  };
  const Case cases[] = {{StepSpec::harmonic(), 0.0},    {StepSpec::harmonic(), 0.5},   {StepSpec::power(0.5), 0.5},
                        {StepSpec::power(0.5), 1.5},    {StepSpec::power(0.6), 0.5},   {StepSpec::power(0.75), 0.0},
                        {StepSpec::power(0.75), 1.0},   {StepSpec::power(0.9), 0.5},   {StepSpec::constant(0.5), 1.0},
                        {StepSpec::harmonic(3.0, 1.0), 0.0}, {StepSpec::power(0.4, 2.0, 1.0), 2.0}};
  for (const auto& c : cases) {
    const double e = 1.0 + c.alpha;
    double s[3] = {0, 0, 0};
    double acc = 0.0;
    for (std::uint64_t k = 1; k <= H; ++k) {
      acc += std::pow(c.spec.step(k), e);
      if (k == H / 100) s[0] = acc;
      if (k == H / 10) s[1] = acc;
      if (k == H) s[2] = acc;
    }
    const bool brute_converges = (s[2] - s[1]) < 0.9 * (s[1] - s[0]);
    StepConditionInputs in;
    in.spec = c.spec;
    in.gamma = 1.0;
    in.alpha = c.alpha;
    in.horizon = 10000;
    const auto v = check_step_conditions(in).at("step_i").verdict;
    CAPTURE(c.spec.decay_exponent());
    CAPTURE(c.alpha);
    CHECK(v == (brute_converges ? Verdict::pass : Verdict::fail));
  }
}

TEST_CASE("step condition (ii) bound dominates the numeric supremum on every built-in grid") {
  for (const auto& spec : {StepSpec::harmonic(), StepSpec::power(0.5), StepSpec::constant(0.3)}) {
    StepConditionInputs in;
    in.spec = spec;
    in.horizon = 50000;
    in.rho = RhoLaw::exponential(0.7);
    const auto e = check_step_conditions(in).at("step_ii");
    CHECK(e.verdict == Verdict::pass);
    const auto pos = e.witness.find("numeric sup");
    REQUIRE(pos != std::string::npos);
    const double numeric = std::stod(e.witness.substr(e.witness.find(" is ", pos) + 4));
    CHECK(numeric <= e.value);
    CHECK(numeric > 0.5 * e.value);
  }
}

TEST_CASE("moment_scan examples") {
  const auto grid = TimeGrid::build(StepSpec::harmonic(), 2000);
  AuditOptions opt;
  opt.paths = 2000;
  const auto ou = Model{SodeModel::ornstein_uhlenbeck(1.0, 1.0)};
  auto scans = moment_scan(ou, SchemeSpec{}, grid, {2.0}, 0, 2000, State{0.0}, opt, 4.0);
  REQUIRE(scans.size() == 1);
  CHECK_FALSE(scans[0].diverged);
  CHECK(std::abs(scans[0].sup - 0.5) <= 3 * scans[0].sup_stderr);
  CHECK(scans[0].checkpoints.back().n == 2000);

  opt.paths = 50;
  const auto still = Model{SodeModel::ornstein_uhlenbeck(1.0, 0.0)};
  scans = moment_scan(still, SchemeSpec{}, grid, {1.0, 2.0, 4.0}, 3, 500, State{0.0}, opt);
  for (const auto& s : scans) {
    CHECK(s.sup == 0.0);
    for (const auto& c : s.checkpoints) CHECK(c.mean == 0.0);
  }

  const auto cubic = Model{SodeModel::polynomial(1.0, 1.0, 1.0)};
  const auto coarse = TimeGrid::build(StepSpec::constant(1.0), 200);
  scans = moment_scan(cubic, SchemeSpec{SchemeKind::em_baseline}, coarse, {2.0}, 0, 200, State{3.0}, opt);
  CHECK(scans[0].diverged);
  scans = moment_scan(cubic, SchemeSpec{}, coarse, {2.0}, 0, 200, State{3.0}, opt);
  CHECK_FALSE(scans[0].diverged);

  CHECK_THROWS_AS(moment_scan(ou, SchemeSpec{}, grid, {6.0}, 0, 100, State{0.0}, opt, 4.0), ConfigError);
  CHECK_THROWS_AS(moment_scan(ou, SchemeSpec{}, grid, {2.0}, 0, 5000, State{0.0}, opt), HorizonError);
}

TEST_CASE("moment_scan is reproducible across worker counts") {
  const auto grid = TimeGrid::build(StepSpec::harmonic(), 300);
  AuditOptions opt;
  opt.paths = 64;
  const auto ou = Model{SodeModel::ornstein_uhlenbeck(1.0, 1.0)};
  const auto a = moment_scan(ou, SchemeSpec{}, grid, {2.0}, 0, 300, State{1.0}, opt);
  opt.workers = 3;
  const auto b = moment_scan(ou, SchemeSpec{}, grid, {2.0}, 0, 300, State{1.0}, opt);
  REQUIRE(a[0].checkpoints.size() == b[0].checkpoints.size());
  for (std::size_t i = 0; i < a[0].checkpoints.size(); ++i) CHECK(a[0].checkpoints[i].mean == b[0].checkpoints[i].mean);
}

TEST_CASE("contraction_fit examples") {
  const auto grid = TimeGrid::build(StepSpec::harmonic(), 1000);
  AuditOptions opt;
  opt.paths = 8;
  const auto still = Model{SodeModel::ornstein_uhlenbeck(1.0, 0.0)};
  auto fit = contraction_fit(still, SchemeSpec{}, grid, State{1.0}, State{0.0}, 0, 3, opt);
  CHECK(std::sqrt(fit.mean_sq_diff.back()) == doctest::Approx(0.25).epsilon(1e-14));

  fit = contraction_fit(still, SchemeSpec{}, grid, State{1.0}, State{0.0}, 0, 1000, opt);
  for (std::size_t i = 0; i < fit.n.size(); ++i) {
    double prod = 1.0;
    for (std::uint64_t k = 1; k <= fit.n[i]; ++k) prod /= 1.0 + grid.step(k);
    CHECK(fit.mean_sq_diff[i] == doctest::Approx(prod * prod).epsilon(1e-12));
  }

  const auto sode = SodeModel::ornstein_uhlenbeck(1.0, 1.0);
  fit = contraction_fit(Model{sode}, SchemeSpec{}, grid, State{1.0}, State{-1.0}, 10, 1000, opt);
  CHECK_FALSE(fit.degenerate);
  CHECK(fit.rate >= sode.constants.c8(1.0) / 2.0);

  fit = contraction_fit(Model{sode}, SchemeSpec{}, grid, State{0.5}, State{0.5}, 0, 1000, opt);
  CHECK(fit.degenerate);
}

TEST_CASE("strong_order_fit") {
  AuditOptions opt;
  opt.paths = 400;
  std::vector<std::uint64_t> levels;
  for (int j = 5; j <= 11; ++j) levels.push_back(1ull << j);

  const auto fit = strong_order_fit(SodeModel::ornstein_uhlenbeck(2.0, 1.0), SchemeSpec{}, StepSpec::harmonic(),
                                    levels, opt);
  CHECK_FALSE(fit.exact);
  CHECK(fit.reference == "exact_ou");
  CHECK(fit.alpha == doctest::Approx(1.0).epsilon(0.2));
  CHECK(fit.ci_low < fit.alpha);
  CHECK(fit.ci_high > fit.alpha);

  const auto exact = strong_order_fit(SodeModel::ornstein_uhlenbeck(2.0, 1.0), SchemeSpec{SchemeKind::exact_ou},
                                      StepSpec::harmonic(), levels, opt);
  CHECK(exact.exact);
  CHECK(std::isinf(exact.alpha));

  opt.paths = 100;
  const auto cubic = strong_order_fit(SodeModel::polynomial(1.0, 1.0, 0.5), SchemeSpec{}, StepSpec::harmonic(),
                                      levels, opt);
  CHECK(cubic.reference == "step_halving");
  CHECK(cubic.alpha > 0.5);

  CHECK_THROWS_AS(strong_order_fit(SodeModel::ornstein_uhlenbeck(2.0, 1.0), SchemeSpec{}, StepSpec::harmonic(),
                                    {4, 8}, opt),
                  DomainError);
}
