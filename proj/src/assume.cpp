#include "lilsim/assume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "lilsim/errors.hpp"
#include "lilsim/numeric.hpp"
#include "lilsim/parallel.hpp"
#include "lilsim/rng.hpp"

namespace lilsim {
namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void inequality(ConditionReport& report, std::string name, const std::string& lhs_text, double lhs,
                const std::string& rhs_text, double rhs) {
  const bool ok = lhs <= rhs * (1.0 + 1e-12) + 1e-12;
  ConditionEntry e;
  e.name = std::move(name);
  e.verdict = ok ? Verdict::pass : Verdict::fail;
  e.witness = lhs_text + " = " + num(lhs) + (ok ? " <= " : " > ") + rhs_text + " = " + num(rhs);
  e.detail = ok ? "inequality holds" : "inequality violated";
  e.value = lhs;
  report.entries.push_back(std::move(e));
}

void check_range(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("exponent parameter out of range: " + what);
}

}  // namespace

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::undecided:
      return "undecided";
  }
  return "?";
}

bool ConditionReport::all_pass() const noexcept {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.verdict == Verdict::pass; });
}

const ConditionEntry& ConditionReport::at(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw UsageError("no condition named '" + name + "' in the report");
}

void ConditionReport::append(const ConditionReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
}

double ExponentParams::d_tilde() const noexcept { return std::max({1.0 + beta, r_tilde, q_tilde}); }

double ExponentParams::p_tilde_F() const noexcept {
  return p / 2.0 + p * q_tilde / 2.0 + gamma * std::max(d_tilde(), kappa);
}

void ExponentParams::validate() const {
  check_range(r >= 2.0, "r >= 2 (got " + num(r) + ")");
  check_range(r_tilde >= 1.0, "r~ >= 1 (got " + num(r_tilde) + ")");
  check_range(q >= 2.0, "q >= 2 (got " + num(q) + ")");
  check_range(q_tilde >= 1.0, "q~ >= 1 (got " + num(q_tilde) + ")");
  check_range(beta >= 0.0 && beta <= r - 1.0, "beta in [0, r-1] (got " + num(beta) + ")");
  check_range(kappa >= 0.0 && kappa <= q - 1.0, "kappa in [0, q-1] (got " + num(kappa) + ")");
  check_range(gamma1 > 0.0 && gamma1 <= 1.0, "gamma1 in (0,1] (got " + num(gamma1) + ")");
  check_range(gamma > 0.0 && gamma <= 1.0, "gamma in (0,1] (got " + num(gamma) + ")");
  check_range(l >= 0.0 && l <= r, "l in [0, r] (got " + num(l) + ")");
  check_range(l_tilde > 0.0 && l_tilde <= 1.0, "l~ in (0,1] (got " + num(l_tilde) + ")");
  check_range(alpha >= 0.0, "alpha >= 0 (got " + num(alpha) + ")");
  check_range(p >= 1.0, "p >= 1 (got " + num(p) + ")");
}

const char* to_string(ConstraintContext c) noexcept {
  switch (c) {
    case ConstraintContext::prop2_2:
      return "prop2_2";
    case ConstraintContext::thm3_1:
      return "thm3_1";
    case ConstraintContext::prop4_3:
      return "prop4_3";
    case ConstraintContext::prop4_4:
      return "prop4_4";
  }
  return "?";
}

ConstraintContext constraint_context_from_string(const std::string& name) {
  if (name == "prop2_2") return ConstraintContext::prop2_2;
  if (name == "thm3_1") return ConstraintContext::thm3_1;
  if (name == "prop4_3") return ConstraintContext::prop4_3;
  if (name == "prop4_4") return ConstraintContext::prop4_4;
  throw ConfigError("unknown constraint context '" + name + "' (expected prop2_2, thm3_1, prop4_3 or prop4_4)");
}

ConditionReport check_exponent_constraints(const ExponentParams& x, ConstraintContext context) {
  x.validate();
  ConditionReport rep;
  const double d = x.d_tilde();
  const double pF = x.p_tilde_F();
  const double rq = std::min(x.r, x.q);

  auto regularity = [&] {
    inequality(rep, "regularity_r", "p/2 (1 + r~) + (1 + beta) gamma1", x.p / 2.0 * (1.0 + x.r_tilde) + (1.0 + x.beta) * x.gamma1,
               "r", x.r);
  };
  auto gamma_range = [&] { inequality(rep, "gamma_range", "gamma1", x.gamma1, "gamma", x.gamma); };
  auto holder_l = [&] {
    const double lhs = x.p / 2.0 + std::max((x.p / 2.0 + x.gamma) * std::max(x.r_tilde, x.q_tilde),
                                            (x.p / 2.0 + x.l * x.gamma) * x.r_tilde);
    inequality(rep, "increment_r", "p/2 + [(p/2 + gamma)(r~ v q~)] v [(p/2 + l gamma) r~]", lhs, "r", x.r);
  };
  auto pF_bound = [&] { inequality(rep, "p_tilde_F", "p~_F = p/2 + p q~/2 + gamma (d~ v kappa)", pF, "r ^ q", rq); };

  switch (context) {
    case ConstraintContext::prop2_2:
      inequality(rep, "moment_r", "2 p r~ + 4 (1 + beta) gamma1", 2 * x.p * x.r_tilde + 4 * (1 + x.beta) * x.gamma1,
                 "r", x.r);
      inequality(rep, "moment_r2", "2 r~ (p r~ + (2 + 3 beta) gamma1)",
                 2 * x.r_tilde * (x.p * x.r_tilde + (2 + 3 * x.beta) * x.gamma1), "r", x.r);
      inequality(rep, "p_range", "p", x.p, "r", x.r);
      break;
    case ConstraintContext::thm3_1:
      inequality(rep, "p_range", "p", x.p, "r ^ q/4", std::min(x.r, x.q / 4.0));
      gamma_range();
      regularity();
      inequality(rep, "moment_q", "4 p q~ + 8 d~ gamma", 4 * x.p * x.q_tilde + 8 * d * x.gamma, "q", x.q);
      holder_l();
      pF_bound();
      inequality(rep, "moment_q_F", "2 q~ p~_F + 4 d~ gamma", 2 * x.q_tilde * pF + 4 * d * x.gamma, "q", x.q);
      break;
    case ConstraintContext::prop4_3:
      inequality(rep, "p_range", "p", x.p, "r ^ q", rq);
      gamma_range();
      regularity();
      inequality(rep, "moment_q", "p q~ + 2 d~ gamma", x.p * x.q_tilde + 2 * d * x.gamma, "q", x.q);
      pF_bound();
      holder_l();
      break;
    case ConstraintContext::prop4_4:
      // Integer moment order c = 2.
      inequality(rep, "p_range", "p", x.p, "r ^ q", rq);
      gamma_range();
      regularity();
      inequality(rep, "moment_q", "4c (p q~/2 + d~ gamma), c = 2", 8 * (x.p * x.q_tilde / 2 + d * x.gamma), "q", x.q);
      holder_l();
      pF_bound();
      inequality(rep, "moment_q_F", "2c (p~_F q~/2 + d~ gamma), c = 2", 4 * (pF * x.q_tilde / 2 + d * x.gamma), "q",
                 x.q);
      break;
  }
  return rep;
}

std::optional<double> largest_feasible_gamma(const ExponentParams& params, ConstraintContext context) {
  for (int i = 20; i >= 1; --i) {
    ExponentParams trial = params;
    trial.gamma = 0.05 * i;
    if (trial.gamma < params.gamma1 - 1e-12) break;
    if (check_exponent_constraints(trial, context).all_pass()) return trial.gamma;
  }
  return std::nullopt;
}

double RhoLaw::operator()(double t) const {
  switch (kind) {
    case Kind::exponential:
      return std::exp(-rate * t);
    case Kind::power:
      return std::pow(1.0 + t, -rate);
    case Kind::custom:
      return custom(t);
  }
  return 0.0;
}

std::string RhoLaw::describe() const {
  switch (kind) {
    case Kind::exponential:
      return "exp(-" + num(rate) + " t)";
    case Kind::power:
      return "(1 + t)^-" + num(rate);
    case Kind::custom:
      return "custom";
  }
  return "?";
}

namespace {

// sup over geometric checkpoints k of sum_{i=k}^{H} tau_i rho(t_i - t_k)^gamma.
double numeric_tail_sup(const TimeGrid& grid, const RhoLaw& rho, double gamma) {
  const std::uint64_t H = grid.n_max();
  double sup = 0.0;
  for (double kf = 1.0; kf <= static_cast<double>(H) / 2.0; kf = std::max(kf + 1.0, std::floor(kf * 1.5))) {
    const auto k = static_cast<std::uint64_t>(kf);
    const double tk = grid.time(k);
    CompensatedSum s;
    for (std::uint64_t i = k; i <= H; ++i) {
      const double g = std::pow(rho(grid.time(i) - tk), gamma);
      s.add(grid.step(i) * g);
      if (rho.kind == RhoLaw::Kind::exponential && g < 1e-18) break;
    }
    sup = std::max(sup, s.value());
  }
  return sup;
}

ConditionEntry tail_condition(const std::string& name, const std::string& symbol, const TimeGrid& grid,
                              const StepSpec& spec, const RhoLaw& rho, double gamma) {
  ConditionEntry e;
  e.name = name;
  const double numeric = numeric_tail_sup(grid, rho, gamma);
  const std::string prefix = "sup_k sum_{i>=k} tau_i " + symbol + "(t_i - t_k)^gamma with " + symbol + " = " +
                             rho.describe() + ": ";
  const std::string numeric_text = "; numeric sup to n = " + std::to_string(grid.n_max()) + " is " + num(numeric);
  switch (rho.kind) {
    case RhoLaw::Kind::exponential:
    case RhoLaw::Kind::power: {
      const double decay = rho.kind == RhoLaw::Kind::exponential ? rho.rate * gamma : rho.rate * gamma - 1.0;
      if (decay > 0.0) {
        const double bound = spec.max_step() + 1.0 / decay;
        e.verdict = Verdict::pass;
        e.value = bound;
        e.witness = prefix + "<= tau_bar + 1/" + num(decay) + " = " + num(bound) + numeric_text;
        e.detail = "each term after i = k is dominated by the integral of the decreasing kernel over [t_{i-1}, t_i]";
      } else {
        e.verdict = spec.sum_diverges() ? Verdict::fail : Verdict::undecided;
        e.value = numeric;
        e.witness = prefix + "kernel integral diverges (rate * gamma = " + num(rho.rate * gamma) + " <= 1)" +
                    numeric_text;
        e.detail = "the kernel is not integrable while sum tau_k diverges";
      }
      break;
    }
    case RhoLaw::Kind::custom:
      e.verdict = Verdict::undecided;
      e.value = numeric;
      e.witness = prefix + numeric_text.substr(2);
      e.detail = "only exponential and power laws are decided symbolically";
      break;
  }
  return e;
}

}  // namespace

ConditionReport check_step_conditions(const StepConditionInputs& in) {
  in.spec.validate();
  if (!(in.gamma > 0.0 && in.gamma <= 1.0)) throw ConfigError("gamma must lie in (0,1]");
  if (!(in.gamma1 > 0.0 && in.gamma1 <= 1.0)) throw ConfigError("gamma1 must lie in (0,1]");
  if (!(in.alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(in.l_tilde > 0.0 && in.l_tilde <= 1.0)) throw ConfigError("l~ must lie in (0,1]");
  for (const RhoLaw* law : {&in.rho, &in.rho_tau}) {
    if (law->kind != RhoLaw::Kind::custom && !(law->rate > 0.0)) throw ConfigError("rho rates must be > 0");
    if (law->kind == RhoLaw::Kind::custom && !law->custom) throw ConfigError("custom rho law without a function");
  }
  if (in.horizon < 2) throw ConfigError("step-condition horizon must be >= 2");

  const TimeGrid grid = TimeGrid::build(in.spec, in.horizon);
  const std::uint64_t H = in.horizon;
  const double theta = in.spec.decay_exponent();
  const bool certified = H >= in.spec.uncapped_from();
  const double c = in.spec.scale;
  ConditionReport rep;

  // (i)
  {
    const double e = 1.0 + in.gamma * in.alpha;
    CompensatedSum partial;
    for (std::uint64_t k = 1; k <= H; ++k) partial.add(std::pow(grid.step(k), e));
    ConditionEntry entry;
    entry.name = "step_i";
    const std::string head = "sum_k tau_k^(1 + gamma alpha), exponent " + num(e) + ": partial sum to n = " +
                             std::to_string(H) + " is " + num(partial.value());
    if (!in.spec.vanishes()) {
      entry.verdict = Verdict::fail;
      entry.value = partial.value();
      entry.witness = head + "; constant steps do not vanish";
      entry.detail = "terms are bounded away from 0, the series diverges";
    } else if (theta * e <= 1.0) {
      entry.verdict = Verdict::fail;
      entry.value = partial.value();
      entry.witness = head + "; p-series exponent theta (1 + gamma alpha) = " + num(theta * e) + " <= 1";
      entry.detail = "the series diverges by the p-series test";
    } else if (!certified) {
      entry.verdict = Verdict::undecided;
      entry.value = partial.value();
      entry.witness = head + "; horizon below the index " + std::to_string(in.spec.uncapped_from()) +
                      " where the cap stops binding";
      entry.detail = "horizon too small to certify the tail";
    } else {
      const double g = theta * e;
      const double tail = std::pow(c, e) * std::pow(static_cast<double>(H), 1.0 - g) / (g - 1.0);
      entry.verdict = Verdict::pass;
      entry.value = partial.value() + tail;
      entry.witness = head + " plus integral tail <= " + num(tail) + "; p-series exponent " + num(g) + " > 1";
      entry.detail = "the series converges by the p-series test";
    }
    rep.entries.push_back(entry);
  }

  rep.entries.push_back(tail_condition("step_ii", "rho", grid, in.spec, in.rho, in.gamma));
  rep.entries.push_back(tail_condition("step_iii", "rho_tau", grid, in.spec, in.rho_tau, in.gamma));

  // (iv), in the form for nonincreasing steps.
  {
    const double e = std::min(1.0 + in.gamma * in.alpha, 1.0 + in.l_tilde * in.gamma);
    const double g = theta * e;
    ConditionEntry entry;
    entry.name = "step_iv";
    double avg = std::numeric_limits<double>::infinity();
    std::string numeric_text;
    if (in.spec.vanishes() && g > 1.0 && certified) {
      // Suffix sums S_j = sum_{i>=j} tau_i^e, truncated at H plus the integral tail.
      const double tail = std::pow(c, e) * std::pow(static_cast<double>(H), 1.0 - g) / (g - 1.0);
      std::vector<double> suffix(H + 2, 0.0);
      suffix[H + 1] = tail;
      for (std::uint64_t i = H + 1; i-- > 0;) suffix[i] = suffix[i + 1] + std::pow(grid.step(i), e);
      CompensatedSum outer;
      for (std::uint64_t k = 1; k <= H; ++k) outer.add(grid.step(k - 1) * suffix[k - 1]);
      avg = outer.value() / grid.horizon();
      numeric_text = "; average at n = " + std::to_string(H) + " is " + num(avg);
    }
    const std::string head = "(1/t_n) sum_k tau_{k-1} sum_{i>=k-1} tau_i^e with e = (1 + gamma alpha) ^ (1 + l~ gamma) = " +
                             num(e);
    if (!in.spec.vanishes()) {
      entry.verdict = Verdict::fail;
      entry.witness = head + "; constant steps keep the inner sum infinite";
      entry.detail = "condition (iv) fails for non-vanishing steps";
    } else if (g <= 1.0) {
      entry.verdict = Verdict::fail;
      entry.witness = head + "; inner p-series exponent theta e = " + num(g) + " <= 1";
      entry.detail = "the inner sum diverges";
    } else if (!certified) {
      entry.verdict = Verdict::undecided;
      entry.witness = head + "; horizon below the uncapped index";
      entry.detail = "horizon too small to certify the tail";
    } else {
      entry.verdict = Verdict::pass;
      entry.witness = head + "; inner p-series exponent theta e = " + num(g) + " > 1" + numeric_text;
      entry.detail = "inner sums vanish like k^(1 - theta e), so their weighted average tends to 0";
    }
    entry.value = avg;
    rep.entries.push_back(entry);
  }

  // Summability of rho^gamma1 (integral and integer samples).
  {
    ConditionEntry entry;
    entry.name = "rho_summable";
    const std::string head = "int rho^gamma1 and sum_k rho(k)^gamma1 with rho = " + in.rho.describe();
    switch (in.rho.kind) {
      case RhoLaw::Kind::exponential:
        entry.verdict = Verdict::pass;
        entry.value = 1.0 / (in.rho.rate * in.gamma1);
        entry.witness = head + ": integral = " + num(entry.value) + ", sum = " +
                        num(1.0 / std::expm1(in.rho.rate * in.gamma1));
        entry.detail = "geometric series";
        break;
      case RhoLaw::Kind::power: {
        const double s = in.rho.rate * in.gamma1;
        entry.verdict = s > 1.0 ? Verdict::pass : Verdict::fail;
        entry.value = s > 1.0 ? 1.0 / (s - 1.0) : std::numeric_limits<double>::infinity();
        entry.witness = head + ": decay exponent rate * gamma1 = " + num(s) + (s > 1.0 ? " > 1" : " <= 1");
        entry.detail = "p-series test";
        break;
      }
      case RhoLaw::Kind::custom: {
        CompensatedSum s;
        for (std::uint64_t k = 1; k <= std::min<std::uint64_t>(H, 100000); ++k) {
          s.add(std::pow(in.rho(static_cast<double>(k)), in.gamma1));
        }
        entry.verdict = Verdict::undecided;
        entry.value = s.value();
        entry.witness = head + ": partial sum " + num(s.value());
        entry.detail = "only exponential and power laws are decided symbolically";
        break;
      }
    }
    rep.entries.push_back(entry);
  }
  return rep;
}

namespace {

std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t m, std::uint64_t horizon, double ratio) {
  std::vector<std::uint64_t> out;
  double offset = 1.0;
  while (true) {
    const std::uint64_t n = m + static_cast<std::uint64_t>(std::ceil(offset));
    if (n >= horizon) break;
    if (out.empty() || n > out.back()) out.push_back(n);
    offset *= ratio;
  }
  out.push_back(horizon);
  return out;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

struct CheckpointRecorder : PathObserver {
  std::span<const std::uint64_t> cps;
  std::vector<double> values;  // |Y|^2 at each checkpoint
  std::span<const std::uint64_t> checkpoints() const override { return cps; }
  void on_checkpoint(const StepView& v) override { values.push_back(norm2(v.state)); }
};

void check_range_args(const TimeGrid& grid, std::uint64_t m, std::uint64_t horizon, const AuditOptions& options) {
  if (horizon == 0 || horizon > grid.n_max()) throw HorizonError("audit horizon beyond the grid");
  if (m >= horizon) throw DomainError("audit needs m < horizon");
  if (options.paths < 2) throw ConfigError("audits need at least 2 paths");
  if (!(options.checkpoint_ratio > 1.0)) throw ConfigError("checkpoint ratio must exceed 1");
}

}  // namespace

std::vector<MomentScan> moment_scan(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid,
                                    const std::vector<double>& orders, std::uint64_t m, std::uint64_t horizon,
                                    const State& x, const AuditOptions& options, double declared_q) {
  check_range_args(grid, m, horizon, options);
  for (double o : orders) {
    if (!(o > 0.0)) throw ConfigError("moment orders must be > 0");
    if (o > declared_q) throw ConfigError("moment order " + num(o) + " exceeds the declared q = " + num(declared_q));
  }
  const auto cps = geometric_checkpoints(m, horizon, options.checkpoint_ratio);
  std::vector<std::vector<double>> sq(options.paths);
  std::vector<char> failed(options.paths, 0);
  parallel_for(options.paths, options.workers, [&](std::uint64_t p) {
    CheckpointRecorder rec;
    rec.cps = cps;
    PathObserver* obs[] = {&rec};
    try {
      simulate_path(model, scheme, grid, x, NormalStream(options.seed, p), obs, m, horizon);
    } catch (const StepError&) {
      failed[p] = 1;
    } catch (const NumericError&) {
      failed[p] = 1;
    }
    rec.values.resize(cps.size(), std::numeric_limits<double>::infinity());
    sq[p] = std::move(rec.values);
  });

  std::vector<MomentScan> out;
  for (double order : orders) {
    MomentScan scan;
    scan.order = order;
    scan.diverged = std::any_of(failed.begin(), failed.end(), [](char f) { return f != 0; });
    for (std::size_t c = 0; c < cps.size(); ++c) {
      CompensatedSum s, ss;
      bool finite = true;
      for (std::uint64_t p = 0; p < options.paths; ++p) {
        const double v = std::pow(sq[p][c], order / 2.0);
        if (!std::isfinite(v)) finite = false;
        s.add(v);
      }
      const auto n = static_cast<double>(options.paths);
      MomentCheckpoint cp;
      cp.n = cps[c];
      cp.t = grid.time(cps[c]);
      if (!finite) {
        scan.diverged = true;
        cp.mean = std::numeric_limits<double>::infinity();
        cp.stderr_mean = std::numeric_limits<double>::infinity();
      } else {
        cp.mean = s.value() / n;
        for (std::uint64_t p = 0; p < options.paths; ++p) {
          const double d = std::pow(sq[p][c], order / 2.0) - cp.mean;
          ss.add(d * d);
        }
        cp.stderr_mean = std::sqrt(ss.value() / (n - 1.0) / n);
      }
      if (c == 0 || cp.mean > scan.sup || std::isnan(scan.sup)) {
        scan.sup = cp.mean;
        scan.sup_stderr = cp.stderr_mean;
      }
      scan.checkpoints.push_back(cp);
    }
    out.push_back(std::move(scan));
  }
  return out;
}

ContractionFit contraction_fit(const Model& model, const SchemeSpec& scheme, const TimeGrid& grid, const State& x,
                               const State& y, std::uint64_t m, std::uint64_t horizon, const AuditOptions& options) {
  check_range_args(grid, m, horizon, options);
  if (x.size() != y.size()) throw DomainError("contraction_fit: x and y differ in dimension");
  ContractionFit fit;
  if (x == y) {
    fit.degenerate = true;
    return fit;
  }
  const auto cps = geometric_checkpoints(m, horizon, options.checkpoint_ratio);
  std::vector<std::vector<double>> diffs(options.paths);
  parallel_for(options.paths, options.workers, [&](std::uint64_t p) {
    struct Pair : PathObserver {
      std::span<const std::uint64_t> cps;
      std::vector<State> states;
      std::span<const std::uint64_t> checkpoints() const override { return cps; }
      void on_checkpoint(const StepView& v) override { states.emplace_back(v.state.begin(), v.state.end()); }
    } a, b;
    a.cps = b.cps = cps;
    PathObserver* oa[] = {&a};
    PathObserver* ob[] = {&b};
    simulate_path(model, scheme, grid, x, NormalStream(options.seed, p), oa, m, horizon);
    simulate_path(model, scheme, grid, y, NormalStream(options.seed, p), ob, m, horizon);
    std::vector<double> d(cps.size());
    for (std::size_t c = 0; c < cps.size(); ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += (a.states[c][i] - b.states[c][i]) * (a.states[c][i] - b.states[c][i]);
      d[c] = s;
    }
    diffs[p] = std::move(d);
  });
  const double tm = grid.time(m);
  std::vector<double> xs, ys;
  for (std::size_t c = 0; c < cps.size(); ++c) {
    CompensatedSum s;
    for (std::uint64_t p = 0; p < options.paths; ++p) s.add(diffs[p][c]);
    const double mean = s.value() / static_cast<double>(options.paths);
    fit.n.push_back(cps[c]);
    fit.t.push_back(grid.time(cps[c]) - tm);
    fit.mean_sq_diff.push_back(mean);
    if (mean > 0.0 && std::isfinite(mean)) {
      xs.push_back(fit.t.back());
      ys.push_back(std::log(mean));
    }
  }
  if (xs.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  const auto k = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= k, my /= k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
  if (!(sxx > 0.0)) {
    fit.degenerate = true;
    return fit;
  }
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (my + slope * (xs[i] - mx));
    rss += r * r;
  }
  fit.rate = -slope / 2.0;
  fit.stderr_rate = xs.size() > 2 ? std::sqrt(rss / (k - 2.0) / sxx) / 2.0 : 0.0;
  return fit;
}

namespace {

struct OuCoefficients {
  std::vector<double> sqrt_tau, decay, cov_over_tau, residual_sd, bem;
};

OuCoefficients ou_coefficients(const TimeGrid& grid, double a) {
  OuCoefficients c;
  const std::uint64_t n = grid.n_max();
  for (auto* v : {&c.sqrt_tau, &c.decay, &c.cov_over_tau, &c.residual_sd, &c.bem}) v->resize(n + 1);
  const long double al = a;
  for (std::uint64_t k = 1; k <= n; ++k) {
    const long double tau = grid.step(k);
    const long double em1 = std::expm1l(-al * tau);
    const long double cov = -em1 / al;                          // Cov(dW, I)
    const long double var_i = -std::expm1l(-2.0L * al * tau) / (2.0L * al);
    const long double resid = std::max(0.0L, var_i - cov * cov / tau);
    c.sqrt_tau[k] = static_cast<double>(std::sqrt(tau));
    c.decay[k] = static_cast<double>(1.0L + em1);
    c.cov_over_tau[k] = static_cast<double>(cov / tau);
    c.residual_sd[k] = static_cast<double>(std::sqrt(resid));
    c.bem[k] = static_cast<double>(1.0L / (1.0L + al * tau));
  }
  return c;
}

}  // namespace

StrongOrderFit strong_order_fit(const SodeModel& model, const SchemeSpec& scheme, const StepSpec& steps,
                                const std::vector<std::uint64_t>& levels_in, const AuditOptions& options) {
  std::vector<std::uint64_t> levels = levels_in;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.size() < 3) throw DomainError("strong_order_fit needs at least 3 distinct levels");
  if (levels.front() < 1) throw DomainError("levels start at n = 1");
  if (options.paths < 2) throw ConfigError("strong_order_fit needs at least 2 paths");
  if (scheme.kind != SchemeKind::bem && scheme.kind != SchemeKind::exact_ou) {
    throw ConfigError("strong_order_fit supports the bem and exact_ou schemes");
  }
  const TimeGrid grid = TimeGrid::build(steps, levels.back());
  const std::size_t d = model.dim;
  const std::size_t L = levels.size();
  StrongOrderFit fit;
  fit.reference = model.linear ? "exact_ou" : "step_halving";
  if (scheme.kind == SchemeKind::exact_ou && !model.linear) throw ConfigError("exact_ou needs a linear model");

  std::vector<std::vector<double>> err(options.paths, std::vector<double>(L, 0.0));
  if (model.linear) {
    const auto co = ou_coefficients(grid, model.linear->a);
    const double sigma = model.linear->sigma;
    const bool exact_scheme = scheme.kind == SchemeKind::exact_ou;
    parallel_for(options.paths, options.workers, [&](std::uint64_t p) {
      NormalStream s(options.seed, p);
      std::vector<double> X(d, 0.0), Y(d, 0.0);
      std::size_t li = 0;
      for (std::uint64_t n = 1; n <= grid.n_max(); ++n) {
        for (std::size_t j = 0; j < d; ++j) {
          const double dW = co.sqrt_tau[n] * s.draw(n, 2 * j, 2 * d);
          const double xi2 = s.draw(n, 2 * j + 1, 2 * d);
          const double I = co.cov_over_tau[n] * dW + co.residual_sd[n] * xi2;
          X[j] = co.decay[n] * X[j] + sigma * I;
          Y[j] = exact_scheme ? co.decay[n] * Y[j] + sigma * I : (Y[j] + sigma * dW) * co.bem[n];
        }
        if (n == levels[li]) {
          double e = 0.0;
          for (std::size_t j = 0; j < d; ++j) e += (X[j] - Y[j]) * (X[j] - Y[j]);
          err[p][li++] = e;
        }
      }
    });
  } else {
    const std::size_t m = model.noise_dim;
    parallel_for(options.paths, options.workers, [&](std::uint64_t p) {
      NormalStream s(options.seed, p);
      State Y(d, 0.0), Z(d, 0.0), dW(m), dW1(m), dW2(m);
      std::size_t li = 0;
      for (std::uint64_t n = 1; n <= grid.n_max(); ++n) {
        const double tau = grid.step(n);
        const double st = std::sqrt(tau);
        for (std::size_t j = 0; j < m; ++j) {
          dW[j] = st * s.draw(n, 2 * j, 2 * m);
          dW1[j] = 0.5 * dW[j] + 0.5 * st * s.draw(n, 2 * j + 1, 2 * m);
          dW2[j] = dW[j] - dW1[j];
        }
        Y = bem_step(model, Y, tau, dW, scheme);
        Z = bem_step(model, Z, 0.5 * tau, dW1, scheme);
        Z = bem_step(model, Z, 0.5 * tau, dW2, scheme);
        if (n == levels[li]) {
          double e = 0.0;
          for (std::size_t j = 0; j < d; ++j) e += (Y[j] - Z[j]) * (Y[j] - Z[j]);
          err[p][li++] = e;
        }
      }
    });
  }

  const auto np = static_cast<double>(options.paths);
  bool all_zero = true;
  for (std::size_t l = 0; l < L; ++l) {
    CompensatedSum s;
    for (std::uint64_t p = 0; p < options.paths; ++p) s.add(err[p][l]);
    StrongLevel lv;
    lv.n = levels[l];
    lv.tau = grid.step(levels[l]);
    lv.mse = s.value() / np;
    CompensatedSum ss;
    for (std::uint64_t p = 0; p < options.paths; ++p) ss.add((err[p][l] - lv.mse) * (err[p][l] - lv.mse));
    lv.stderr_mse = std::sqrt(ss.value() / (np - 1.0) / np);
    if (lv.mse != 0.0) all_zero = false;
    fit.levels.push_back(lv);
  }
  if (all_zero) {
    fit.exact = true;
    fit.alpha = std::numeric_limits<double>::infinity();
    fit.ci_low = fit.ci_high = fit.alpha;
    return fit;
  }

  // Weighted least squares; Var(log mse) ~ (stderr / mse)^2.
  double sw = 0, sx = 0, sy = 0;
  std::vector<double> w(L), xs(L), ys(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& lv = fit.levels[l];
    if (!(lv.mse > 0.0)) throw NumericError("strong_order_fit: zero error at a single level");
    const double rel = lv.stderr_mse / lv.mse;
    w[l] = rel > 0.0 ? 1.0 / (rel * rel) : 1e12;
    xs[l] = std::log(lv.tau);
    ys[l] = std::log(lv.mse);
    sw += w[l], sx += w[l] * xs[l], sy += w[l] * ys[l];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t l = 0; l < L; ++l) {
    sxx += w[l] * (xs[l] - mx) * (xs[l] - mx);
    sxy += w[l] * (xs[l] - mx) * (ys[l] - my);
  }
  const double slope = sxy / sxx;
  const double se = std::sqrt(1.0 / sxx);
  fit.alpha = slope / 2.0;
  fit.ci_low = (slope - 1.96 * se) / 2.0;
  fit.ci_high = (slope + 1.96 * se) / 2.0;
  return fit;
}

}  // namespace lilsim
