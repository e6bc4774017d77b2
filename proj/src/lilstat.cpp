#include "lilsim/lilstat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lilsim/errors.hpp"

namespace lilsim {

double lil_threshold() noexcept { return std::numbers::e + 1e-9; }

double lil_statistic(double S, double t) {
  if (!(t > lil_threshold())) {
    throw DomainError("lil_statistic needs t > e, got t = " + std::to_string(t));
  }
  return S / std::sqrt(2.0 * t * std::log(std::log(t)));
}

LilAccumulator::LilAccumulator(LilOptions options) : options_(options), next_checkpoint_(options.first_checkpoint) {
  if (!(options_.checkpoint_ratio > 1.0)) throw ConfigError("checkpoint ratio must exceed 1");
  if (!(options_.first_checkpoint > 0.0)) throw ConfigError("first checkpoint time must be > 0");
  if (!std::isfinite(options_.mu)) throw ConfigError("mu(f) must be finite");
}

std::optional<double> LilAccumulator::statistic() const {
  const double t = time();
  if (!(t > lil_threshold())) return std::nullopt;
  return lil_statistic(sum(), t);
}

void LilAccumulator::update(double tau, double f_val) {
  if (!(tau > 0.0)) throw DomainError("time_average_update needs tau > 0");
  if (!std::isfinite(f_val)) throw NumericError("non-finite observable value at step " + std::to_string(steps_ + 1));
  double center = options_.mu;
  if (options_.self_center && steps_ > 0) center = raw_.value() / t_.value();
  S_.add(tau * (f_val - center));
  raw_.add(tau * f_val);
  t_.add(tau);
  ++steps_;
  const double t = t_.value();
  if (t > lil_threshold()) {
    const double s = lil_statistic(S_.value(), t);
    if (!run_max_ || s > *run_max_) run_max_ = s;
    if (!run_min_ || s < *run_min_) run_min_ = s;
    if (options_.window && t >= options_.window->first && t <= options_.window->second) {
      if (!win_max_ || s > *win_max_) win_max_ = s;
      if (!win_min_ || s < *win_min_) win_min_ = s;
    }
  }
  if (options_.record_checkpoints && t >= next_checkpoint_) {
    log_checkpoint();
    while (next_checkpoint_ <= t) next_checkpoint_ *= options_.checkpoint_ratio;
  }
}

void LilAccumulator::log_checkpoint() {
  log_.push_back({time(), sum(), statistic(), run_max_, run_min_});
}

void LilAccumulator::close() {
  if (!options_.record_checkpoints || steps_ == 0) return;
  if (log_.empty() || log_.back().t != time()) log_checkpoint();
}

void LilAccumulator::merge(const LilAccumulator&) {
  throw UsageError("LilAccumulator is sequential; merging two accumulators is not defined");
}

LilAccumulator& time_average_update(LilAccumulator& acc, double tau, double f_val) {
  acc.update(tau, f_val);
  return acc;
}

const char* to_string(VMethod method) noexcept {
  switch (method) {
    case VMethod::exact_linear:
      return "exact_linear";
    case VMethod::batch_means:
      return "batch_means";
    case VMethod::ensemble:
      return "ensemble";
  }
  return "?";
}

double VEstimate::v() const { return std::sqrt(std::max(v2, 0.0)); }

VEstimate v_exact_linear(double a, double sigma) {
  if (!(a > 0.0)) throw DomainError("v_exact_linear needs a > 0");
  if (!(sigma >= 0.0)) throw DomainError("v_exact_linear needs sigma >= 0");
  const double v = sigma / a;
  return {VMethod::exact_linear, v * v, 0.0, 0};
}

BatchMeansAccumulator::BatchMeansAccumulator(double block_length, double mu) : L_(block_length), mu_(mu) {
  if (!(L_ > 0.0) || !std::isfinite(L_)) throw ConfigError("batch means block length must be a positive real");
}

void BatchMeansAccumulator::add(double tau, double f_val) {
  if (!(tau > 0.0)) throw DomainError("batch means increment needs tau > 0");
  if (!std::isfinite(f_val)) throw NumericError("non-finite observable value in batch means");
  const double g = f_val - mu_;
  double remaining = tau;
  while (filled_ + remaining >= L_) {
    const double piece = L_ - filled_;
    current_.add(piece * g);
    blocks_.push_back(current_.value());
    current_ = {};
    filled_ = 0.0;
    remaining -= piece;
  }
  if (remaining > 0.0) {
    current_.add(remaining * g);
    filled_ += remaining;
  }
}

VEstimate BatchMeansAccumulator::estimate() const {
  const std::size_t n = blocks_.size();
  if (n < 2) {
    throw DomainError("batch means needs at least 2 complete blocks of length " + std::to_string(L_) + ", got " +
                      std::to_string(n));
  }
  CompensatedSum mean;
  for (double b : blocks_) mean.add(b);
  const double m = mean.value() / static_cast<double>(n);
  CompensatedSum ss;
  for (double b : blocks_) ss.add((b - m) * (b - m));
  const double v2 = ss.value() / static_cast<double>(n - 1) / L_;
  return {VMethod::batch_means, v2, std::sqrt(2.0 / static_cast<double>(n - 1)) * v2, n};
}

VEstimate v_batch_means(std::span<const std::pair<double, double>> increments, double block_length, double mu) {
  CompensatedSum total;
  for (const auto& [tau, f] : increments) total.add(tau);
  const double T = total.value();
  const double L = block_length > 0.0 ? block_length : std::sqrt(T);
  if (!(T >= 2.0 * L)) {
    throw DomainError("batch means needs total time >= 2L (T = " + std::to_string(T) + ", L = " + std::to_string(L) +
                      ")");
  }
  BatchMeansAccumulator acc(L, mu);
  for (const auto& [tau, f] : increments) acc.add(tau, f);
  return acc.estimate();
}

VEstimate v_ensemble(std::span<const std::pair<double, double>> finals) {
  const std::size_t n = finals.size();
  if (n < 2) throw DomainError("v_ensemble needs at least 2 paths");
  const double T = finals[0].second;
  if (!(T > 0.0)) throw DomainError("v_ensemble needs T > 0");
  CompensatedSum mean;
  for (const auto& [S, t] : finals) {
    if (t != T) throw DomainError("v_ensemble needs a common T across paths");
    mean.add(S);
  }
  const double m = mean.value() / static_cast<double>(n);
  CompensatedSum ss;
  for (const auto& [S, t] : finals) ss.add((S - m) * (S - m));
  const double v2 = ss.value() / static_cast<double>(n - 1) / T;
  return {VMethod::ensemble, v2, std::sqrt(2.0 / static_cast<double>(n - 1)) * v2, n};
}

double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult normality_check(std::span<const double> samples, double scale) {
  const std::size_t n = samples.size();
  if (n < 50) throw DomainError("normality_check needs at least 50 samples, got " + std::to_string(n));
  if (!(scale > 0.0)) throw DomainError("normality_check needs a positive scale");
  std::vector<double> z(samples.begin(), samples.end());
  for (double& x : z) {
    if (!std::isfinite(x)) throw NumericError("normality_check: non-finite sample");
    x /= scale;
  }
  std::sort(z.begin(), z.end());
  if (z.front() == z.back()) throw DomainError("normality_check: degenerate sample (zero variance)");
  double d = 0.0;
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double F = 0.5 * std::erfc(-z[i] / std::numbers::sqrt2);
    d = std::max({d, static_cast<double>(i + 1) / dn - F, F - static_cast<double>(i) / dn});
  }
  const double sq = std::sqrt(dn);
  const double p = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
  return {d, p, p >= 0.01, n};
}

}  // namespace lilsim
