#pragma once

// Independent reference computations used by the unit tests. Each oracle is a
// direct transcription of a closed form, evaluated in long double where it
// helps, and shares no code with the library.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

inline long double harmonic_number(std::uint64_t n) {
  long double s = 0.0L;
  for (std::uint64_t k = n; k >= 1; --k) s += 1.0L / static_cast<long double>(k);
  return s;
}

// prod_{i=1}^n (1 + a/i)^{-1}; equals 1/(n+1) for a = 1.
inline long double bem_linear_decay(long double a, std::uint64_t n) {
  long double p = 1.0L;
  for (std::uint64_t i = 1; i <= n; ++i) p /= 1.0L + a / static_cast<long double>(i);
  return p;
}

// Forward partial sum sum_{i=k}^{k+terms-1} tau_i prod_{j=k+1}^{i} (1 + a tau_j)^{-1}
// for tau_i = 1/i, together with the last product.
struct TailPartial {
  long double sum;
  long double last_product;
};

inline TailPartial tail_weight_harmonic(long double a, std::uint64_t k, std::uint64_t terms) {
  long double s = 0.0L;
  long double prod = 1.0L;
  for (std::uint64_t i = k; i < k + terms; ++i) {
    if (i > k) prod /= 1.0L + a / static_cast<long double>(i);
    s += prod / static_cast<long double>(i);
  }
  return {s, prod};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation refined by one Halley step.
inline double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p > 1 - 0.02425) {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

inline double sample_variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace oracle
