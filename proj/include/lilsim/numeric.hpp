#pragma once

#include <cmath>

namespace lilsim {

// Neumaier's variant of Kahan summation. The grid, the LIL accumulator and
// the martingale ledger all use this type so that times agree bit for bit.
class CompensatedSum {
 public:
  CompensatedSum() = default;
  CompensatedSum(double sum, double compensation) : sum_(sum), comp_(compensation) {}

  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const noexcept { return sum_ + comp_; }
  double raw_sum() const noexcept { return sum_; }
  double compensation() const noexcept { return comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace lilsim
