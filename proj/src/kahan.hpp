#pragma once

namespace edreg::detail {

/// Kahan compensated accumulator, used by the quadratic-cost oracle sums so
/// their rounding error stays far below the estimator tolerances they gate.
struct Kahan {
  double sum = 0.0;
  double carry = 0.0;

  void add(double value) {
    const double y = value - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace edreg::detail
