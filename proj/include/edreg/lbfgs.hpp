#pragma once

#include "edreg/types.hpp"

#include <functional>

namespace edreg {

struct LbfgsOptions {
  int memory = 10;
  int max_iters = 50;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  double grad_tol = 1e-8;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool line_search_failed = false;
};

/// f(x, grad_out) -> value; fills grad_out with the gradient at x.
using ObjectiveFn = std::function<double(const Vector&, Vector&)>;

/// Limited-memory BFGS with the two-loop recursion and Armijo backtracking.
/// The objective is non-increasing across accepted steps. Terminates on
/// gradient norm <= grad_tol, the iteration cap, or line-search failure
/// (which returns the best iterate with a flag rather than throwing).
LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Vector x0, const LbfgsOptions& opts);

}  // namespace edreg
