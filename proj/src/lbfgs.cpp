#include "edreg/lbfgs.hpp"

#include <cmath>
#include <deque>

namespace edreg {

namespace {

struct Pair {
  Vector s, y;
  double rho;  // 1 / (y . s)
};

/// Two-loop recursion: applies the implicit inverse Hessian to g.
Vector apply_inverse_hessian(const std::deque<Pair>& history, const Vector& g) {
  Vector q = g;
  std::vector<double> alpha(history.size());
  for (std::size_t i = history.size(); i-- > 0;) {
    alpha[i] = history[i].rho * history[i].s.dot(q);
    q -= alpha[i] * history[i].y;
  }
  if (!history.empty()) {
    const Pair& last = history.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double beta = history[i].rho * history[i].y.dot(q);
    q += (alpha[i] - beta) * history[i].s;
  }
  return q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Vector x, const LbfgsOptions& opts) {
  LbfgsResult result;
  Vector grad(x.size());
  double value = f(x, grad);
  result.evaluations = 1;

  std::deque<Pair> history;
  Vector x_new(x.size()), grad_new(x.size());

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    result.grad_norm = grad.norm();
    if (result.grad_norm <= opts.grad_tol) break;

    Vector direction = -apply_inverse_hessian(history, grad);
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {  // not a descent direction; fall back to steepest descent
      direction = -grad;
      slope = -grad.squaredNorm();
      history.clear();
    }

    // Armijo backtracking from a unit step (gradient-scaled on the first
    // iteration, when no curvature information exists yet).
    double step = history.empty() ? std::min(1.0, 1.0 / result.grad_norm) : 1.0;
    bool accepted = false;
    double value_new = value;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = x + step * direction;
      value_new = f(x_new, grad_new);
      ++result.evaluations;
      if (std::isfinite(value_new) &&
          value_new <= value + opts.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= opts.backtrack_factor;
    }
    if (!accepted) {
      result.line_search_failed = true;
      break;
    }

    Vector s = x_new - x;
    Vector y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {  // curvature guard
      history.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(history.size()) > opts.memory) history.pop_front();
    }

    x.swap(x_new);
    grad.swap(grad_new);
    value = value_new;
    ++result.iterations;
  }

  result.x = std::move(x);
  result.value = value;
  result.grad_norm = grad.norm();
  return result;
}

}  // namespace edreg
