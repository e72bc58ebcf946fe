#include "edreg/registration.hpp"

#include "edreg/core.hpp"
#include "edreg/kernels.hpp"
#include "edreg/rng.hpp"
#include "edreg/sliced.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace edreg {

namespace {

constexpr Eigen::Index kDirectionChunk = 16;  // fixed reduction grouping

// ---------------------------------------------------------------------------
// Endpoint losses and their gradients with respect to the source cloud.
// ---------------------------------------------------------------------------

double loss_value(const LossSpec& loss, const Matrix& X, const Matrix& Y,
                  const std::optional<DirectionSet>& dirs) {
  switch (loss.kind) {
    case LossSpec::Kind::ExactEd:
      return exact_ed_loss(PointCloud(X), PointCloud(Y));
    case LossSpec::Kind::GaussianMmd:
      return gaussian_mmd_loss(PointCloud(X), PointCloud(Y), loss.sigma);
    case LossSpec::Kind::SlicedEd:
      return sliced_ed_loss(PointCloud(X), PointCloud(Y), *dirs);
  }
  return 0.0;
}

Matrix exact_ed_loss_grad(const Matrix& X, const Matrix& Y) {
  const Eigen::Index N = X.rows(), M = Y.rows(), d = X.cols();
  const double wx = 1.0 / static_cast<double>(N);
  const double wy = 1.0 / static_cast<double>(M);
  Matrix out(N, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index j = 0; j < N; ++j) {
      if (j == i) continue;
      const Eigen::RowVectorXd diff = X.row(i) - X.row(j);
      const double r = diff.norm();
      if (r > 0.0) acc -= wx * diff / r;  // d(-|x_i - x_j|)/dx_i, weight +1/N
    }
    for (Eigen::Index j = 0; j < M; ++j) {
      const Eigen::RowVectorXd diff = X.row(i) - Y.row(j);
      const double r = diff.norm();
      if (r > 0.0) acc += wy * diff / r;  // target atoms carry weight -1/M
    }
    out.row(i) = 2.0 * wx * acc;
  }
  return out;
}

Matrix gaussian_mmd_loss_grad(const Matrix& X, const Matrix& Y, double sigma) {
  const Eigen::Index N = X.rows(), M = Y.rows(), d = X.cols();
  const double wx = 1.0 / static_cast<double>(N);
  const double wy = 1.0 / static_cast<double>(M);
  const double inv_s2 = 1.0 / (sigma * sigma);
  Matrix out(N, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index j = 0; j < N; ++j) {
      const Eigen::RowVectorXd diff = X.row(i) - X.row(j);
      acc -= wx * inv_s2 * std::exp(-0.5 * diff.squaredNorm() * inv_s2) * diff;
    }
    for (Eigen::Index j = 0; j < M; ++j) {
      const Eigen::RowVectorXd diff = X.row(i) - Y.row(j);
      acc += wy * inv_s2 * std::exp(-0.5 * diff.squaredNorm() * inv_s2) * diff;
    }
    out.row(i) = 2.0 * wx * acc;
  }
  return out;
}

/// D.row(idx) = sum_j A.row(j) * sign(s_idx - s_j) over the sorted entries,
/// with equal projections grouped so coincident values contribute zero.
void signed_sums(const std::vector<std::pair<double, Eigen::Index>>& sorted,
                 const Matrix& A, Matrix& D) {
  const std::size_t E = sorted.size();
  const Eigen::Index k = A.cols();
  Matrix prefix(static_cast<Eigen::Index>(E) + 1, k);
  prefix.row(0).setZero();
  for (std::size_t e = 0; e < E; ++e)
    prefix.row(static_cast<Eigen::Index>(e) + 1) =
        prefix.row(static_cast<Eigen::Index>(e)) + A.row(sorted[e].second);
  const Eigen::RowVectorXd total = prefix.row(static_cast<Eigen::Index>(E));
  std::size_t lo = 0;
  while (lo < E) {
    std::size_t hi = lo;
    while (hi < E && sorted[hi].first == sorted[lo].first) ++hi;
    const Eigen::RowVectorXd value = prefix.row(static_cast<Eigen::Index>(lo)) -
                                     (total - prefix.row(static_cast<Eigen::Index>(hi)));
    for (std::size_t e = lo; e < hi; ++e) D.row(sorted[e].second) = value;
    lo = hi;
  }
}

Matrix sliced_ed_loss_grad(const Matrix& X, const Matrix& Y, const DirectionSet& dirs) {
  const Eigen::Index N = X.rows(), M = Y.rows(), d = X.cols(), P = dirs.count();
  const Eigen::Index E = N + M;
  Matrix rho(E, 1);
  rho.topRows(N).setConstant(1.0 / static_cast<double>(N));
  rho.bottomRows(M).setConstant(-1.0 / static_cast<double>(M));

  const Eigen::Index chunks = (P + kDirectionChunk - 1) / kDirectionChunk;
  std::vector<Matrix> chunk_acc(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    Matrix acc = Matrix::Zero(N, d);
    std::vector<std::pair<double, Eigen::Index>> sorted(static_cast<std::size_t>(E));
    Matrix D(E, 1);
    for (Eigen::Index p = c * kDirectionChunk;
         p < std::min(P, (c + 1) * kDirectionChunk); ++p) {
      const Eigen::RowVectorXd theta = dirs.directions.row(p);
      for (Eigen::Index i = 0; i < N; ++i)
        sorted[static_cast<std::size_t>(i)] = {X.row(i).dot(theta), i};
      for (Eigen::Index j = 0; j < M; ++j)
        sorted[static_cast<std::size_t>(N + j)] = {Y.row(j).dot(theta), N + j};
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      signed_sums(sorted, rho, D);
      for (Eigen::Index i = 0; i < N; ++i)
        acc.row(i) -= 2.0 * rho(i, 0) * D(i, 0) * theta;
    }
    chunk_acc[static_cast<std::size_t>(c)] = std::move(acc);
  }
  Matrix out = Matrix::Zero(N, d);
  for (const Matrix& acc : chunk_acc) out += acc;
  out *= slicing_constant(static_cast<int>(d)) / static_cast<double>(P);
  return out;
}

Matrix loss_grad(const LossSpec& loss, const Matrix& X, const Matrix& Y,
                 const std::optional<DirectionSet>& dirs) {
  switch (loss.kind) {
    case LossSpec::Kind::ExactEd:
      return exact_ed_loss_grad(X, Y);
    case LossSpec::Kind::GaussianMmd:
      return gaussian_mmd_loss_grad(X, Y, loss.sigma);
    case LossSpec::Kind::SlicedEd:
      return sliced_ed_loss_grad(X, Y, *dirs);
  }
  return Matrix();
}

// ---------------------------------------------------------------------------
// Position adjoint of one Euler step: collects
//   Delta_m = sum_{j != m} (<W_m + Pbar_m, Pbar_j> + <Pbar_m, W_j>)
//             * dK(x_m, x_j)/dx_m.
// ---------------------------------------------------------------------------

/// dk/dr divided by r for the radial profile (finite limits are irrelevant
/// because coincident pairs are skipped with subgradient 0).
double kernel_derivative_over_r(const KernelSpec& spec, double r, Eigen::Index d) {
  switch (spec.kind) {
    case KernelKind::EnergyDistance:
      return -1.0 / r;
    case KernelKind::Gaussian: {
      const double inv_s2 = 1.0 / (spec.sigma * spec.sigma);
      return -inv_s2 * std::exp(-0.5 * r * r * inv_s2);
    }
    case KernelKind::MsSpline: {
      const double nu = spec.m + spec.s - 0.5 * static_cast<double>(d);
      const bool integer_order = nu >= 1.0 && std::abs(nu - std::round(nu)) < 1e-12;
      if (integer_order) {
        const double sign =
            (static_cast<long long>(std::llround(nu)) % 2 == 0) ? -1.0 : 1.0;
        return sign * std::pow(r, 2.0 * nu - 2.0) * (2.0 * nu * std::log(r) + 1.0);
      }
      const double sign = (static_cast<long long>(std::ceil(nu)) % 2 == 0) ? 1.0 : -1.0;
      return sign * 2.0 * nu * std::pow(r, 2.0 * nu - 2.0);
    }
  }
  return 0.0;
}

Matrix position_adjoint_exact(const KernelSpec& spec, const Matrix& X, const Matrix& Pbar,
                              const Matrix& W) {
  const Eigen::Index n = X.rows(), d = X.cols();
  const Matrix B = W + Pbar;
  Matrix delta(n, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index m = 0; m < n; ++m) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == m) continue;
      const Eigen::RowVectorXd diff = X.row(m) - X.row(j);
      const double r = diff.norm();
      if (r == 0.0) continue;
      const double coef = B.row(m).dot(Pbar.row(j)) + Pbar.row(m).dot(W.row(j));
      acc += coef * kernel_derivative_over_r(spec, r, d) * diff;
    }
    delta.row(m) = acc;
  }
  return delta;
}

Matrix position_adjoint_sliced(const Matrix& X, const Matrix& Pbar, const Matrix& W,
                               const DirectionSet& dirs) {
  const Eigen::Index n = X.rows(), d = X.cols(), P = dirs.count();
  const Matrix B = W + Pbar;
  Matrix AB(n, 2 * d);  // joint prefix data: [Pbar | W]
  AB.leftCols(d) = Pbar;
  AB.rightCols(d) = W;

  const Eigen::Index chunks = (P + kDirectionChunk - 1) / kDirectionChunk;
  std::vector<Matrix> chunk_acc(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    Matrix acc = Matrix::Zero(n, d);
    std::vector<std::pair<double, Eigen::Index>> sorted(static_cast<std::size_t>(n));
    Matrix D(n, 2 * d);
    for (Eigen::Index p = c * kDirectionChunk;
         p < std::min(P, (c + 1) * kDirectionChunk); ++p) {
      const Eigen::RowVectorXd theta = dirs.directions.row(p);
      for (Eigen::Index i = 0; i < n; ++i)
        sorted[static_cast<std::size_t>(i)] = {X.row(i).dot(theta), i};
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      signed_sums(sorted, AB, D);
      for (Eigen::Index m = 0; m < n; ++m) {
        const double scal = B.row(m).dot(D.row(m).head(d)) +
                            Pbar.row(m).dot(D.row(m).tail(d));
        acc.row(m) -= scal * theta;
      }
    }
    chunk_acc[static_cast<std::size_t>(c)] = std::move(acc);
  }
  Matrix delta = Matrix::Zero(n, d);
  for (const Matrix& acc : chunk_acc) delta += acc;
  delta *= slicing_constant(static_cast<int>(d)) / static_cast<double>(P);
  return delta;
}

// ---------------------------------------------------------------------------
// Objective evaluation (value and optional exact gradient).
// ---------------------------------------------------------------------------

struct EvalOutput {
  double value = 0.0;
  double loss = 0.0;
  double kernel_energy = 0.0;
  std::vector<Matrix> grad_momenta;
  std::optional<Matrix> grad_translations;
};

FlowMode make_flow_mode(const RegistrationConfig& cfg, std::uint64_t outer_seed) {
  return cfg.mode == FlowMode::Kind::Exact
             ? FlowMode::exact()
             : FlowMode::sliced(cfg.kernel_projections, outer_seed);
}

EvalOutput evaluate(const MomentPath& path, double lambda, double rho,
                    const RegistrationConfig& cfg, const PointCloud& X0,
                    const PointCloud& Y0, std::uint64_t outer_k, bool need_grad) {
  const bool ed = cfg.kernel.is_energy_distance();
  const Eigen::Index T = path.steps(), d = X0.dim();
  const double h = 1.0 / static_cast<double>(T);
  const std::uint64_t outer_seed = rng::derive_seed(cfg.seed, "outer", outer_k);
  const FlowMode mode = make_flow_mode(cfg, outer_seed);

  std::optional<DirectionSet> loss_dirs;
  if (cfg.loss.kind == LossSpec::Kind::SlicedEd)
    loss_dirs = sample_sphere(outer_seed, "loss", 0, cfg.loss.projections, d);

  const detail::FlowTrace trace = detail::flow_trace(cfg.kernel, X0, path, mode);
  const Matrix& XT = trace.positions.back();

  EvalOutput out;
  out.loss = loss_value(cfg.loss, XT, Y0.points, loss_dirs);
  out.kernel_energy = trace.per_step_energy.sum() * h;

  double reg = 0.0;
  switch (cfg.regularization.kind) {
    case Regularization::Kind::None:
      break;
    case Regularization::Kind::TvSquared:
      reg = cfg.regularization.beta * h * trace.per_step_tv.squaredNorm();
      break;
    case Regularization::Kind::L2Momentum: {
      double sq = 0.0;
      for (const Matrix& pbar : trace.projected) sq += pbar.squaredNorm();
      reg = cfg.regularization.lambda_m * h * sq;
      break;
    }
  }
  out.value = 0.5 * rho * out.loss * out.loss + lambda * out.loss +
              out.kernel_energy + reg;
  if (!need_grad) return out;

  // Reverse sweep through the stored forward states.
  out.grad_momenta.assign(static_cast<std::size_t>(T), Matrix());
  if (ed) out.grad_translations = Matrix::Zero(T, d);

  const double dF_dL = rho * out.loss + lambda;
  Matrix W = dF_dL * loss_grad(cfg.loss, XT, Y0.points, loss_dirs);

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Matrix& X = trace.positions[static_cast<std::size_t>(t)];
    const Matrix& pbar = trace.projected[static_cast<std::size_t>(t)];
    const Matrix& u = trace.kernel_velocity[static_cast<std::size_t>(t)];

    // Momentum gradient: h K_{X_t} W (velocity chain) + h U_t (energy).
    Matrix kw;
    if (mode.kind == FlowMode::Kind::Exact) {
      kw = exact_convolve(cfg.kernel, DiscreteVectorMeasure(X, W), PointCloud(X));
    } else {
      const DirectionSet dirs = sample_sphere(mode.seed, "flow",
                                              static_cast<std::uint64_t>(t),
                                              mode.projections, d);
      kw = sliced_convolve(DiscreteVectorMeasure(X, W), PointCloud(X), dirs);
    }
    Matrix gp = h * kw + h * u;
    switch (cfg.regularization.kind) {
      case Regularization::Kind::None:
        break;
      case Regularization::Kind::TvSquared: {
        const double tv = trace.per_step_tv(t);
        for (Eigen::Index i = 0; i < gp.rows(); ++i) {
          const double nr = pbar.row(i).norm();
          if (nr > 0.0)
            gp.row(i) += cfg.regularization.beta * h * 2.0 * tv * pbar.row(i) / nr;
        }
        break;
      }
      case Regularization::Kind::L2Momentum:
        gp += cfg.regularization.lambda_m * h * 2.0 * pbar;
        break;
    }
    out.grad_momenta[static_cast<std::size_t>(t)] = ed ? zero_mean_project(gp) : gp;
    if (ed) out.grad_translations->row(t) = h * W.colwise().sum();

    // Position adjoint W_t = W_{t+1} + h * Delta_t. X_0 is fixed data, so the
    // final update is not needed.
    if (t > 0) {
      Matrix delta;
      if (mode.kind == FlowMode::Kind::Exact) {
        delta = position_adjoint_exact(cfg.kernel, X, pbar, W);
      } else {
        const DirectionSet dirs = sample_sphere(mode.seed, "flow",
                                                static_cast<std::uint64_t>(t),
                                                mode.projections, d);
        delta = position_adjoint_sliced(X, pbar, W, dirs);
      }
      W += h * delta;
    }
  }

  for (const Matrix& g : out.grad_momenta)
    if (!g.allFinite()) throw FlowError("gradient: non-finite momentum gradient");
  if (out.grad_translations && !out.grad_translations->allFinite())
    throw FlowError("gradient: non-finite translation gradient");
  return out;
}

// ---------------------------------------------------------------------------
// Packing between MomentPath and flat optimizer vectors.
// ---------------------------------------------------------------------------

Eigen::Index packed_size(Eigen::Index T, Eigen::Index n, Eigen::Index d, bool ed) {
  return T * n * d + (ed ? T * d : 0);
}

Vector pack_path(const MomentPath& path) {
  const Eigen::Index T = path.steps(), n = path.size(), d = path.dim();
  const bool ed = path.translations.has_value();
  Vector x(packed_size(T, n, d, ed));
  Eigen::Index pos = 0;
  for (const Matrix& p : path.momenta)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < d; ++c) x(pos++) = p(i, c);
  if (ed)
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index c = 0; c < d; ++c) x(pos++) = (*path.translations)(t, c);
  return x;
}

MomentPath unpack_path(const Vector& x, Eigen::Index T, Eigen::Index n, Eigen::Index d,
                       bool ed) {
  MomentPath path = MomentPath::zeros(T, n, d, ed);
  Eigen::Index pos = 0;
  for (Matrix& p : path.momenta)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < d; ++c) p(i, c) = x(pos++);
  if (ed)
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index c = 0; c < d; ++c) (*path.translations)(t, c) = x(pos++);
  return path;
}

Vector pack_gradient(const EvalOutput& eval) {
  MomentPath shaped;
  shaped.momenta = eval.grad_momenta;
  shaped.translations = eval.grad_translations;
  return pack_path(shaped);
}

}  // namespace

double objective(const MomentPath& path, double lambda, double rho,
                 const RegistrationConfig& cfg, const PointCloud& X0,
                 const PointCloud& Y0, std::uint64_t outer_k) {
  cfg.validate();
  return evaluate(path, lambda, rho, cfg, X0, Y0, outer_k, false).value;
}

MomentPath gradient(const MomentPath& path, double lambda, double rho,
                    const RegistrationConfig& cfg, const PointCloud& X0,
                    const PointCloud& Y0, std::uint64_t outer_k) {
  cfg.validate();
  EvalOutput eval = evaluate(path, lambda, rho, cfg, X0, Y0, outer_k, true);
  MomentPath shaped;
  shaped.momenta = std::move(eval.grad_momenta);
  shaped.translations = std::move(eval.grad_translations);
  return shaped;
}

RegistrationResult register_clouds(const PointCloud& X0, const PointCloud& Y0,
                                   const RegistrationConfig& cfg) {
  cfg.validate();
  if (X0.dim() != Y0.dim())
    throw InvalidArgument("register_clouds: dimension mismatch");
  const bool ed = cfg.kernel.is_energy_distance();
  const Eigen::Index T = cfg.T, n = X0.size(), d = X0.dim();

  MomentPath path = MomentPath::zeros(T, n, d, ed);
  double lambda = 0.0, rho = cfg.rho_init;

  RegistrationResult result;
  std::uint64_t last_k = 1;
  for (int k = 1; k <= cfg.k_max; ++k) {
    last_k = static_cast<std::uint64_t>(k);
    const ObjectiveFn fn = [&](const Vector& x, Vector& grad) -> double {
      const MomentPath trial = unpack_path(x, T, n, d, ed);
      try {
        EvalOutput eval = evaluate(trial, lambda, rho, cfg, X0, Y0, last_k, true);
        grad = pack_gradient(eval);
        return eval.value;
      } catch (const FlowError&) {
        // Diverged trial point: report +inf so the line search backtracks.
        grad.setZero();
        return std::numeric_limits<double>::infinity();
      }
    };
    const LbfgsResult inner = lbfgs_minimize(fn, pack_path(path), cfg.inner);
    path = unpack_path(inner.x, T, n, d, ed);

    const EvalOutput eval = evaluate(path, lambda, rho, cfg, X0, Y0, last_k, false);
    result.loss_history.push_back(eval.loss);
    result.energy_history.push_back(eval.kernel_energy);

    lambda += rho * eval.loss;
    if (eval.loss > cfg.epsilon) {
      rho = std::min(rho * cfg.rho_growth, cfg.rho_cap);
    } else {
      result.converged = true;
      break;
    }
  }

  result.lambda_final = lambda;
  result.rho_final = rho;
  result.flow_mode =
      make_flow_mode(cfg, rng::derive_seed(cfg.seed, "outer", last_k));
  result.flow = euler_flow(cfg.kernel, X0, path, result.flow_mode);
  result.path = std::move(path);
  return result;
}

}  // namespace edreg
