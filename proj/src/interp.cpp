#include "edreg/interp.hpp"

#include "edreg/core.hpp"
#include "edreg/kernels.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace edreg {

namespace {

void enumerate_monomials(int degree, Eigen::Index dim, Eigen::Index pos,
                         std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
  if (pos == dim) {
    out.push_back(current);
    return;
  }
  for (int e = 0; e <= degree; ++e) {
    current[static_cast<std::size_t>(pos)] = e;
    enumerate_monomials(degree - e, dim, pos + 1, current, out);
  }
  current[static_cast<std::size_t>(pos)] = 0;
}

}  // namespace

PolynomialBasis::PolynomialBasis(int deg, Eigen::Index dim)
    : degree(deg), dimension(dim) {
  if (dim < 1) throw InvalidArgument("PolynomialBasis: need d >= 1");
  if (deg < 0) return;  // empty basis
  std::vector<std::vector<int>> all;
  std::vector<int> current(static_cast<std::size_t>(dim), 0);
  enumerate_monomials(deg, dim, 0, current, all);
  // Graded lexicographic: total degree first, earlier variables first within
  // a degree (1, x, y, x^2, xy, y^2, ...).
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    int ta = 0, tb = 0;
    for (int e : a) ta += e;
    for (int e : b) tb += e;
    return ta < tb || (ta == tb && a > b);
  });
  exponents = std::move(all);
}

Matrix PolynomialBasis::evaluate(const Matrix& points) const {
  const Eigen::Index n = points.rows();
  Matrix P(n, size());
  for (Eigen::Index j = 0; j < size(); ++j) {
    const auto& expo = exponents[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = 1.0;
      for (Eigen::Index c = 0; c < dimension; ++c) {
        const int e = expo[static_cast<std::size_t>(c)];
        for (int rep = 0; rep < e; ++rep) v *= points(i, c);
      }
      P(i, j) = v;
    }
  }
  return P;
}

bool check_unisolvent(const PointCloud& X, int degree) {
  if (degree < 0) return true;
  PolynomialBasis basis(degree, X.dim());
  const Matrix P = basis.evaluate(X.points);
  if (P.rows() < P.cols()) return false;
  Eigen::JacobiSVD<Matrix> svd(P);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return false;
  const double threshold = 1e-10 * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold) ++rank;
  return rank == basis.size();
}

namespace {

void reject_degenerate(const PointCloud& X, int degree) {
  if (X.size() >= 2) {
    double diameter = 0.0, closest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < X.size(); ++i)
      for (Eigen::Index j = i + 1; j < X.size(); ++j) {
        const double r = (X.points.row(i) - X.points.row(j)).norm();
        diameter = std::max(diameter, r);
        closest = std::min(closest, r);
      }
    if (closest <= 1e-12 * diameter)
      throw DuplicatePointsError("interp: duplicate points (min distance " +
                                 std::to_string(closest) + ")");
  }
  if (degree >= 0 && !check_unisolvent(X, degree))
    throw NotUnisolventError("interp: point set is not unisolvent for degree " +
                             std::to_string(degree));
}

/// LU solve with a crude condition gate on the U diagonal and one step of
/// iterative refinement.
Matrix guarded_lu_solve(const Matrix& A, const Matrix& B) {
  Eigen::PartialPivLU<Matrix> lu(A);
  const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
  const double dmax = diag.maxCoeff();
  const double dmin = diag.minCoeff();
  if (!(dmin > 0.0) || dmax / dmin > 1e14)
    throw SingularSystemError("interp: system condition estimate beyond 1e14");
  Matrix sol = lu.solve(B);
  sol += lu.solve(B - A * sol);
  return sol;
}

}  // namespace

CpdSolution solve_exact_cpd(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                            int degree) {
  if (Y.rows() != X.size()) throw InvalidArgument("solve_exact_cpd: Y shape mismatch");
  reject_degenerate(X, degree);

  const Eigen::Index n = X.size(), k = Y.cols();
  const PolynomialBasis basis(degree, X.dim());
  const Eigen::Index l = basis.size();
  const Matrix K = gram(spec, X);
  const Matrix P = basis.evaluate(X.points);

  Matrix A = Matrix::Zero(n + l, n + l);
  A.topLeftCorner(n, n) = K;
  if (l > 0) {
    A.topRightCorner(n, l) = P;
    A.bottomLeftCorner(l, n) = P.transpose();
  }
  Matrix rhs = Matrix::Zero(n + l, k);
  rhs.topRows(n) = Y;

  const Matrix sol = guarded_lu_solve(A, rhs);

  CpdSolution result;
  result.gamma = sol.topRows(n);
  result.alpha = sol.bottomRows(l);
  result.semi_norm_sq.resize(k);
  for (Eigen::Index c = 0; c < k; ++c)
    result.semi_norm_sq(c) = result.gamma.col(c).dot(K * result.gamma.col(c));

  const double scale = std::max(Y.norm(), std::numeric_limits<double>::min());
  const double residual = (K * result.gamma + P * result.alpha - Y).norm();
  if (residual > 1e-8 * scale)
    throw SingularSystemError("solve_exact_cpd: interpolation residual " +
                              std::to_string(residual / scale) + " relative");
  return result;
}

Matrix solve_ridge_pd(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                      double lambda) {
  if (spec.kind != KernelKind::Gaussian)
    throw InvalidArgument("solve_ridge_pd: requires a positive definite kernel");
  if (lambda < 0.0) throw InvalidArgument("solve_ridge_pd: lambda >= 0 required");
  if (Y.rows() != X.size()) throw InvalidArgument("solve_ridge_pd: Y shape mismatch");
  Matrix B = gram(spec, X);
  B.diagonal().array() += lambda;
  return guarded_lu_solve(B, Y);
}

CpdSolution solve_ridge_cpd(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                            int degree, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("solve_ridge_cpd: lambda > 0 required");
  if (Y.rows() != X.size()) throw InvalidArgument("solve_ridge_cpd: Y shape mismatch");
  reject_degenerate(X, degree);

  const Eigen::Index k = Y.cols();
  const PolynomialBasis basis(degree, X.dim());
  const Eigen::Index l = basis.size();
  const Matrix K = gram(spec, X);
  const Matrix P = basis.evaluate(X.points);
  Matrix B = K;
  B.diagonal().array() += lambda;

  CpdSolution result;
  if (l > 0) {
    const Matrix BinvP = guarded_lu_solve(B, P);
    const Matrix BinvY = guarded_lu_solve(B, Y);
    const Matrix M = P.transpose() * BinvP;  // l x l Schur complement
    result.alpha = guarded_lu_solve(M, P.transpose() * BinvY);
    result.gamma = guarded_lu_solve(B, Y - P * result.alpha);
  } else {
    result.alpha = Matrix::Zero(0, k);
    result.gamma = guarded_lu_solve(B, Y);
  }
  result.semi_norm_sq.resize(k);
  for (Eigen::Index c = 0; c < k; ++c)
    result.semi_norm_sq(c) = result.gamma.col(c).dot(K * result.gamma.col(c));
  return result;
}

double induced_metric(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                      int degree, std::optional<double> lambda_poly) {
  const CpdSolution sol = solve_exact_cpd(spec, X, Y, degree);
  double g = sol.semi_norm_sq.sum();
  if (lambda_poly) {
    const PolynomialBasis basis(degree, X.dim());
    const Matrix P = basis.evaluate(X.points);
    for (Eigen::Index c = 0; c < sol.alpha.cols(); ++c)
      g += *lambda_poly * (P * sol.alpha.col(c)).squaredNorm();
  }
  return g;
}

Matrix evaluate_interpolant(const KernelSpec& spec, const PointCloud& X,
                            const CpdSolution& sol, int degree,
                            const PointCloud& queries) {
  if (queries.dim() != X.dim())
    throw InvalidArgument("evaluate_interpolant: dimension mismatch");
  const Eigen::Index m = queries.size(), k = sol.gamma.cols();
  const PolynomialBasis basis(degree, X.dim());
  Matrix out = Matrix::Zero(m, k);
#pragma omp parallel for schedule(static)
  for (Eigen::Index q = 0; q < m; ++q) {
    for (Eigen::Index i = 0; i < X.size(); ++i) {
      const double w = eval_kernel(spec, queries.points.row(q), X.points.row(i));
      out.row(q) += w * sol.gamma.row(i);
    }
  }
  if (basis.size() > 0) out += basis.evaluate(queries.points) * sol.alpha;
  return out;
}

}  // namespace edreg
