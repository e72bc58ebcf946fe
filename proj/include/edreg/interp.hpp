#pragma once

#include "edreg/types.hpp"

#include <optional>
#include <vector>

namespace edreg {

class InterpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DuplicatePointsError : public InterpError {
 public:
  using InterpError::InterpError;
};
class NotUnisolventError : public InterpError {
 public:
  using InterpError::InterpError;
};
class SingularSystemError : public InterpError {
 public:
  using InterpError::InterpError;
};

/// Monomial basis of all d-variate monomials with total degree <= degree,
/// in graded lexicographic order. degree = -1 is the empty basis.
struct PolynomialBasis {
  int degree = -1;
  Eigen::Index dimension = 0;
  std::vector<std::vector<int>> exponents;  // l entries of d exponents each

  PolynomialBasis() = default;
  PolynomialBasis(int degree, Eigen::Index dimension);

  Eigen::Index size() const { return static_cast<Eigen::Index>(exponents.size()); }

  /// Evaluation matrix P_X, shape n x l.
  Matrix evaluate(const Matrix& points) const;
};

/// Coefficients of a (possibly multi-component) kernel interpolant
/// f_k = sum_i gamma_{i,k} K_{x_i} + sum_j alpha_{j,k} p_j, with the moment
/// constraint P_X^T gamma = 0 and semi-norms gamma_k^T K_X gamma_k.
struct CpdSolution {
  Matrix gamma;         // n x k
  Matrix alpha;         // l x k
  Vector semi_norm_sq;  // k
};

/// True iff evaluation of the degree-<=degree polynomials on X is injective,
/// i.e. rank(P_X) = dim P. Rank via singular values thresholded at
/// 1e-10 * sigma_max.
bool check_unisolvent(const PointCloud& X, int degree);

/// Exact CPD interpolation: solves the bordered saddle system
/// [[K_X, P_X], [P_X^T, 0]] [gamma; alpha] = [Y; 0] per output component.
/// Throws DuplicatePointsError, NotUnisolventError, SingularSystemError.
CpdSolution solve_exact_cpd(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                            int degree);

/// Ridge regression with a positive definite kernel:
/// gamma = (K_X + lambda Id)^{-1} Y.
Matrix solve_ridge_pd(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                      double lambda);

/// Ridge regression with a CPD kernel, Schur-complement form:
///   alpha = (P^T B^{-1} P)^{-1} P^T B^{-1} Y,  gamma = B^{-1} (Y - P alpha),
/// with B = K_X + lambda Id. Converges to solve_exact_cpd as lambda -> 0.
CpdSolution solve_ridge_cpd(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                            int degree, double lambda);

/// Landmark (semi-)metric g(Y,Y) = sum_k gamma_k^T K_X gamma_k, plus
/// lambda_poly * sum_k alpha_k^T P_X^T P_X alpha_k when lambda_poly is given
/// (a true metric in that case).
double induced_metric(const KernelSpec& spec, const PointCloud& X, const Matrix& Y,
                      int degree, std::optional<double> lambda_poly = std::nullopt);

/// Pointwise evaluation of the kernel expansion plus polynomial part.
Matrix evaluate_interpolant(const KernelSpec& spec, const PointCloud& X,
                            const CpdSolution& sol, int degree,
                            const PointCloud& queries);

}  // namespace edreg
