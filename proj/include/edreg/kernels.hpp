#pragma once

#include "edreg/types.hpp"

namespace edreg {

/// Scalar kernel value K(x, y). Energy-Distance: -|x-y|. Gaussian:
/// exp(-|x-y|^2 / (2 sigma^2)). (m,s)-spline with nu = m + s - d/2:
/// (-1)^ceil(nu) |x-y|^(2 nu) off the integer orders, and the log branch
/// (-1)^(nu+1) |x-y|^(2 nu) log|x-y| (value 0 at x = y) on them.
double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                   const Eigen::Ref<const Eigen::RowVectorXd>& y);

/// n x n Gram matrix K_X with entries K(x_i, x_j). Exactly symmetric.
Matrix gram(const KernelSpec& spec, const PointCloud& cloud);

/// Direct O(n*m) kernel convolution: out_k = sum_j K(t_k, x_j) gamma_j.
/// This is the quadratic-cost ground truth the sliced estimators are
/// tested against.
Matrix exact_convolve(const KernelSpec& spec, const DiscreteVectorMeasure& measure,
                      const PointCloud& targets);

/// Energy-Distance squared-MMD <rho, K * rho> for
/// rho = (1/N) sum delta_{x_i} - (1/M) sum delta_{y_j}, by the direct
/// quadratic sum. Nonnegative; zero iff X and Y carry the same empirical
/// measure.
double exact_ed_loss(const PointCloud& X, const PointCloud& Y);

/// Gaussian squared-MMD by the direct quadratic sum.
double gaussian_mmd_loss(const PointCloud& X, const PointCloud& Y, double sigma);

namespace serial {

// Serial reference implementations, kept as plain loops for testing the
// OpenMP paths and for the benchmark comparison.

Matrix gram(const KernelSpec& spec, const PointCloud& cloud);
Matrix exact_convolve(const KernelSpec& spec, const DiscreteVectorMeasure& measure,
                      const PointCloud& targets);
double exact_ed_loss(const PointCloud& X, const PointCloud& Y);
double gaussian_mmd_loss(const PointCloud& X, const PointCloud& Y, double sigma);

}  // namespace serial

}  // namespace edreg
