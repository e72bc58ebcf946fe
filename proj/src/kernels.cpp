#include "edreg/kernels.hpp"

#include "kahan.hpp"

#include <cmath>
#include <vector>

namespace edreg {

namespace {

bool is_positive_integer(double x) {
  return x >= 1.0 && std::abs(x - std::round(x)) < 1e-12;
}

/// Radial profile k(r) with K(x,y) = k(|x-y|). The spline exponent is
/// nu = m + s - d/2, so 2*nu = 2m + 2s - d and the Energy-Distance kernel is
/// recovered at 2m + 2s - d = 1, e.g. G_{1,(d-1)/2}(x) = -|x|.
double radial_profile(const KernelSpec& spec, double r, Eigen::Index d) {
  switch (spec.kind) {
    case KernelKind::EnergyDistance:
      return -r;
    case KernelKind::Gaussian:
      return std::exp(-r * r / (2.0 * spec.sigma * spec.sigma));
    case KernelKind::MsSpline: {
      const double nu = spec.m + spec.s - 0.5 * static_cast<double>(d);
      if (is_positive_integer(nu)) {
        if (r == 0.0) return 0.0;  // r^(2 nu) log r -> 0
        const double sign = (static_cast<long long>(std::llround(nu)) % 2 == 0) ? -1.0 : 1.0;
        return sign * std::pow(r, 2.0 * nu) * std::log(r);
      }
      const double sign = (static_cast<long long>(std::ceil(nu)) % 2 == 0) ? 1.0 : -1.0;
      return sign * std::pow(r, 2.0 * nu);
    }
  }
  return 0.0;
}

}  // namespace

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                   const Eigen::Ref<const Eigen::RowVectorXd>& y) {
  if (x.size() != y.size()) throw InvalidArgument("eval_kernel: dimension mismatch");
  spec.check_dimension(x.size());
  return radial_profile(spec, (x - y).norm(), x.size());
}

Matrix gram(const KernelSpec& spec, const PointCloud& cloud) {
  const Eigen::Index n = cloud.size(), d = cloud.dim();
  spec.check_dimension(d);
  Matrix K(n, n);
  const Matrix& X = cloud.points;
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j)
      K(i, j) = radial_profile(spec, (X.row(i) - X.row(j)).norm(), d);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i);
  return K;
}

Matrix exact_convolve(const KernelSpec& spec, const DiscreteVectorMeasure& measure,
                      const PointCloud& targets) {
  if (measure.dim() != targets.dim())
    throw InvalidArgument("exact_convolve: dimension mismatch");
  const Eigen::Index n = measure.size(), m = targets.size(), d = targets.dim();
  spec.check_dimension(d);
  Matrix out(m, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < m; ++k) {
    std::vector<detail::Kahan> acc(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w =
          radial_profile(spec, (targets.points.row(k) - measure.points.row(j)).norm(), d);
      for (Eigen::Index c = 0; c < d; ++c) acc[c].add(w * measure.moments(j, c));
    }
    for (Eigen::Index c = 0; c < d; ++c) out(k, c) = acc[c].sum;
  }
  return out;
}

namespace {

/// sum_{i,j} |a_i - b_j| over two clouds, rows in parallel, row partials
/// reduced in index order so the result is schedule-independent.
double cross_distance_sum(const Matrix& A, const Matrix& B, const KernelSpec& spec) {
  const Eigen::Index n = A.rows();
  std::vector<double> row_sum(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::Kahan acc;
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      acc.add(radial_profile(spec, (A.row(i) - B.row(j)).norm(), A.cols()));
    row_sum[static_cast<std::size_t>(i)] = acc.sum;
  }
  detail::Kahan total;
  for (double v : row_sum) total.add(v);
  return total.sum;
}

double mmd_quadratic(const PointCloud& X, const PointCloud& Y, const KernelSpec& spec) {
  if (X.dim() != Y.dim()) throw InvalidArgument("mmd loss: dimension mismatch");
  const double N = static_cast<double>(X.size()), M = static_cast<double>(Y.size());
  const double sxx = cross_distance_sum(X.points, X.points, spec);
  const double syy = cross_distance_sum(Y.points, Y.points, spec);
  const double sxy = cross_distance_sum(X.points, Y.points, spec);
  return sxx / (N * N) + syy / (M * M) - 2.0 * sxy / (N * M);
}

}  // namespace

double exact_ed_loss(const PointCloud& X, const PointCloud& Y) {
  return mmd_quadratic(X, Y, KernelSpec::energy_distance());
}

double gaussian_mmd_loss(const PointCloud& X, const PointCloud& Y, double sigma) {
  return mmd_quadratic(X, Y, KernelSpec::gaussian(sigma));
}

namespace serial {

Matrix gram(const KernelSpec& spec, const PointCloud& cloud) {
  const Eigen::Index n = cloud.size(), d = cloud.dim();
  spec.check_dimension(d);
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      K(i, j) = radial_profile(spec, (cloud.points.row(i) - cloud.points.row(j)).norm(), d);
      K(j, i) = K(i, j);
    }
  return K;
}

Matrix exact_convolve(const KernelSpec& spec, const DiscreteVectorMeasure& measure,
                      const PointCloud& targets) {
  const Eigen::Index n = measure.size(), m = targets.size(), d = targets.dim();
  Matrix out = Matrix::Zero(m, d);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w =
          radial_profile(spec, (targets.points.row(k) - measure.points.row(j)).norm(), d);
      out.row(k) += w * measure.moments.row(j);
    }
  return out;
}

namespace {

double mmd_plain(const PointCloud& X, const PointCloud& Y, const KernelSpec& spec) {
  const double N = static_cast<double>(X.size()), M = static_cast<double>(Y.size());
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (Eigen::Index i = 0; i < X.size(); ++i)
    for (Eigen::Index j = 0; j < X.size(); ++j)
      sxx += radial_profile(spec, (X.points.row(i) - X.points.row(j)).norm(), X.dim());
  for (Eigen::Index i = 0; i < Y.size(); ++i)
    for (Eigen::Index j = 0; j < Y.size(); ++j)
      syy += radial_profile(spec, (Y.points.row(i) - Y.points.row(j)).norm(), Y.dim());
  for (Eigen::Index i = 0; i < X.size(); ++i)
    for (Eigen::Index j = 0; j < Y.size(); ++j)
      sxy += radial_profile(spec, (X.points.row(i) - Y.points.row(j)).norm(), X.dim());
  return sxx / (N * N) + syy / (M * M) - 2.0 * sxy / (N * M);
}

}  // namespace

double exact_ed_loss(const PointCloud& X, const PointCloud& Y) {
  return mmd_plain(X, Y, KernelSpec::energy_distance());
}

double gaussian_mmd_loss(const PointCloud& X, const PointCloud& Y, double sigma) {
  return mmd_plain(X, Y, KernelSpec::gaussian(sigma));
}

}  // namespace serial

}  // namespace edreg
