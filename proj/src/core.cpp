#include "edreg/core.hpp"

#include <cmath>
#include <limits>

namespace edreg {

double tv_norm(const Matrix& moments) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < moments.rows(); ++i) total += moments.row(i).norm();
  return total;
}

double tv_norm(const DiscreteVectorMeasure& m) { return tv_norm(m.moments); }

Matrix zero_mean_project(const Matrix& momenta) {
  const Eigen::RowVectorXd mean = momenta.colwise().mean();
  return momenta.rowwise() - mean;
}

double min_pairwise_distance(const PointCloud& cloud) {
  const Eigen::Index n = cloud.size();
  if (n < 2) throw InvalidArgument("min_pairwise_distance: need n >= 2");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      best = std::min(best, (cloud.points.row(i) - cloud.points.row(j)).norm());
  return best;
}

}  // namespace edreg
