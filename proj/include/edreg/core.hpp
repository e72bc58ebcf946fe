#pragma once

#include "edreg/types.hpp"

namespace edreg {

/// Total variation of an atomic vector measure: sum of the Euclidean norms
/// of the moments.
double tv_norm(const DiscreteVectorMeasure& m);

/// Same, acting directly on an n x d moment block.
double tv_norm(const Matrix& moments);

/// Subtracts the per-column mean: P_bar = (Id - (1/n) 1 1^T) P. Idempotent;
/// annihilates constant columns. Column sums of the result vanish.
Matrix zero_mean_project(const Matrix& momenta);

/// Exact minimum over all point pairs (quadratic scan; diagnostics only).
/// Requires n >= 2.
double min_pairwise_distance(const PointCloud& cloud);

}  // namespace edreg
