#pragma once

#include "edreg/types.hpp"

#include <cstdint>
#include <vector>

namespace edreg {

/// out_i = sum_j w_j |x_i - x_j| for nondecreasing positions x, in O(n)
/// via the prefix recurrences
///   a_{i+1} = a_i + w_i + w_{i+1},   b_{i+1} = b_i + w_i x_i + w_{i+1} x_{i+1},
/// with out_i = a_i x_i - b_i. Sortedness is asserted in checked builds.
std::vector<double> sorted_line_convolve(const std::vector<double>& positions,
                                         const std::vector<double>& weights);

/// out_k = sum_j w_j |t_k - s_j| for arbitrary (unsorted) source and target
/// positions: targets are merged with weight 0, sorted once, convolved, and
/// scattered back. O((n+m) log(n+m)).
std::vector<double> line_convolve_at(const std::vector<double>& source_pos,
                                     const std::vector<double>& weights,
                                     const std::vector<double>& target_pos);

/// Slicing constant c_d = sqrt(pi) Gamma((d+1)/2) / Gamma(d/2), via lgamma.
double slicing_constant(int d);

/// Monte-Carlo sliced estimate of the Energy-Distance convolution
/// (K * Gamma)(t_k): for each direction theta, sources and targets project to
/// scalars <., theta>, one merged sort is shared by the d moment components,
/// and the direction average is scaled by c_d. Directions are reduced in
/// fixed chunks of their index order, so results do not depend on the thread
/// count. Cost O(P d (n+m) log(n+m)).
Matrix sliced_convolve(const DiscreteVectorMeasure& measure, const PointCloud& targets,
                       const DirectionSet& dirs);

/// Sliced Energy-Distance loss (c_d / P) sum_p <pi_theta# rho, K * pi_theta# rho>,
/// one merged sort + line convolution + dot product per direction.
double sliced_ed_loss(const PointCloud& X, const PointCloud& Y, const DirectionSet& dirs);

/// Cumulative instrumentation: number of merged sorts and total elements
/// sorted by the sliced kernels (global across threads).
struct SlicedCounters {
  std::uint64_t sorts = 0;
  std::uint64_t sorted_elements = 0;
};

SlicedCounters sliced_counters();
void reset_sliced_counters();

namespace serial {

Matrix sliced_convolve(const DiscreteVectorMeasure& measure, const PointCloud& targets,
                       const DirectionSet& dirs);
double sliced_ed_loss(const PointCloud& X, const PointCloud& Y, const DirectionSet& dirs);

}  // namespace serial

}  // namespace edreg
