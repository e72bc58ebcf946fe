#pragma once

#include "edreg/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace edreg {

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Selects between the exact quadratic-cost velocity field and its sliced
/// Monte-Carlo estimate. Sliced directions for step t are drawn from the
/// stream (seed, "flow", t) and are identical in forward and reverse passes.
struct FlowMode {
  enum class Kind { Exact, Sliced } kind = Kind::Exact;
  Eigen::Index projections = 64;
  std::uint64_t seed = 0;

  static FlowMode exact() { return FlowMode{}; }
  static FlowMode sliced(Eigen::Index projections, std::uint64_t seed) {
    FlowMode m;
    m.kind = Kind::Sliced;
    m.projections = projections;
    m.seed = seed;
    return m;
  }
};

struct FlowResult {
  std::vector<Matrix> trajectories;  // T+1 entries, n x d; first equals X0
  double kernel_energy = 0.0;        // (1/T) sum_t (1/2) <Pbar_t, K_{X_t} Pbar_t>
  double tv_integral = 0.0;          // (1/T) sum_t tv_norm(Gamma_t)
  Vector per_step_energy;            // T entries
};

/// Forward Euler trajectories with uniform step 1/T. For the Energy-Distance
/// kernel the momenta are zero-mean projected and the translation path is
/// added to the velocity; other kernels use raw momenta with no translation
/// term. Non-finite positions abort with the offending step and point index.
FlowResult euler_flow(const KernelSpec& spec, const PointCloud& X0, const MomentPath& path,
                      const FlowMode& mode);

/// Advects passive points through the same velocity field; landmark
/// trajectories are recomputed jointly and passive points never influence
/// the field. Returns T+1 snapshots of the passive set.
std::vector<Matrix> advect_points(const KernelSpec& spec, const PointCloud& X0,
                                  const MomentPath& path, const PointCloud& passive,
                                  const FlowMode& mode);

/// Integrates queries under the time-reversed, negated velocity field (the
/// field is still generated by the forward landmark trajectories, read
/// backwards). Approximate inverse of the forward map, error O(1/T).
Matrix inverse_flow(const KernelSpec& spec, const PointCloud& X0, const MomentPath& path,
                    const PointCloud& queries, const FlowMode& mode);

/// Distortion bounds (exp(-tv_integral), exp(tv_integral)) of the
/// continuous-time map.
std::pair<double, double> bilipschitz_bounds(const FlowResult& result);

namespace detail {

/// Forward sweep with stored per-step state, shared by euler_flow and the
/// discrete adjoint in the registration module.
struct FlowTrace {
  std::vector<Matrix> positions;       // T+1 entries
  std::vector<Matrix> projected;       // T entries, Pbar_t
  std::vector<Matrix> kernel_velocity; // T entries, U_t = K_{X_t} Pbar_t
  Vector per_step_energy;              // T entries
  Vector per_step_tv;                  // T entries
};

FlowTrace flow_trace(const KernelSpec& spec, const PointCloud& X0, const MomentPath& path,
                     const FlowMode& mode);

/// Velocity field of step t evaluated at arbitrary targets.
Matrix field_at(const KernelSpec& spec, const Matrix& sources, const Matrix& projected,
                const std::optional<Matrix>& translations, Eigen::Index t,
                const Matrix& targets, const FlowMode& mode);

}  // namespace detail

}  // namespace edreg
