#include "edreg/flow.hpp"

#include "edreg/core.hpp"
#include "edreg/kernels.hpp"
#include "edreg/rng.hpp"
#include "edreg/sliced.hpp"

#include <cmath>
#include <string>

namespace edreg {

namespace {

void check_flow_inputs(const KernelSpec& spec, const PointCloud& X0,
                       const MomentPath& path, const FlowMode& mode) {
  path.validate();
  if (path.size() != X0.size() || path.dim() != X0.dim())
    throw InvalidArgument("flow: path and cloud shapes disagree");
  if (spec.is_energy_distance() && !path.translations)
    throw InvalidArgument("flow: Energy-Distance kernel requires a translation path");
  if (!spec.is_energy_distance() && path.translations)
    throw InvalidArgument("flow: translation path is only meaningful for Energy-Distance");
  if (mode.kind == FlowMode::Kind::Sliced && !spec.is_energy_distance())
    throw InvalidArgument("flow: sliced mode is defined for the Energy-Distance kernel");
  spec.check_dimension(X0.dim());
}

void check_finite(const Matrix& X, Eigen::Index step) {
  if (X.allFinite()) return;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (!X.row(i).allFinite())
      throw FlowError("flow: non-finite position at step " + std::to_string(step) +
                      ", point " + std::to_string(i));
}

}  // namespace

namespace detail {

Matrix field_at(const KernelSpec& spec, const Matrix& sources, const Matrix& projected,
                const std::optional<Matrix>& translations, Eigen::Index t,
                const Matrix& targets, const FlowMode& mode) {
  Matrix v;
  if (mode.kind == FlowMode::Kind::Exact) {
    v = exact_convolve(spec, DiscreteVectorMeasure(sources, projected),
                       PointCloud(targets));
  } else {
    const DirectionSet dirs =
        sample_sphere(mode.seed, "flow", static_cast<std::uint64_t>(t),
                      mode.projections, sources.cols());
    v = sliced_convolve(DiscreteVectorMeasure(sources, projected), PointCloud(targets),
                        dirs);
  }
  if (translations) v.rowwise() += translations->row(t);
  return v;
}

FlowTrace flow_trace(const KernelSpec& spec, const PointCloud& X0, const MomentPath& path,
                     const FlowMode& mode) {
  check_flow_inputs(spec, X0, path, mode);
  const Eigen::Index T = path.steps();
  const double h = 1.0 / static_cast<double>(T);
  const bool ed = spec.is_energy_distance();

  FlowTrace trace;
  trace.positions.reserve(static_cast<std::size_t>(T) + 1);
  trace.projected.reserve(static_cast<std::size_t>(T));
  trace.kernel_velocity.reserve(static_cast<std::size_t>(T));
  trace.per_step_energy.resize(T);
  trace.per_step_tv.resize(T);

  trace.positions.push_back(X0.points);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Matrix& X = trace.positions.back();
    Matrix pbar = ed ? zero_mean_project(path.momenta[static_cast<std::size_t>(t)])
                     : path.momenta[static_cast<std::size_t>(t)];
    Matrix u = field_at(spec, X, pbar, std::nullopt, t, X, mode);  // kernel part only
    trace.per_step_energy(t) = 0.5 * (pbar.array() * u.array()).sum();
    trace.per_step_tv(t) = tv_norm(pbar);

    Matrix next = X + h * u;
    if (path.translations) next.rowwise() += h * path.translations->row(t);
    check_finite(next, t + 1);

    trace.projected.push_back(std::move(pbar));
    trace.kernel_velocity.push_back(std::move(u));
    trace.positions.push_back(std::move(next));
  }
  return trace;
}

}  // namespace detail

FlowResult euler_flow(const KernelSpec& spec, const PointCloud& X0, const MomentPath& path,
                      const FlowMode& mode) {
  detail::FlowTrace trace = detail::flow_trace(spec, X0, path, mode);
  const Eigen::Index T = path.steps();
  FlowResult result;
  result.trajectories = std::move(trace.positions);
  result.per_step_energy = std::move(trace.per_step_energy);
  result.kernel_energy = result.per_step_energy.sum() / static_cast<double>(T);
  result.tv_integral = trace.per_step_tv.sum() / static_cast<double>(T);
  return result;
}

std::vector<Matrix> advect_points(const KernelSpec& spec, const PointCloud& X0,
                                  const MomentPath& path, const PointCloud& passive,
                                  const FlowMode& mode) {
  check_flow_inputs(spec, X0, path, mode);
  if (passive.dim() != X0.dim())
    throw InvalidArgument("advect_points: dimension mismatch");
  const Eigen::Index T = path.steps();
  const double h = 1.0 / static_cast<double>(T);
  const bool ed = spec.is_energy_distance();

  std::vector<Matrix> snapshots;
  snapshots.reserve(static_cast<std::size_t>(T) + 1);
  snapshots.push_back(passive.points);

  // Steps mirror flow_trace exactly (kernel part first, translation added
  // separately) so recomputed landmark trajectories match euler_flow.
  Matrix X = X0.points;
  Matrix Q = passive.points;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Matrix pbar = ed ? zero_mean_project(path.momenta[static_cast<std::size_t>(t)])
                           : path.momenta[static_cast<std::size_t>(t)];
    const Matrix vx = detail::field_at(spec, X, pbar, std::nullopt, t, X, mode);
    const Matrix vq = detail::field_at(spec, X, pbar, std::nullopt, t, Q, mode);
    X += h * vx;
    Q += h * vq;
    if (path.translations) {
      X.rowwise() += h * path.translations->row(t);
      Q.rowwise() += h * path.translations->row(t);
    }
    check_finite(X, t + 1);
    check_finite(Q, t + 1);
    snapshots.push_back(Q);
  }
  return snapshots;
}

Matrix inverse_flow(const KernelSpec& spec, const PointCloud& X0, const MomentPath& path,
                    const PointCloud& queries, const FlowMode& mode) {
  check_flow_inputs(spec, X0, path, mode);
  if (queries.dim() != X0.dim())
    throw InvalidArgument("inverse_flow: dimension mismatch");
  const detail::FlowTrace trace = detail::flow_trace(spec, X0, path, mode);
  const Eigen::Index T = path.steps();
  const double h = 1.0 / static_cast<double>(T);

  Matrix Q = queries.points;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Matrix v = detail::field_at(spec, trace.positions[static_cast<std::size_t>(t)],
                                      trace.projected[static_cast<std::size_t>(t)],
                                      path.translations, t, Q, mode);
    Q -= h * v;
    check_finite(Q, t);
  }
  return Q;
}

std::pair<double, double> bilipschitz_bounds(const FlowResult& result) {
  return {std::exp(-result.tv_integral), std::exp(result.tv_integral)};
}

}  // namespace edreg
