// Command-line front end: registration, estimator benchmarks, kernel
// interpolation, and the closed-form two-particle fixture.

#include "edreg/core.hpp"
#include "edreg/flow.hpp"
#include "edreg/interp.hpp"
#include "edreg/io.hpp"
#include "edreg/kernels.hpp"
#include "edreg/registration.hpp"
#include "edreg/rng.hpp"
#include "edreg/sliced.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace edreg;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Affine map onto the unit box: x -> (x - origin) / scale with one uniform
/// scale for all axes, so kernel geometry is preserved.
struct Normalization {
  Eigen::RowVectorXd origin;
  double scale = 1.0;

  static Normalization fit(const Matrix& A, const Matrix& B) {
    Normalization norm;
    norm.origin = A.colwise().minCoeff().cwiseMin(B.colwise().minCoeff());
    const Eigen::RowVectorXd top = A.colwise().maxCoeff().cwiseMax(B.colwise().maxCoeff());
    norm.scale = std::max((top - norm.origin).maxCoeff(), 1e-300);
    return norm;
  }
  Matrix forward(const Matrix& X) const {
    return (X.rowwise() - origin) / scale;
  }
  Matrix backward(const Matrix& X) const {
    return (X * scale).rowwise() + origin;
  }
};

PointCloud unit_grid(Eigen::Index per_side, Eigen::Index d) {
  Eigen::Index total = 1;
  for (Eigen::Index c = 0; c < d; ++c) {
    total *= per_side;
    if (total > 200000)
      throw io::IoError("grid request too large (" + std::to_string(per_side) + "^" +
                        std::to_string(d) + " points)");
  }
  Matrix pts(total, d);
  for (Eigen::Index row = 0; row < total; ++row) {
    Eigen::Index rest = row;
    for (Eigen::Index c = 0; c < d; ++c) {
      pts(row, c) = static_cast<double>(rest % per_side) /
                    static_cast<double>(per_side - 1);
      rest /= per_side;
    }
  }
  return PointCloud(pts);
}

void write_trajectories_csv(const std::string& path, const std::vector<Matrix>& snapshots,
                            const Normalization& norm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io::IoError("cannot write '" + path + "'");
  out << "t,point";
  for (Eigen::Index c = 0; c < snapshots.front().cols(); ++c) out << ",x" << c;
  out << '\n';
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    const Matrix world = norm.backward(snapshots[t]);
    for (Eigen::Index i = 0; i < world.rows(); ++i) {
      out << t << ',' << i;
      for (Eigen::Index c = 0; c < world.cols(); ++c)
        out << ',' << io::format_double(world(i, c));
      out << '\n';
    }
  }
}

int cmd_register(const std::string& config_path, const std::string& source_path,
                 const std::string& target_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override,
                 std::optional<std::string> mode_override,
                 std::optional<Eigen::Index> projections_override,
                 Eigen::Index grid_per_side) {
  RegistrationConfig cfg = io::load_registration_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  if (mode_override) {
    if (*mode_override == "exact") {
      cfg.mode = FlowMode::Kind::Exact;
    } else if (*mode_override == "sliced") {
      cfg.mode = FlowMode::Kind::Sliced;
    } else {
      throw io::IoError("--mode must be exact or sliced");
    }
  }
  if (projections_override) cfg.kernel_projections = *projections_override;

  const PointCloud source = io::read_point_cloud_csv(source_path);
  const PointCloud target = io::read_point_cloud_csv(target_path);
  if (source.dim() != target.dim())
    throw io::IoError("source and target dimensions disagree");

  const Normalization norm = Normalization::fit(source.points, target.points);
  const PointCloud nsource(norm.forward(source.points));
  const PointCloud ntarget(norm.forward(target.points));

  fs::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  const RegistrationResult result = register_clouds(nsource, ntarget, cfg);
  const double wall = seconds_since(start);

  write_trajectories_csv(out_dir + "/trajectories.csv", result.flow.trajectories, norm);

  if (grid_per_side > 1) {
    const PointCloud grid = unit_grid(grid_per_side, source.dim());
    const std::vector<Matrix> advected =
        advect_points(cfg.kernel, nsource, result.path, grid, result.flow_mode);
    write_trajectories_csv(out_dir + "/grid_advected.csv", advected, norm);
  }

  ordered_json doc;
  doc["converged"] = result.converged;
  doc["loss_history"] = result.loss_history;
  doc["energy_history"] = result.energy_history;
  doc["lambda_final"] = result.lambda_final;
  doc["rho_final"] = result.rho_final;
  doc["kernel_energy"] = result.flow.kernel_energy;
  doc["tv_integral"] = result.flow.tv_integral;
  const auto [lo, hi] = bilipschitz_bounds(result.flow);
  doc["bilipschitz_lower"] = lo;
  doc["bilipschitz_upper"] = hi;
  doc["normalization"] = {{"origin", std::vector<double>(
                                         norm.origin.data(),
                                         norm.origin.data() + norm.origin.size())},
                          {"scale", norm.scale}};
  doc["wall_time_seconds"] = wall;
  std::ofstream(out_dir + "/result.json", std::ios::binary) << doc.dump(2) << '\n';

  if (!result.converged) {
    std::cerr << "registration did not reach the loss tolerance (final loss "
              << (result.loss_history.empty() ? 0.0 : result.loss_history.back())
              << ")\n";
    return 2;
  }
  return 0;
}

int cmd_bench_sliced(const std::vector<Eigen::Index>& sizes,
                     const std::vector<Eigen::Index>& projections, Eigen::Index d,
                     std::uint64_t seed, const std::string& out_path) {
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw io::IoError("cannot write '" + out_path + "'");
  out << "n,P,d,mean_error,std_error,wall_time_exact,wall_time_sliced\n";

  const int seeds = 20;
  for (const Eigen::Index n : sizes) {
    // One fixed measure per size; the error statistics average over
    // independent direction sets.
    const PointCloud points(sample_sphere(rng::derive_seed(seed, "bench-points", n), "pts",
                                          0, n, d)
                                .directions);
    Matrix moments =
        sample_sphere(rng::derive_seed(seed, "bench-moments", n), "mom", 0, n, d)
            .directions;
    moments = zero_mean_project(moments);
    const DiscreteVectorMeasure measure(points.points, moments);

    const auto t_exact = std::chrono::steady_clock::now();
    const Matrix exact = exact_convolve(KernelSpec::energy_distance(), measure, points);
    const double wall_exact = seconds_since(t_exact);

    for (const Eigen::Index P : projections) {
      double sum = 0.0, sum_sq = 0.0, wall_sliced = 0.0;
      for (int s = 0; s < seeds; ++s) {
        const DirectionSet dirs = sample_sphere(
            rng::derive_seed(seed, "bench-dirs", static_cast<std::uint64_t>(s)), "dir",
            static_cast<std::uint64_t>(P), P, d);
        const auto t_sliced = std::chrono::steady_clock::now();
        const Matrix est = sliced_convolve(measure, points, dirs);
        wall_sliced += seconds_since(t_sliced);
        const double err = (est - exact).rowwise().norm().mean();
        sum += err;
        sum_sq += err * err;
      }
      const double mean = sum / seeds;
      const double variance = std::max(0.0, sum_sq / seeds - mean * mean);
      out << n << ',' << P << ',' << d << ',' << io::format_double(mean) << ','
          << io::format_double(std::sqrt(variance)) << ','
          << io::format_double(wall_exact) << ','
          << io::format_double(wall_sliced / seeds) << '\n';
    }
  }
  return 0;
}

KernelSpec parse_kernel_json(const ordered_json& k) {
  // Mirrors the kernel block of the registration config.
  ordered_json wrapper;
  wrapper["kernel"] = k;
  return io::parse_registration_config(wrapper).kernel;
}

int cmd_interpolate(const std::string& config_path, const std::string& points_path,
                    const std::string& values_path, const std::string& queries_path,
                    const std::string& out_dir) {
  std::ifstream in(config_path);
  if (!in) throw io::IoError("cannot open config '" + config_path + "'");
  ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw io::IoError(std::string("config: ") + e.what());
  }
  KernelSpec kernel = KernelSpec::energy_distance();
  int degree = 0;
  double lambda = 0.0;
  for (const auto& item : doc.items()) {
    if (item.key() == "kernel") {
      kernel = parse_kernel_json(item.value());
    } else if (item.key() == "degree") {
      degree = item.value().get<int>();
    } else if (item.key() == "lambda") {
      lambda = item.value().get<double>();
    } else {
      throw io::IoError("config: unknown key '" + item.key() + "'");
    }
  }

  const PointCloud X = io::read_point_cloud_csv(points_path);
  const PointCloud values = io::read_point_cloud_csv(values_path);  // n x k table
  const PointCloud queries = io::read_point_cloud_csv(queries_path);
  if (values.size() != X.size())
    throw io::IoError("points and values row counts disagree");

  const CpdSolution sol =
      lambda > 0.0 ? solve_ridge_cpd(kernel, X, values.points, degree, lambda)
                   : solve_exact_cpd(kernel, X, values.points, degree);
  const Matrix predictions = evaluate_interpolant(kernel, X, sol, degree, queries);

  fs::create_directories(out_dir);
  io::write_point_cloud_csv(out_dir + "/gamma.csv", PointCloud(sol.gamma));
  if (sol.alpha.rows() > 0)
    io::write_point_cloud_csv(out_dir + "/alpha.csv", PointCloud(sol.alpha));
  io::write_point_cloud_csv(out_dir + "/predictions.csv", PointCloud(predictions));

  ordered_json summary;
  summary["semi_norm_sq"] =
      std::vector<double>(sol.semi_norm_sq.data(),
                          sol.semi_norm_sq.data() + sol.semi_norm_sq.size());
  summary["degree"] = degree;
  summary["lambda"] = lambda;
  std::ofstream(out_dir + "/summary.json", std::ios::binary) << summary.dump(2) << '\n';
  return 0;
}

int cmd_oracle_two_particles(double r0, double eps, Eigen::Index T,
                             const std::string& out_dir, Eigen::Index grid_per_side) {
  if (!(r0 > 0.0) || !(eps > 0.0) || !(eps < r0))
    throw io::IoError("need 0 < eps < r0");
  if (T < 1) throw io::IoError("need T >= 1");

  Matrix start(2, 2);
  start << 0.5 * r0, 0.0, -0.5 * r0, 0.0;
  const PointCloud X0(start);
  MomentPath path;
  path.momenta = oracles::two_particle_momenta(r0, eps, T);
  path.translations = Matrix::Zero(T, 2);

  const FlowResult flow = euler_flow(KernelSpec::energy_distance(), X0, path,
                                     FlowMode::exact());

  fs::create_directories(out_dir);
  std::ofstream analytic(out_dir + "/analytic_path.csv", std::ios::binary);
  analytic << "t,gamma,gap\n";
  double max_deviation = 0.0;
  std::ofstream euler(out_dir + "/euler_path.csv", std::ios::binary);
  euler << "t,xplus0,xplus1,xminus0,xminus1\n";
  for (Eigen::Index t = 0; t <= T; ++t) {
    const double time = static_cast<double>(t) / static_cast<double>(T);
    const auto state = oracles::two_particle_solution(r0, eps, time);
    analytic << io::format_double(time) << ',' << io::format_double(state.gamma) << ','
             << io::format_double(state.gap) << '\n';
    const Matrix& X = flow.trajectories[static_cast<std::size_t>(t)];
    euler << io::format_double(time);
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index c = 0; c < 2; ++c) euler << ',' << io::format_double(X(i, c));
    euler << '\n';
    const double gap = (X.row(0) - X.row(1)).norm();
    max_deviation = std::max(max_deviation, std::abs(gap - state.gap) / state.gap);
  }

  double grid_min_distance = -1.0;
  if (grid_per_side > 1) {
    PointCloud grid = unit_grid(grid_per_side, 2);
    grid.points = (grid.points.array() * 2.0 - 1.0) * r0;  // cover [-r0, r0]^2
    const std::vector<Matrix> advected = advect_points(
        KernelSpec::energy_distance(), X0, path, grid, FlowMode::exact());
    Normalization identity;
    identity.origin = Eigen::RowVectorXd::Zero(2);
    identity.scale = 1.0;
    write_trajectories_csv(out_dir + "/grid_advected.csv", advected, identity);
    grid_min_distance = min_pairwise_distance(PointCloud(advected.back()));
  }

  ordered_json summary;
  summary["r0"] = r0;
  summary["eps"] = eps;
  summary["T"] = T;
  summary["max_gap_deviation"] = max_deviation;
  summary["kernel_energy"] = flow.kernel_energy;
  summary["analytic_energy"] = oracles::two_particle_solution(r0, eps, 0.0).energy;
  if (grid_min_distance >= 0.0) summary["grid_min_distance"] = grid_min_distance;
  std::ofstream(out_dir + "/summary.json", std::ios::binary) << summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-Distance point-cloud registration toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "cap the OpenMP worker pool");

  // register
  auto* reg = app.add_subcommand("register", "deform a source cloud onto a target");
  std::string reg_config, reg_source, reg_target, reg_out;
  std::optional<std::uint64_t> reg_seed;
  std::optional<std::string> reg_mode;
  std::optional<Eigen::Index> reg_projections;
  Eigen::Index reg_grid = 0;
  reg->add_option("--config", reg_config, "registration config JSON")->required();
  reg->add_option("--source", reg_source, "source point cloud CSV")->required();
  reg->add_option("--target", reg_target, "target point cloud CSV")->required();
  reg->add_option("--out", reg_out, "output directory")->required();
  reg->add_option("--seed", reg_seed, "seed override");
  reg->add_option("--mode", reg_mode, "exact|sliced kernel mode override");
  reg->add_option("--projections", reg_projections, "kernel projections override");
  reg->add_option("--grid", reg_grid, "advect an N-per-side passive grid");

  // bench-sliced
  auto* bench = app.add_subcommand("bench-sliced", "estimator error and timing sweep");
  std::vector<Eigen::Index> bench_n, bench_p;
  Eigen::Index bench_d = 3;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  bench->add_option("--n", bench_n, "point counts")->required()->delimiter(',');
  bench->add_option("--projections", bench_p, "projection counts")
      ->required()
      ->delimiter(',');
  bench->add_option("--d", bench_d, "ambient dimension");
  bench->add_option("--seed", bench_seed, "base seed");
  bench->add_option("--out", bench_out, "output CSV path")->required();

  // interpolate
  auto* interp = app.add_subcommand("interpolate", "kernel interpolation / ridge fit");
  std::string it_config, it_points, it_values, it_queries, it_out;
  interp->add_option("--config", it_config, "interpolation config JSON")->required();
  interp->add_option("--points", it_points, "design points CSV")->required();
  interp->add_option("--values", it_values, "values CSV (one row per point)")->required();
  interp->add_option("--queries", it_queries, "query points CSV")->required();
  interp->add_option("--out", it_out, "output directory")->required();

  // oracle-two-particles
  auto* oracle = app.add_subcommand("oracle-two-particles",
                                    "closed-form two-particle fixture");
  double or_r0 = 1.0, or_eps = 0.04;
  Eigen::Index or_T = 1000, or_grid = 0;
  std::string or_out;
  oracle->add_option("--r0", or_r0, "initial gap");
  oracle->add_option("--eps", or_eps, "target gap");
  oracle->add_option("--T", or_T, "time steps");
  oracle->add_option("--grid", or_grid, "advect an N-per-side grid");
  oracle->add_option("--out", or_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (reg->parsed())
      return cmd_register(reg_config, reg_source, reg_target, reg_out, reg_seed,
                          reg_mode, reg_projections, reg_grid);
    if (bench->parsed())
      return cmd_bench_sliced(bench_n, bench_p, bench_d, bench_seed, bench_out);
    if (interp->parsed())
      return cmd_interpolate(it_config, it_points, it_values, it_queries, it_out);
    if (oracle->parsed())
      return cmd_oracle_two_particles(or_r0, or_eps, or_T, or_out, or_grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
