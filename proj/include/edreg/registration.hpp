#pragma once

#include "edreg/flow.hpp"
#include "edreg/lbfgs.hpp"
#include "edreg/types.hpp"

#include <cstdint>
#include <vector>

namespace edreg {

struct LossSpec {
  enum class Kind { SlicedEd, ExactEd, GaussianMmd } kind = Kind::ExactEd;
  Eigen::Index projections = 200;  // sliced ED
  double sigma = 1.0;              // Gaussian MMD

  static LossSpec exact_ed() { return LossSpec{}; }
  static LossSpec sliced_ed(Eigen::Index projections) {
    LossSpec l;
    l.kind = Kind::SlicedEd;
    l.projections = projections;
    return l;
  }
  static LossSpec gaussian_mmd(double sigma) {
    LossSpec l;
    l.kind = Kind::GaussianMmd;
    l.sigma = sigma;
    return l;
  }
};

struct Regularization {
  enum class Kind { None, TvSquared, L2Momentum } kind = Kind::None;
  double beta = 0.0;      // TV^2 weight
  double lambda_m = 0.0;  // L^2 momentum weight

  static Regularization none() { return Regularization{}; }
  static Regularization tv_squared(double beta) {
    Regularization r;
    r.kind = Kind::TvSquared;
    r.beta = beta;
    return r;
  }
  static Regularization l2_momentum(double lambda_m) {
    Regularization r;
    r.kind = Kind::L2Momentum;
    r.lambda_m = lambda_m;
    return r;
  }
};

struct RegistrationConfig {
  KernelSpec kernel = KernelSpec::energy_distance();
  LossSpec loss = LossSpec::exact_ed();
  FlowMode::Kind mode = FlowMode::Kind::Exact;
  Eigen::Index kernel_projections = 64;  // flow directions per step in sliced mode
  Eigen::Index T = 16;
  int k_max = 50;
  double epsilon = 1e-3;  // tolerance on the loss constraint
  double rho_init = 1.0;
  double rho_growth = 1.2;
  double rho_cap = 1e8;
  Regularization regularization = Regularization::none();
  std::uint64_t seed = 0;
  LbfgsOptions inner;

  void validate() const {
    if (!(epsilon > 0.0)) throw InvalidArgument("RegistrationConfig: epsilon > 0");
    if (!(rho_init > 0.0)) throw InvalidArgument("RegistrationConfig: rho_init > 0");
    if (T < 1) throw InvalidArgument("RegistrationConfig: T >= 1");
    if (k_max < 1) throw InvalidArgument("RegistrationConfig: k_max >= 1");
  }
};

struct RegistrationResult {
  MomentPath path;
  FlowResult flow;
  FlowMode flow_mode;  // mode used for the final flow (advection, inversion)
  std::vector<double> loss_history;
  std::vector<double> energy_history;
  double lambda_final = 0.0;
  double rho_final = 0.0;
  bool converged = false;
};

/// Augmented-Lagrangian value
///   (rho/2) L(X_1, Y0)^2 + lambda L(X_1, Y0)
///   + (1/T) sum_t (1/2) <Pbar_t, K_{X_t} Pbar_t> + regularization,
/// with trajectories from the forward Euler flow. Sliced loss/kernel
/// directions derive from (seed, "outer", outer_k) and are frozen for the
/// whole inner solve.
double objective(const MomentPath& path, double lambda, double rho,
                 const RegistrationConfig& cfg, const PointCloud& X0,
                 const PointCloud& Y0, std::uint64_t outer_k = 1);

/// Exact gradient of the discrete objective by reverse accumulation through
/// the Euler recursion (including the dependence of K_{X_t} on X_t and the
/// zero-mean projection). In sliced mode it differentiates the sliced
/// estimator with its fixed directions; cost stays O(T n log n).
MomentPath gradient(const MomentPath& path, double lambda, double rho,
                    const RegistrationConfig& cfg, const PointCloud& X0,
                    const PointCloud& Y0, std::uint64_t outer_k = 1);

/// Augmented-Lagrangian registration: starts from zero momenta, alternates
/// inner LBFGS solves with multiplier/penalty updates
/// (lambda += rho L; rho *= rho_growth while L > epsilon, capped), and stops
/// early once the loss constraint is met. Optimization failure is reported
/// through converged = false, never as an exception.
RegistrationResult register_clouds(const PointCloud& X0, const PointCloud& Y0,
                                   const RegistrationConfig& cfg);

}  // namespace edreg
