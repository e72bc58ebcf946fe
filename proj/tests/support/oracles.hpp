#pragma once

#include "edreg/types.hpp"

// Independent ground-truth generators for the test and acceptance suites.
// Everything here is written from the closed forms directly and shares no
// code with the library paths it validates.

namespace edreg::oracles {

/// Closed-form two-particle squeeze: particles at (+-r0/2, 0) matched to
/// (+-eps/2, 0). gamma_0 = 1 - sqrt(eps/r0), gamma_t = gamma_0/(1 - gamma_0 t),
/// r_t = r0 (1 - gamma_0 t)^2, total energy (1 - sqrt(eps/r0))^2 r0.
struct TwoParticleState {
  double gamma;   // momentum magnitude at time t
  double gap;     // inter-particle distance r_t
  double energy;  // total matching energy (constant in t)
};

TwoParticleState two_particle_solution(double r0, double eps, double t);

/// Momentum path of the two-particle example sampled on the uniform grid
/// {0, 1/T, ...}: point 0 at (+r0/2, 0) carries (-gamma_t, 0), point 1 at
/// (-r0/2, 0) carries (+gamma_t, 0).
std::vector<Matrix> two_particle_momenta(double r0, double eps, Eigen::Index T);

/// Analytic gradient of the quadratic-sum MMD loss w.r.t. the source cloud,
/// by direct differentiation of every pair term. Energy-Distance and
/// Gaussian kernels.
Matrix brute_force_mmd_gradient(const Matrix& X, const Matrix& Y,
                                const KernelSpec& kernel);

}  // namespace edreg::oracles
