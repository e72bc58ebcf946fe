#include "edreg/registration.hpp"

#include "edreg/core.hpp"
#include "edreg/kernels.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

using namespace edreg;

namespace {

MomentPath random_path(Eigen::Index T, Eigen::Index n, Eigen::Index d, unsigned seed,
                       bool translations, double scale) {
  MomentPath path = MomentPath::zeros(T, n, d, translations);
  for (Eigen::Index t = 0; t < T; ++t)
    path.momenta[static_cast<std::size_t>(t)] =
        scale * testutil::random_matrix(n, d, seed + 13 * static_cast<unsigned>(t));
  if (translations)
    path.translations = 0.2 * testutil::random_matrix(T, d, seed + 777);
  return path;
}

/// Central finite differences of the objective over every path coordinate.
MomentPath fd_gradient(const MomentPath& path, double lambda, double rho,
                       const RegistrationConfig& cfg, const PointCloud& X0,
                       const PointCloud& Y0, double h = 1e-5) {
  MomentPath grad = MomentPath::zeros(path.steps(), path.size(), path.dim(),
                                      path.translations.has_value());
  MomentPath work = path;
  for (Eigen::Index t = 0; t < path.steps(); ++t)
    for (Eigen::Index i = 0; i < path.size(); ++i)
      for (Eigen::Index c = 0; c < path.dim(); ++c) {
        auto& entry = work.momenta[static_cast<std::size_t>(t)](i, c);
        const double saved = entry;
        entry = saved + h;
        const double fp = objective(work, lambda, rho, cfg, X0, Y0);
        entry = saved - h;
        const double fm = objective(work, lambda, rho, cfg, X0, Y0);
        entry = saved;
        grad.momenta[static_cast<std::size_t>(t)](i, c) = (fp - fm) / (2.0 * h);
      }
  if (path.translations)
    for (Eigen::Index t = 0; t < path.steps(); ++t)
      for (Eigen::Index c = 0; c < path.dim(); ++c) {
        auto& entry = (*work.translations)(t, c);
        const double saved = entry;
        entry = saved + h;
        const double fp = objective(work, lambda, rho, cfg, X0, Y0);
        entry = saved - h;
        const double fm = objective(work, lambda, rho, cfg, X0, Y0);
        entry = saved;
        (*grad.translations)(t, c) = (fp - fm) / (2.0 * h);
      }
  return grad;
}

double max_rel_error(const MomentPath& got, const MomentPath& want) {
  double scale = 0.0, err = 0.0;
  for (std::size_t t = 0; t < want.momenta.size(); ++t) {
    scale = std::max(scale, want.momenta[t].cwiseAbs().maxCoeff());
    err = std::max(err, (got.momenta[t] - want.momenta[t]).cwiseAbs().maxCoeff());
  }
  if (want.translations) {
    scale = std::max(scale, want.translations->cwiseAbs().maxCoeff());
    err = std::max(err,
                   (*got.translations - *want.translations).cwiseAbs().maxCoeff());
  }
  return err / std::max(scale, 1e-12);
}

}  // namespace

TEST_CASE("objective closed forms") {
  const PointCloud X = testutil::random_cloud(6, 2, 1);

  SUBCASE("zero momenta on matched clouds cost nothing") {
    RegistrationConfig cfg;
    cfg.T = 3;
    const MomentPath zero = MomentPath::zeros(3, 6, 2, true);
    CHECK(objective(zero, 0.7, 2.0, cfg, X, X) == doctest::Approx(0.0));
  }
  SUBCASE("zero momenta on distinct clouds cost the pure loss terms") {
    RegistrationConfig cfg;
    cfg.T = 3;
    const PointCloud Y = testutil::random_cloud(6, 2, 2);
    const double L = exact_ed_loss(X, Y);
    const MomentPath zero = MomentPath::zeros(3, 6, 2, true);
    const double lambda = 0.7, rho = 2.0;
    CHECK(objective(zero, lambda, rho, cfg, X, Y) ==
          doctest::Approx(0.5 * rho * L * L + lambda * L).epsilon(1e-12));
  }
  SUBCASE("analytic two-particle momenta cost the closed-form energy") {
    const double r0 = 1.0, eps = 0.04;
    const Eigen::Index T = 1000;
    Matrix pts(2, 2);
    pts << 0.5 * r0, 0.0, -0.5 * r0, 0.0;
    RegistrationConfig cfg;
    cfg.T = T;
    MomentPath path;
    path.momenta = oracles::two_particle_momenta(r0, eps, T);
    path.translations = Matrix::Zero(T, 2);
    // lambda = rho = 0 isolates the kernel-energy term.
    const double value = objective(path, 0.0, 0.0, cfg, PointCloud(pts), X);
    CHECK(testutil::rel_error(value, oracles::two_particle_solution(r0, eps, 0.0).energy) <
          0.02);
  }
}

TEST_CASE("adjoint gradient matches finite differences") {
  const Eigen::Index n = 5, d = 2, T = 3;
  const PointCloud X0 = testutil::random_cloud(n, d, 3);
  const PointCloud Y0 = testutil::random_cloud(n, d, 4);

  SUBCASE("energy-distance kernel, exact loss, all regularizations") {
    for (const Regularization& reg :
         {Regularization::none(), Regularization::tv_squared(0.5),
          Regularization::l2_momentum(0.3)}) {
      RegistrationConfig cfg;
      cfg.T = T;
      cfg.regularization = reg;
      const MomentPath path = random_path(T, n, d, 21, true, 0.4);
      const MomentPath adjoint = gradient(path, 0.3, 1.5, cfg, X0, Y0);
      const MomentPath fd = fd_gradient(path, 0.3, 1.5, cfg, X0, Y0);
      CHECK(max_rel_error(adjoint, fd) < 1e-4);
    }
  }
  SUBCASE("gaussian kernel and gaussian loss") {
    RegistrationConfig cfg;
    cfg.T = T;
    cfg.kernel = KernelSpec::gaussian(0.9);
    cfg.loss = LossSpec::gaussian_mmd(0.7);
    const MomentPath path = random_path(T, n, d, 22, false, 0.5);
    const MomentPath adjoint = gradient(path, 0.2, 0.8, cfg, X0, Y0);
    const MomentPath fd = fd_gradient(path, 0.2, 0.8, cfg, X0, Y0);
    CHECK(max_rel_error(adjoint, fd) < 1e-4);
  }
  SUBCASE("sliced kernel and sliced loss with frozen directions") {
    RegistrationConfig cfg;
    cfg.T = T;
    cfg.mode = FlowMode::Kind::Sliced;
    cfg.kernel_projections = 16;
    cfg.loss = LossSpec::sliced_ed(24);
    cfg.seed = 5;
    const MomentPath path = random_path(T, n, d, 23, true, 0.4);
    const MomentPath adjoint = gradient(path, 0.1, 1.0, cfg, X0, Y0);
    const MomentPath fd = fd_gradient(path, 0.1, 1.0, cfg, X0, Y0);
    CHECK(max_rel_error(adjoint, fd) < 1e-4);
  }
  SUBCASE("zero momenta at the global minimum have zero gradient") {
    RegistrationConfig cfg;
    cfg.T = 2;
    const MomentPath zero = MomentPath::zeros(2, n, d, true);
    const MomentPath g = gradient(zero, 0.0, 1.0, cfg, X0, X0);
    for (const Matrix& m : g.momenta) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.translations->cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("translation-matched targets zero out the translation gradient") {
    Eigen::RowVectorXd c(d);
    c << 0.3, -0.6;
    const PointCloud Yt(Matrix(X0.points.rowwise() + c));
    RegistrationConfig cfg;
    cfg.T = 3;
    MomentPath path = MomentPath::zeros(3, n, d, true);
    path.translations->rowwise() = c;  // constant translation path lands on Yt
    const MomentPath g = gradient(path, 0.4, 2.0, cfg, X0, Yt);
    CHECK(g.translations->cwiseAbs().maxCoeff() < 1e-12);
    for (const Matrix& m : g.momenta) CHECK(m.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("register_clouds") {
  SUBCASE("identical clouds converge immediately") {
    const PointCloud X = testutil::random_cloud(7, 2, 5);
    RegistrationConfig cfg;
    cfg.T = 4;
    cfg.epsilon = 1e-8;
    const RegistrationResult res = register_clouds(X, X, cfg);
    CHECK(res.converged);
    CHECK(res.loss_history.size() == 1);
    CHECK(res.flow.kernel_energy == doctest::Approx(0.0));
    for (const Matrix& p : res.path.momenta) CHECK(p.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("pure translations are absorbed by the null space") {
    const PointCloud X = testutil::random_cloud(10, 2, 6);
    Eigen::RowVectorXd c(2);
    c << 0.5, -0.25;
    const PointCloud Y(Matrix(X.points.rowwise() + c));
    RegistrationConfig cfg;
    cfg.T = 4;
    cfg.epsilon = 1e-8;
    cfg.k_max = 60;
    cfg.inner.max_iters = 80;
    const RegistrationResult res = register_clouds(X, Y, cfg);
    CHECK(res.converged);
    CHECK(res.flow.kernel_energy <= 1e-6);
  }
  SUBCASE("penalty and multiplier updates are monotone") {
    const PointCloud X = testutil::random_cloud(8, 2, 7);
    const PointCloud Y = testutil::random_cloud(8, 2, 8);
    RegistrationConfig cfg;
    cfg.T = 3;
    cfg.k_max = 6;
    cfg.epsilon = 1e-14;  // unreachable: exercise the rho growth path
    cfg.inner.max_iters = 5;
    const RegistrationResult res = register_clouds(X, Y, cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.rho_final ==
          doctest::Approx(std::min(cfg.rho_init * std::pow(cfg.rho_growth, 6.0),
                                   cfg.rho_cap)));
    CHECK(res.lambda_final >= 0.0);
    CHECK(res.loss_history.size() == 6);
  }
  SUBCASE("translation invariance of the optimum") {
    const PointCloud X = testutil::random_cloud(6, 2, 9);
    Matrix yp = testutil::random_cloud(6, 2, 10).points * 0.3;
    const PointCloud Y(Matrix(X.points + yp));
    RegistrationConfig cfg;
    cfg.T = 3;
    cfg.k_max = 4;
    cfg.epsilon = 1e-6;
    cfg.inner.max_iters = 25;
    cfg.seed = 11;
    const RegistrationResult base = register_clouds(X, Y, cfg);

    Eigen::RowVectorXd c(2);
    c << 10.0, -3.0;
    const RegistrationResult moved =
        register_clouds(PointCloud(Matrix(X.points.rowwise() + c)),
                        PointCloud(Matrix(Y.points.rowwise() + c)), cfg);
    for (std::size_t t = 0; t < base.path.momenta.size(); ++t)
      CHECK((moved.path.momenta[t] - base.path.momenta[t]).cwiseAbs().maxCoeff() < 1e-8);
    for (std::size_t t = 0; t < base.flow.trajectories.size(); ++t)
      CHECK((moved.flow.trajectories[t] -
             (base.flow.trajectories[t].rowwise() + c))
                .cwiseAbs()
                .maxCoeff() < 1e-8);
  }
  SUBCASE("bit-for-bit reproducibility in exact mode") {
    const PointCloud X = testutil::random_cloud(6, 2, 12);
    const PointCloud Y = testutil::random_cloud(6, 2, 13);
    RegistrationConfig cfg;
    cfg.T = 3;
    cfg.k_max = 3;
    cfg.inner.max_iters = 10;
    const RegistrationResult a = register_clouds(X, Y, cfg);
    const RegistrationResult b = register_clouds(X, Y, cfg);
    for (std::size_t t = 0; t < a.path.momenta.size(); ++t)
      CHECK((a.path.momenta[t] - b.path.momenta[t]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.flow.kernel_energy == b.flow.kernel_energy);
    CHECK(a.loss_history == b.loss_history);
  }
  SUBCASE("the returned flow satisfies the TV / L2 linkage") {
    const PointCloud X = testutil::random_cloud(8, 2, 14);
    const PointCloud Y = testutil::random_cloud(8, 2, 15);
    RegistrationConfig cfg;
    cfg.T = 4;
    cfg.k_max = 5;
    cfg.regularization = Regularization::l2_momentum(1e-4);
    cfg.inner.max_iters = 20;
    const RegistrationResult res = register_clouds(X, Y, cfg);
    double sum_sq = 0.0;
    for (const Matrix& p : res.path.momenta) sum_sq += zero_mean_project(p).squaredNorm();
    const double bound = std::sqrt(static_cast<double>(X.size())) *
                         std::sqrt(sum_sq / static_cast<double>(cfg.T));
    CHECK(res.flow.tv_integral <= bound + 1e-12);
    const auto [lower, upper] = bilipschitz_bounds(res.flow);
    CHECK(lower > 0.0);
    CHECK(std::isfinite(upper));
  }
}

TEST_CASE("inner solves are monotone") {
  const PointCloud X = testutil::random_cloud(6, 2, 16);
  const PointCloud Y = testutil::random_cloud(6, 2, 17);
  RegistrationConfig cfg;
  cfg.T = 3;

  std::vector<double> values;
  const Eigen::Index n = 6, d = 2, T = 3;
  MomentPath path = random_path(T, n, d, 99, true, 0.2);
  // Drive lbfgs_minimize directly through the public objective/gradient pair
  // and record accepted values.
  Vector x(T * n * d + T * d);
  Eigen::Index pos = 0;
  for (const Matrix& p : path.momenta)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < d; ++c) x(pos++) = p(i, c);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index c = 0; c < d; ++c) x(pos++) = (*path.translations)(t, c);

  const ObjectiveFn fn = [&](const Vector& v, Vector& g) {
    MomentPath trial = MomentPath::zeros(T, n, d, true);
    Eigen::Index at = 0;
    for (Matrix& p : trial.momenta)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < d; ++c) p(i, c) = v(at++);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index c = 0; c < d; ++c) (*trial.translations)(t, c) = v(at++);
    const MomentPath grad = gradient(trial, 0.1, 1.0, cfg, X, Y);
    at = 0;
    g.resize(v.size());
    for (const Matrix& p : grad.momenta)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < d; ++c) g(at++) = p(i, c);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index c = 0; c < d; ++c) g(at++) = (*grad.translations)(t, c);
    const double value = objective(trial, 0.1, 1.0, cfg, X, Y);
    return value;
  };

  LbfgsOptions opts;
  opts.max_iters = 15;
  Vector probe = x;
  Vector g0(x.size());
  double prev = fn(probe, g0);
  // Track monotonicity by re-running with increasing iteration caps.
  for (int cap = 1; cap <= 15; cap += 2) {
    LbfgsOptions o = opts;
    o.max_iters = cap;
    const LbfgsResult res = lbfgs_minimize(fn, x, o);
    CHECK(res.value <= prev + 1e-12);
    prev = res.value;
  }
}
