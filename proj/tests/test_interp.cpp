#include "edreg/interp.hpp"

#include "edreg/kernels.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

#include <random>

using namespace edreg;

namespace {

const KernelSpec kEd = KernelSpec::energy_distance();

Matrix two_point_line() {
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  return pts;
}

}  // namespace

TEST_CASE("polynomial basis dimensions") {
  CHECK(PolynomialBasis(-1, 3).size() == 0);
  CHECK(PolynomialBasis(0, 3).size() == 1);
  CHECK(PolynomialBasis(1, 2).size() == 3);
  CHECK(PolynomialBasis(2, 2).size() == 6);
  CHECK(PolynomialBasis(3, 3).size() == 20);  // C(3+3, 3)

  const PolynomialBasis basis(1, 2);
  Matrix pts(1, 2);
  pts << 2.0, 5.0;
  const Matrix P = basis.evaluate(pts);
  CHECK(P.rows() == 1);
  CHECK(P.cols() == 3);
  CHECK(P(0, 0) == 1.0);  // constant first in graded order
  CHECK(P.row(0).sum() == doctest::Approx(8.0));
}

TEST_CASE("check_unisolvent") {
  SUBCASE("degree 0 accepts any nonempty set") {
    CHECK(check_unisolvent(testutil::random_cloud(1, 3, 1), 0));
    CHECK(check_unisolvent(testutil::random_cloud(9, 2, 2), 0));
  }
  SUBCASE("collinear points fail degree 1 in the plane") {
    Matrix pts(3, 2);
    pts << 0, 0, 1, 1, 2, 2;
    CHECK_FALSE(check_unisolvent(PointCloud(pts), 1));
  }
  SUBCASE("a triangle passes degree 1") {
    Matrix pts(3, 2);
    pts << 0, 0, 1, 0, 0, 1;
    CHECK(check_unisolvent(PointCloud(pts), 1));
  }
}

TEST_CASE("solve_exact_cpd closed forms") {
  SUBCASE("two points on the line") {
    Matrix Y(2, 1);
    Y << 0.0, 1.0;
    const CpdSolution sol = solve_exact_cpd(kEd, PointCloud(two_point_line()), Y, 0);
    CHECK(sol.gamma(0, 0) == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(sol.gamma(1, 0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(sol.alpha(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(sol.semi_norm_sq(0) == doctest::Approx(0.5).epsilon(1e-10));
  }
  SUBCASE("general two-point closed form") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> unif(0.2, 3.0);
    for (int rep = 0; rep < 10; ++rep) {
      const double r = unif(gen), y1 = unif(gen) - 1.5, y2 = unif(gen) - 1.5;
      Matrix pts(2, 1), Y(2, 1);
      pts << 0.0, r;
      Y << y1, y2;
      const CpdSolution sol = solve_exact_cpd(kEd, PointCloud(pts), Y, 0);
      CHECK(sol.gamma(0, 0) == doctest::Approx((y1 - y2) / (2.0 * r)).epsilon(1e-9));
      CHECK(sol.alpha(0, 0) == doctest::Approx(0.5 * (y1 + y2)).epsilon(1e-9));
      CHECK(sol.semi_norm_sq(0) ==
            doctest::Approx((y1 - y2) * (y1 - y2) / (2.0 * r)).epsilon(1e-9));
    }
  }
  SUBCASE("constant data lies in the null space") {
    const PointCloud X = testutil::random_cloud(12, 2, 6);
    const Matrix Y = Matrix::Constant(12, 1, 3.25);
    const CpdSolution sol = solve_exact_cpd(kEd, X, Y, 0);
    CHECK(sol.gamma.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(sol.alpha(0, 0) == doctest::Approx(3.25).epsilon(1e-10));
    CHECK(sol.semi_norm_sq(0) < 1e-10);
  }
  SUBCASE("random instances interpolate and satisfy the moment constraint") {
    for (unsigned seed = 0; seed < 8; ++seed) {
      const PointCloud X = testutil::random_cloud(20, 2, 100 + seed);
      const Matrix Y = testutil::random_matrix(20, 2, 200 + seed);
      for (int degree : {0, 1}) {
        const CpdSolution sol = solve_exact_cpd(kEd, X, Y, degree);
        const Matrix fitted = evaluate_interpolant(kEd, X, sol, degree, X);
        CHECK(testutil::rel_error(fitted, Y) < 1e-8);
        const Matrix P = PolynomialBasis(degree, 2).evaluate(X.points);
        CHECK((P.transpose() * sol.gamma).cwiseAbs().maxCoeff() <= 1e-8 * Y.norm());
      }
    }
  }
  SUBCASE("degenerate inputs are rejected") {
    Matrix dup(3, 2);
    dup << 0, 0, 1, 1, 0, 0;
    CHECK_THROWS_AS(solve_exact_cpd(kEd, PointCloud(dup), Matrix::Zero(3, 1), 0),
                    DuplicatePointsError);
    Matrix collinear(3, 2);
    collinear << 0, 0, 1, 1, 2, 2;
    CHECK_THROWS_AS(solve_exact_cpd(kEd, PointCloud(collinear), Matrix::Zero(3, 1), 1),
                    NotUnisolventError);
  }
}

TEST_CASE("solve_ridge_pd") {
  const KernelSpec gauss = KernelSpec::gaussian(0.8);
  SUBCASE("lambda = 0 interpolates") {
    const PointCloud X = testutil::random_cloud(15, 2, 7);
    const Matrix Y = testutil::random_matrix(15, 1, 8);
    const Matrix gamma = solve_ridge_pd(gauss, X, Y, 0.0);
    const Matrix K = gram(gauss, X);
    CHECK(testutil::rel_error(Matrix(K * gamma), Y) < 1e-8);
  }
  SUBCASE("large lambda shrinks toward Y / lambda") {
    const PointCloud X = testutil::random_cloud(10, 2, 9);
    const Matrix Y = testutil::random_matrix(10, 1, 10);
    const double lambda = 1e8;
    const Matrix gamma = solve_ridge_pd(gauss, X, Y, lambda);
    CHECK(testutil::rel_error(gamma, Matrix(Y / lambda)) < 1e-6);
  }
  SUBCASE("n = 2 closed form by hand inversion") {
    Matrix pts(2, 1), Y(2, 1);
    pts << 0.0, 1.0;
    Y << 1.0, -2.0;
    const double lambda = 0.3;
    const double k01 = std::exp(-0.5 / (0.8 * 0.8));
    // Invert [[1 + lambda, k], [k, 1 + lambda]] directly.
    const double det = (1.0 + lambda) * (1.0 + lambda) - k01 * k01;
    const double g0 = ((1.0 + lambda) * Y(0) - k01 * Y(1)) / det;
    const double g1 = ((1.0 + lambda) * Y(1) - k01 * Y(0)) / det;
    const Matrix gamma = solve_ridge_pd(gauss, PointCloud(pts), Y, lambda);
    CHECK(gamma(0, 0) == doctest::Approx(g0).epsilon(1e-12));
    CHECK(gamma(1, 0) == doctest::Approx(g1).epsilon(1e-12));
  }
  SUBCASE("the ED kernel is rejected") {
    CHECK_THROWS_AS(solve_ridge_pd(kEd, testutil::random_cloud(4, 1, 11),
                                   Matrix::Zero(4, 1), 0.1),
                    InvalidArgument);
  }
}

TEST_CASE("solve_ridge_cpd") {
  SUBCASE("small lambda approaches the exact solution") {
    const PointCloud X = testutil::random_cloud(25, 2, 12);
    const Matrix Y = testutil::random_matrix(25, 1, 13);
    const CpdSolution exact = solve_exact_cpd(kEd, X, Y, 0);
    const CpdSolution ridge = solve_ridge_cpd(kEd, X, Y, 0, 1e-10);
    CHECK(testutil::rel_error(ridge.gamma, exact.gamma) < 1e-6);
    CHECK(testutil::rel_error(ridge.alpha, exact.alpha) < 1e-6);
  }
  SUBCASE("polynomial data is reproduced by the polynomial part") {
    const PointCloud X = testutil::random_cloud(18, 2, 14);
    const Matrix P = PolynomialBasis(1, 2).evaluate(X.points);
    Matrix coeffs(3, 1);
    coeffs << 0.5, -2.0, 1.0;
    const Matrix Y = P * coeffs;
    const CpdSolution sol = solve_ridge_cpd(kEd, X, Y, 1, 1e-4);
    CHECK(sol.gamma.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(testutil::rel_error(sol.alpha, coeffs) < 1e-6);
  }
  SUBCASE("ridge solution is a constrained local minimum of the objective") {
    const PointCloud X = testutil::random_cloud(12, 2, 15);
    const Matrix Y = testutil::random_matrix(12, 1, 16);
    const double lambda = 0.05;
    const CpdSolution sol = solve_ridge_cpd(kEd, X, Y, 0, lambda);
    const Matrix K = gram(kEd, X);
    const Matrix P = PolynomialBasis(0, 2).evaluate(X.points);
    const auto objective = [&](const Matrix& gamma, const Matrix& alpha) {
      return (K * gamma + P * alpha - Y).squaredNorm() +
             lambda * (gamma.transpose() * K * gamma)(0, 0);
    };
    const double at_solution = objective(sol.gamma, sol.alpha);
    std::mt19937 gen(17);
    std::normal_distribution<double> normal;
    for (int probe = 0; probe < 10; ++probe) {
      Matrix dir(12, 1);
      for (Eigen::Index i = 0; i < 12; ++i) dir(i, 0) = normal(gen);
      dir.array() -= dir.mean();  // respect P^T gamma = 0
      for (double t : {1e-3, -1e-3, 1e-1, -1e-1})
        CHECK(objective(sol.gamma + t * dir, sol.alpha) >= at_solution - 1e-12);
    }
  }
}

TEST_CASE("induced metric") {
  SUBCASE("polynomial values span the null space") {
    const PointCloud X = testutil::random_cloud(14, 2, 18);
    const Matrix P = PolynomialBasis(1, 2).evaluate(X.points);
    Matrix coeffs(3, 1);
    coeffs << 1.0, 0.25, -0.75;
    const Matrix Y = P * coeffs;
    CHECK(induced_metric(kEd, X, Y, 1) <= 1e-10 * Y.squaredNorm());
    const double with_poly = induced_metric(kEd, X, Y, 1, 1.0);
    CHECK(with_poly == doctest::Approx((P * coeffs).squaredNorm()).epsilon(1e-8));
  }
  SUBCASE("two-point example") {
    Matrix Y(2, 1);
    Y << 0.0, 1.0;
    CHECK(induced_metric(kEd, PointCloud(two_point_line()), Y, 0) ==
          doctest::Approx(0.5).epsilon(1e-10));
  }
  SUBCASE("strictly positive off the null space") {
    const PointCloud X = testutil::random_cloud(10, 2, 19);
    const Matrix P = PolynomialBasis(0, 2).evaluate(X.points);
    std::mt19937 gen(20);
    std::normal_distribution<double> normal;
    int checked = 0;
    for (int rep = 0; rep < 50; ++rep) {
      Matrix Y(10, 1);
      for (Eigen::Index i = 0; i < 10; ++i) Y(i, 0) = normal(gen);
      // Skip the measure-zero event of Y lying in span(P) = constants.
      if ((Y.array() - Y.mean()).abs().maxCoeff() < 1e-12) continue;
      CHECK(induced_metric(kEd, X, Y, 0) > 0.0);
      ++checked;
    }
    CHECK(checked == 50);
  }
  SUBCASE("1-homogeneity in the point scale") {
    for (int degree : {0, 1}) {
      const PointCloud X = testutil::random_cloud(9, 2, 21 + degree);
      const Matrix Y = testutil::random_matrix(9, 1, 23 + degree);
      const double base = induced_metric(kEd, X, Y, degree);
      for (double r : {0.5, 2.0, 7.5}) {
        const double scaled =
            induced_metric(kEd, PointCloud(Matrix(r * X.points)), Y, degree);
        CHECK(testutil::rel_error(scaled, base / r) < 1e-10);
      }
    }
  }
}

TEST_CASE("minimal semi-norm among interpolants on supersets") {
  const PointCloud X = testutil::random_cloud(10, 2, 24);
  const Matrix Y = testutil::random_matrix(10, 1, 25);
  const CpdSolution sol = solve_exact_cpd(kEd, X, Y, 0);
  const double base = sol.semi_norm_sq(0);

  std::mt19937 gen(26);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    // Interpolate the same data plus free values on 4 extra points.
    Matrix extra(4, 2);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 2; ++j) extra(i, j) = 2.0 * normal(gen);
    Matrix pts(14, 2), vals(14, 1);
    pts.topRows(10) = X.points;
    pts.bottomRows(4) = extra;
    vals.topRows(10) = Y;
    for (Eigen::Index i = 0; i < 4; ++i) vals(10 + i, 0) = normal(gen);
    const CpdSolution alt = solve_exact_cpd(kEd, PointCloud(pts), vals, 0);
    CHECK(alt.semi_norm_sq(0) >= base - 1e-9);
  }
}

TEST_CASE("evaluate_interpolant") {
  SUBCASE("kernel part plus polynomial part at a midpoint") {
    Matrix Y(2, 1);
    Y << 0.0, 1.0;
    const CpdSolution sol = solve_exact_cpd(kEd, PointCloud(two_point_line()), Y, 0);
    Matrix query(1, 1);
    query << 0.5;
    const Matrix out =
        evaluate_interpolant(kEd, PointCloud(two_point_line()), sol, 0, PointCloud(query));
    CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
  }
  SUBCASE("pure polynomial coefficients evaluate the polynomial") {
    const PointCloud X = testutil::random_cloud(6, 2, 27);
    CpdSolution sol;
    sol.gamma = Matrix::Zero(6, 1);
    sol.alpha = Matrix::Zero(3, 1);
    sol.alpha << 2.0, -1.0, 0.5;
    sol.semi_norm_sq = Vector::Zero(1);
    const PointCloud Q = testutil::random_cloud(5, 2, 28);
    const Matrix out = evaluate_interpolant(kEd, X, sol, 1, Q);
    for (Eigen::Index q = 0; q < 5; ++q)
      CHECK(out(q, 0) ==
            doctest::Approx(2.0 - Q.points(q, 0) + 0.5 * Q.points(q, 1)).epsilon(1e-12));
  }
}
