#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace edreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when a domain type fails its construction invariants.
class InvalidArgument : public std::runtime_error {
 public:
  explicit InvalidArgument(const std::string& what) : std::runtime_error(what) {}
};

/// n points in R^d, one point per row. Coordinates are dimensionless doubles.
struct PointCloud {
  Matrix points;

  PointCloud() = default;
  explicit PointCloud(Matrix pts) : points(std::move(pts)) { validate(); }

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }

  void validate() const {
    if (points.rows() < 1 || points.cols() < 1)
      throw InvalidArgument("PointCloud: need n >= 1 and d >= 1");
    if (!points.allFinite())
      throw InvalidArgument("PointCloud: non-finite coordinate");
  }
};

/// Atomic vector-valued measure: sum_i gamma_i delta_{x_i} with gamma_i in R^d.
struct DiscreteVectorMeasure {
  Matrix points;   // n x d
  Matrix moments;  // n x d

  DiscreteVectorMeasure() = default;
  DiscreteVectorMeasure(Matrix pts, Matrix mts)
      : points(std::move(pts)), moments(std::move(mts)) {
    validate();
  }

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }

  void validate() const {
    if (points.rows() < 1 || points.cols() < 1)
      throw InvalidArgument("DiscreteVectorMeasure: need n >= 1 and d >= 1");
    if (points.rows() != moments.rows() || points.cols() != moments.cols())
      throw InvalidArgument("DiscreteVectorMeasure: points/moments shape mismatch");
    if (!points.allFinite() || !moments.allFinite())
      throw InvalidArgument("DiscreteVectorMeasure: non-finite entry");
  }
};

enum class KernelKind { EnergyDistance, Gaussian, MsSpline };

/// Selects the kernel and its polynomial null space.
///
/// polynomial_degree = -1 means no polynomial part. The Energy-Distance kernel
/// defaults to degree 0 (constants; translations in the vector-valued case),
/// the (m,s)-spline to degree m-1, and the Gaussian to -1.
struct KernelSpec {
  KernelKind kind = KernelKind::EnergyDistance;
  double sigma = 1.0;  // Gaussian width
  int m = 1;           // spline smoothness order
  double s = 0.0;      // spline Sobolev exponent
  int polynomial_degree = 0;

  static KernelSpec energy_distance() {
    KernelSpec k;
    k.kind = KernelKind::EnergyDistance;
    k.polynomial_degree = 0;
    return k;
  }

  static KernelSpec gaussian(double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("Gaussian kernel requires sigma > 0");
    KernelSpec k;
    k.kind = KernelKind::Gaussian;
    k.sigma = sigma;
    k.polynomial_degree = -1;
    return k;
  }

  /// (m,s)-spline kernel. Requires -m + d/2 < s < d/2 for the ambient
  /// dimension it is used in; checked lazily because d is not known here.
  static KernelSpec ms_spline(int m, double s) {
    if (m < 1) throw InvalidArgument("MsSpline requires m >= 1");
    KernelSpec k;
    k.kind = KernelKind::MsSpline;
    k.m = m;
    k.s = s;
    k.polynomial_degree = m - 1;
    return k;
  }

  bool is_energy_distance() const { return kind == KernelKind::EnergyDistance; }

  /// Checks the spline admissibility condition -m + d/2 < s < d/2.
  void check_dimension(Eigen::Index d) const {
    if (kind == KernelKind::MsSpline) {
      const double half_d = 0.5 * static_cast<double>(d);
      if (!(-m + half_d < s && s < half_d))
        throw InvalidArgument("MsSpline requires -m + d/2 < s < d/2");
    }
  }
};

/// Time-discretized momenta on the uniform grid {0, 1/T, ..., (T-1)/T},
/// plus an explicit translation path when the kernel has an unpenalized
/// constant null space (Energy-Distance).
struct MomentPath {
  std::vector<Matrix> momenta;          // T entries, each n x d
  std::optional<Matrix> translations;   // T x d when present

  MomentPath() = default;
  MomentPath(std::vector<Matrix> p, std::optional<Matrix> alpha)
      : momenta(std::move(p)), translations(std::move(alpha)) {
    validate();
  }

  static MomentPath zeros(Eigen::Index T, Eigen::Index n, Eigen::Index d,
                          bool with_translations) {
    MomentPath path;
    path.momenta.assign(static_cast<std::size_t>(T), Matrix::Zero(n, d));
    if (with_translations) path.translations = Matrix::Zero(T, d);
    return path;
  }

  Eigen::Index steps() const { return static_cast<Eigen::Index>(momenta.size()); }
  Eigen::Index size() const { return momenta.empty() ? 0 : momenta.front().rows(); }
  Eigen::Index dim() const { return momenta.empty() ? 0 : momenta.front().cols(); }

  void validate() const {
    if (momenta.empty()) throw InvalidArgument("MomentPath: need T >= 1");
    const Eigen::Index n = momenta.front().rows(), d = momenta.front().cols();
    for (const Matrix& p : momenta) {
      if (p.rows() != n || p.cols() != d)
        throw InvalidArgument("MomentPath: inconsistent momentum shapes");
      if (!p.allFinite()) throw InvalidArgument("MomentPath: non-finite momentum");
    }
    if (translations) {
      if (translations->rows() != steps() || translations->cols() != d)
        throw InvalidArgument("MomentPath: translation path shape mismatch");
      if (!translations->allFinite())
        throw InvalidArgument("MomentPath: non-finite translation");
    }
  }
};

/// P unit vectors on S^{d-1} together with the stream labels that produced
/// them, so the set can be regenerated bit-identically.
struct DirectionSet {
  Matrix directions;  // P x d, unit rows
  std::uint64_t seed = 0;
  std::string purpose;
  std::uint64_t step = 0;

  Eigen::Index count() const { return directions.rows(); }
  Eigen::Index dim() const { return directions.cols(); }
};

}  // namespace edreg
