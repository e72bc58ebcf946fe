#include "edreg/sliced.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <utility>

namespace edreg {

namespace {

std::atomic<std::uint64_t> g_sorts{0};
std::atomic<std::uint64_t> g_sorted_elements{0};

// Directions are reduced in fixed blocks of their index order. The block
// size is a constant, not a function of the thread count, so the grouping
// of the floating-point reduction never changes.
constexpr Eigen::Index kDirectionChunk = 16;

struct MergedLine {
  std::vector<std::pair<double, Eigen::Index>> entries;  // (projection, merged index)
  std::vector<double> pos;      // sorted positions
  std::vector<double> weight;   // weights aligned with pos, one component at a time
  std::vector<double> conv;     // convolution values aligned with pos

  void resize(std::size_t total) {
    entries.resize(total);
    pos.resize(total);
    weight.resize(total);
    conv.resize(total);
  }
};

/// Prefix recurrences of the sorted 1D convolution, writing into ws.conv.
void run_recurrences(const std::vector<double>& pos, const std::vector<double>& w,
                     std::vector<double>& out) {
  const std::size_t n = pos.size();
  double a = 0.0, b = 0.0;
  for (std::size_t j = 1; j < n; ++j) {
    a -= w[j];
    b -= w[j] * pos[j];
  }
  out[0] = a * pos[0] - b;
  for (std::size_t i = 1; i < n; ++i) {
    a += w[i - 1] + w[i];
    b += w[i - 1] * pos[i - 1] + w[i] * pos[i];
    out[i] = a * pos[i] - b;
  }
}

/// Projects sources and targets on a direction, sorts once, and accumulates
/// the per-component convolution at the targets into acc (m x d, += raw
/// positive-distance sums).
void convolve_direction(const Matrix& src, const Matrix& moments, const Matrix& tgt,
                        const Eigen::Ref<const Eigen::RowVectorXd>& theta,
                        MergedLine& ws, Matrix& acc) {
  const Eigen::Index n = src.rows(), m = tgt.rows(), d = src.cols();
  const std::size_t total = static_cast<std::size_t>(n + m);
  ws.resize(total);
  for (Eigen::Index j = 0; j < n; ++j)
    ws.entries[static_cast<std::size_t>(j)] = {src.row(j).dot(theta), j};
  for (Eigen::Index k = 0; k < m; ++k)
    ws.entries[static_cast<std::size_t>(n + k)] = {tgt.row(k).dot(theta), n + k};
  std::sort(ws.entries.begin(), ws.entries.end(),
            [](const auto& lhs, const auto& rhs) { return lhs.first < rhs.first; });
  g_sorts.fetch_add(1, std::memory_order_relaxed);
  g_sorted_elements.fetch_add(total, std::memory_order_relaxed);

  for (std::size_t e = 0; e < total; ++e) ws.pos[e] = ws.entries[e].first;
  for (Eigen::Index c = 0; c < d; ++c) {
    for (std::size_t e = 0; e < total; ++e) {
      const Eigen::Index id = ws.entries[e].second;
      ws.weight[e] = id < n ? moments(id, c) : 0.0;
    }
    run_recurrences(ws.pos, ws.weight, ws.conv);
    for (std::size_t e = 0; e < total; ++e) {
      const Eigen::Index id = ws.entries[e].second;
      if (id >= n) acc(id - n, c) += ws.conv[e];
    }
  }
}

/// One direction of the sliced loss: scalar <pi# rho, |.| * pi# rho>.
double loss_direction(const Matrix& X, const Matrix& Y,
                      const Eigen::Ref<const Eigen::RowVectorXd>& theta, MergedLine& ws) {
  const Eigen::Index N = X.rows(), M = Y.rows();
  const std::size_t total = static_cast<std::size_t>(N + M);
  ws.resize(total);
  for (Eigen::Index i = 0; i < N; ++i)
    ws.entries[static_cast<std::size_t>(i)] = {X.row(i).dot(theta), i};
  for (Eigen::Index j = 0; j < M; ++j)
    ws.entries[static_cast<std::size_t>(N + j)] = {Y.row(j).dot(theta), N + j};
  std::sort(ws.entries.begin(), ws.entries.end(),
            [](const auto& lhs, const auto& rhs) { return lhs.first < rhs.first; });
  g_sorts.fetch_add(1, std::memory_order_relaxed);
  g_sorted_elements.fetch_add(total, std::memory_order_relaxed);

  const double wx = 1.0 / static_cast<double>(N), wy = -1.0 / static_cast<double>(M);
  for (std::size_t e = 0; e < total; ++e) {
    ws.pos[e] = ws.entries[e].first;
    ws.weight[e] = ws.entries[e].second < N ? wx : wy;
  }
  run_recurrences(ws.pos, ws.weight, ws.conv);
  double term = 0.0;
  for (std::size_t e = 0; e < total; ++e) term += ws.weight[e] * ws.conv[e];
  return term;
}

}  // namespace

std::vector<double> sorted_line_convolve(const std::vector<double>& positions,
                                         const std::vector<double>& weights) {
  if (positions.size() != weights.size() || positions.empty())
    throw InvalidArgument("sorted_line_convolve: size mismatch or empty input");
  assert(std::is_sorted(positions.begin(), positions.end()) &&
         "sorted_line_convolve: positions must be nondecreasing");
  std::vector<double> out(positions.size());
  run_recurrences(positions, weights, out);
  return out;
}

std::vector<double> line_convolve_at(const std::vector<double>& source_pos,
                                     const std::vector<double>& weights,
                                     const std::vector<double>& target_pos) {
  if (source_pos.size() != weights.size())
    throw InvalidArgument("line_convolve_at: size mismatch");
  const Eigen::Index n = static_cast<Eigen::Index>(source_pos.size());
  const Eigen::Index m = static_cast<Eigen::Index>(target_pos.size());
  Matrix src(n, 1), mom(n, 1), tgt(m, 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    src(j, 0) = source_pos[static_cast<std::size_t>(j)];
    mom(j, 0) = weights[static_cast<std::size_t>(j)];
  }
  for (Eigen::Index k = 0; k < m; ++k) tgt(k, 0) = target_pos[static_cast<std::size_t>(k)];

  MergedLine ws;
  Matrix acc = Matrix::Zero(m, 1);
  Eigen::RowVectorXd theta(1);
  theta << 1.0;
  convolve_direction(src, mom, tgt, theta, ws, acc);
  std::vector<double> out(static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < m; ++k) out[static_cast<std::size_t>(k)] = acc(k, 0);
  return out;
}

double slicing_constant(int d) {
  if (d < 1) throw InvalidArgument("slicing_constant: need d >= 1");
  return std::exp(0.5 * std::log(M_PI) + std::lgamma(0.5 * (d + 1)) -
                  std::lgamma(0.5 * d));
}

Matrix sliced_convolve(const DiscreteVectorMeasure& measure, const PointCloud& targets,
                       const DirectionSet& dirs) {
  if (measure.dim() != targets.dim() || dirs.dim() != targets.dim())
    throw InvalidArgument("sliced_convolve: dimension mismatch");
  const Eigen::Index m = targets.size(), d = targets.dim(), P = dirs.count();
  if (P < 1) throw InvalidArgument("sliced_convolve: need P >= 1");

  const Eigen::Index chunks = (P + kDirectionChunk - 1) / kDirectionChunk;
  std::vector<Matrix> chunk_acc(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    Matrix acc = Matrix::Zero(m, d);
    MergedLine ws;
    const Eigen::Index lo = c * kDirectionChunk;
    const Eigen::Index hi = std::min(P, lo + kDirectionChunk);
    for (Eigen::Index p = lo; p < hi; ++p)
      convolve_direction(measure.points, measure.moments, targets.points,
                         dirs.directions.row(p), ws, acc);
    chunk_acc[static_cast<std::size_t>(c)] = std::move(acc);
  }
  Matrix out = Matrix::Zero(m, d);
  for (const Matrix& acc : chunk_acc) out += acc;
  // The 1D sums use +|.|; the Energy-Distance kernel is -|.|.
  out *= -slicing_constant(static_cast<int>(d)) / static_cast<double>(P);
  return out;
}

double sliced_ed_loss(const PointCloud& X, const PointCloud& Y, const DirectionSet& dirs) {
  if (X.dim() != Y.dim() || dirs.dim() != X.dim())
    throw InvalidArgument("sliced_ed_loss: dimension mismatch");
  const Eigen::Index P = dirs.count();
  std::vector<double> terms(static_cast<std::size_t>(P));
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index p = 0; p < P; ++p) {
    MergedLine ws;
    terms[static_cast<std::size_t>(p)] =
        loss_direction(X.points, Y.points, dirs.directions.row(p), ws);
  }
  double total = 0.0;
  for (double t : terms) total += t;
  return -slicing_constant(static_cast<int>(X.dim())) * total / static_cast<double>(P);
}

SlicedCounters sliced_counters() {
  return {g_sorts.load(std::memory_order_relaxed),
          g_sorted_elements.load(std::memory_order_relaxed)};
}

void reset_sliced_counters() {
  g_sorts.store(0, std::memory_order_relaxed);
  g_sorted_elements.store(0, std::memory_order_relaxed);
}

namespace serial {

Matrix sliced_convolve(const DiscreteVectorMeasure& measure, const PointCloud& targets,
                       const DirectionSet& dirs) {
  const Eigen::Index m = targets.size(), d = targets.dim(), P = dirs.count();
  Matrix acc = Matrix::Zero(m, d);
  MergedLine ws;
  for (Eigen::Index p = 0; p < P; ++p)
    convolve_direction(measure.points, measure.moments, targets.points,
                       dirs.directions.row(p), ws, acc);
  return acc * (-slicing_constant(static_cast<int>(d)) / static_cast<double>(P));
}

double sliced_ed_loss(const PointCloud& X, const PointCloud& Y, const DirectionSet& dirs) {
  MergedLine ws;
  double total = 0.0;
  for (Eigen::Index p = 0; p < dirs.count(); ++p)
    total += loss_direction(X.points, Y.points, dirs.directions.row(p), ws);
  return -slicing_constant(static_cast<int>(X.dim())) * total /
         static_cast<double>(dirs.count());
}

}  // namespace serial

}  // namespace edreg
