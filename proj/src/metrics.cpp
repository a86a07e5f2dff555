#include "fmflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fmflow {

double w1_1d(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "w1_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto n = static_cast<long long>(a.size());
  const auto m = static_cast<long long>(b.size());
  if (n == m) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(n);
  }
  // Quantile breakpoints i/n and j/m, kept as integers over the common
  // denominator n*m.
  long long i = 0, j = 0, u = 0;
  double total = 0.0;
  while (i < n && j < m) {
    const long long next_a = (i + 1) * m;
    const long long next_b = (j + 1) * n;
    const long long next = std::min(next_a, next_b);
    total += static_cast<double>(next - u) * std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)]);
    u = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return total / static_cast<double>(n * m);
}

namespace {

double sliced_average(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int n_proj,
                      std::uint64_t seed) {
  require(n_proj >= 1, "sliced W1: need at least one projection");
  require(a.cols() == b.cols(), "sliced W1: clouds have different dimensions");
  require(a.rows() >= 2 && b.rows() >= 2, "sliced W1: each cloud needs at least two points");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd dir(a.cols());
  double total = 0.0;
  for (int k = 0; k < n_proj; ++k) {
    do {
      for (auto& c : dir) c = normal(rng);
    } while (dir.squaredNorm() == 0.0);
    dir.normalize();
    const Eigen::VectorXd pa = a * dir;
    const Eigen::VectorXd pb = b * dir;
    total += w1_1d(std::vector<double>(pa.begin(), pa.end()), std::vector<double>(pb.begin(), pb.end()));
  }
  return total / n_proj;
}

}  // namespace

double sliced_w1_raw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int n_proj,
                     std::uint64_t seed) {
  return sliced_average(a, b, n_proj, seed);
}

double sliced_w1_std(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& reference, int n_proj,
                     std::uint64_t seed) {
  require(samples.cols() == reference.cols(), "sliced W1: clouds have different dimensions");
  require(reference.rows() >= 2, "sliced W1: reference needs at least two points");
  const Eigen::RowVectorXd mean = reference.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((reference.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(reference.rows()))
          .sqrt()
          .matrix();
  require((sd.array() >= 1e-12).any(), "sliced W1: reference cloud is constant in every coordinate");
  const Eigen::RowVectorXd scale = (sd.array() < 1e-12).select(1.0, sd.array()).matrix();
  const Eigen::MatrixXd a = (samples.rowwise() - mean).array().rowwise() / scale.array();
  const Eigen::MatrixXd b = (reference.rowwise() - mean).array().rowwise() / scale.array();
  return sliced_average(a, b, n_proj, seed);
}

namespace {

double segment_distance_sq(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len = ab.squaredNorm();
  double s = len > 0.0 ? (p - a).dot(ab) / len : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (p - (a + s * ab)).squaredNorm();
}

struct Polylines {
  std::vector<std::vector<Eigen::Vector2d>> petals;
};

Polylines floral_polylines(const FloralSpec& spec) {
  Polylines out;
  out.petals.resize(static_cast<std::size_t>(spec.petals));
  for (int i = 0; i < spec.petals; ++i) {
    auto& pts = out.petals[static_cast<std::size_t>(i)];
    pts.reserve(kFloralPolylinePoints);
    for (int k = 0; k < kFloralPolylinePoints; ++k)
      pts.push_back(floral_curve(spec, i, static_cast<double>(k) / (kFloralPolylinePoints - 1)));
  }
  return out;
}

std::pair<double, int> floral_nearest(const Polylines& lines, const Eigen::Vector2d& p) {
  double best = std::numeric_limits<double>::infinity();
  int owner = 0;
  for (std::size_t i = 0; i < lines.petals.size(); ++i) {
    const auto& pts = lines.petals[i];
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      const double d = segment_distance_sq(p, pts[k], pts[k + 1]);
      if (d < best) {
        best = d;
        owner = static_cast<int>(i);
      }
    }
  }
  return {std::sqrt(best), owner};
}

}  // namespace

Eigen::VectorXd dist_manifold(const Eigen::MatrixXd& points, const ManifoldSpec& spec) {
  spec.validate();
  require(points.cols() == spec.ambient_dim(),
          "dist_manifold: points have " + std::to_string(points.cols()) + " columns, spec expects " +
              std::to_string(spec.ambient_dim()));
  Eigen::VectorXd out(points.rows());
  if (const auto* s = std::get_if<SphereSpec>(&spec.kind)) {
    const int k = s->d + 1;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const double radial = points.row(i).head(k).norm() - 1.0;
      const double tail = points.row(i).tail(points.cols() - k).squaredNorm();
      out(i) = std::sqrt(radial * radial + tail);
    }
  } else if (const auto* s = std::get_if<TorusSpec>(&spec.kind)) {
    const Eigen::MatrixXd axis = points * s->rotation;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      double acc = 0.0;
      for (int p = 0; p < s->d; ++p) {
        const double r = std::hypot(axis(i, 2 * p), axis(i, 2 * p + 1)) - 1.0;
        acc += r * r;
      }
      acc += axis.row(i).tail(axis.cols() - 2 * s->d).squaredNorm();
      out(i) = std::sqrt(acc);
    }
  } else {
    const auto lines = floral_polylines(std::get<FloralSpec>(spec.kind));
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      out(i) = floral_nearest(lines, points.row(i).transpose()).first;
  }
  return out;
}

std::vector<int> nearest_petal(const Eigen::MatrixXd& points, const FloralSpec& spec) {
  require(points.cols() == 2, "nearest_petal: floral points are two dimensional");
  const auto lines = floral_polylines(spec);
  std::vector<int> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out[static_cast<std::size_t>(i)] = floral_nearest(lines, points.row(i).transpose()).second;
  return out;
}

std::vector<Eigen::Index> min_cost_assignment(const Eigen::MatrixXd& cost) {
  require(cost.rows() == cost.cols(), "min_cost_assignment: cost matrix must be square");
  require(cost.allFinite(), "min_cost_assignment: costs must be finite");
  const Eigen::Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_to(n + 1);
  std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (Eigen::Index row = 1; row <= n; ++row) {
    match[0] = row;
    Eigen::Index col0 = 0;
    std::fill(min_to.begin(), min_to.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const Eigen::Index r = match[col0];
      double delta = inf;
      Eigen::Index col1 = 0;
      for (Eigen::Index c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost(r - 1, c - 1) - u[r] - v[c];
        if (reduced < min_to[c]) {
          min_to[c] = reduced;
          way[c] = col0;
        }
        if (min_to[c] < delta) {
          delta = min_to[c];
          col1 = c;
        }
      }
      for (Eigen::Index c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          min_to[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const Eigen::Index prev = way[col0];
      match[col0] = match[prev];
      col0 = prev;
    } while (col0 != 0);
  }
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n));
  for (Eigen::Index c = 1; c <= n; ++c) assignment[static_cast<std::size_t>(match[c] - 1)] = c - 1;
  return assignment;
}

double exact_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "exact_w2: clouds must have equal shapes");
  require(a.rows() >= 1, "exact_w2: empty clouds");
  require(a.rows() <= kMaxAssignmentSize, "exact_w2: at most 4096 points per cloud");
  const Eigen::Index n = a.rows();
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd cost = -2.0 * a * b.transpose();
  cost.colwise() += na;
  cost.rowwise() += nb.transpose();
  cost = cost.cwiseMax(0.0);
  const auto sigma = min_cost_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    total += (a.row(i) - b.row(sigma[static_cast<std::size_t>(i)])).squaredNorm();
  return std::sqrt(total / static_cast<double>(n));
}

MeanSd mean_sd(std::span<const double> values) {
  require(!values.empty(), "mean_sd: no values");
  MeanSd out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile: no values");
  require(q >= 0.0 && q <= 1.0, "quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace fmflow
