#pragma once

// Distributional and geometric fidelity metrics for generated point clouds.
// Clouds are n x D with one sample per row.

#include "fmflow/common.hpp"
#include "fmflow/data.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fmflow {

// Exact W1 between two 1D empirical measures with equal atom weights,
// integrating |F_a^-1 - F_b^-1| over the merged quantile grid.
double w1_1d(std::vector<double> a, std::vector<double> b);

// Standardize both clouds with the per-coordinate mean and population standard
// deviation of `reference` (coordinates with sd < 1e-12 are only centered),
// then average the exact 1D W1 over n_proj uniform directions.
double sliced_w1_std(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& reference, int n_proj,
                     std::uint64_t seed);

// Same average without standardization.
double sliced_w1_raw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int n_proj,
                     std::uint64_t seed);

// Euclidean distance of every row to the manifold: closed form for sphere and
// torus, dense petal polylines for floral.
Eigen::VectorXd dist_manifold(const Eigen::MatrixXd& points, const ManifoldSpec& spec);

// Points per petal of the floral polyline.
inline constexpr int kFloralPolylinePoints = 10000;

// Petal owning the nearest polyline segment, per row.
std::vector<int> nearest_petal(const Eigen::MatrixXd& points, const FloralSpec& spec);

// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
// paths with potentials). Returns column assigned to each row.
std::vector<Eigen::Index> min_cost_assignment(const Eigen::MatrixXd& cost);

inline constexpr Eigen::Index kMaxAssignmentSize = 4096;

// sqrt(min_sigma (1/n) sum_i |a_i - b_sigma(i)|^2) for equal-size clouds.
double exact_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct MeanSd {
  double mean = 0.0;
  std::optional<double> sd;  // present when at least two values
};
MeanSd mean_sd(std::span<const double> values);

struct MetricReport {
  MeanSd w1_slice_std;
  MeanSd dist_manifold;
  int n_projections = 128;
  int n_runs = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> w1_per_run;
  std::vector<double> dist_per_run;
  // Quantiles (0.5, 0.9, 0.99) of per-sample distances, pooled over runs.
  std::vector<double> dist_quantiles;
};

double quantile(std::vector<double> values, double q);

}  // namespace fmflow
