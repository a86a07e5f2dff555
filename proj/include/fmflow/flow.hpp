#pragma once

// Linear interpolation path, time grids, the clipped velocity model class,
// the empirical flow-matching loss and the training loop.

#include "fmflow/common.hpp"
#include "fmflow/nn.hpp"

#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace fmflow {

// X_t = t X_1 + (1 - t) X_0.
template <typename DerivedA, typename DerivedB>
typename DerivedA::PlainObject interpolate(const Eigen::MatrixBase<DerivedA>& x0,
                                           const Eigen::MatrixBase<DerivedB>& x1,
                                           typename DerivedA::Scalar t) {
  using Scalar = typename DerivedA::Scalar;
  require(x0.rows() == x1.rows() && x0.cols() == x1.cols(),
          "interpolate: endpoints have different shapes");
  return t * x1 + (Scalar(1) - t) * x0;
}

// Strictly decreasing knots 1 = t_0 > t_1 > ... > t_K = t_min > 0 with
// 1 < t_k / t_{k+1} <= 2. Slab k covers flow times [1 - t_k, 1 - t_{k+1}).
class TimeGrid {
 public:
  TimeGrid() = default;

  static TimeGrid from_knots(std::vector<double> knots,
                             std::optional<std::size_t> boundary_index = std::nullopt);
  // Knots ratio^-k while above t_min, then t_min itself.
  static TimeGrid geometric(double t_min, double ratio = 2.0);

  const std::vector<double>& knots() const { return knots_; }
  double t_min() const { return knots_.back(); }
  std::size_t num_slabs() const { return knots_.size() - 1; }
  std::optional<std::size_t> boundary_index() const { return boundary_index_; }
  void set_boundary_index(std::optional<std::size_t> k) { boundary_index_ = k; }

  // [lo, hi) in flow time.
  std::pair<double, double> slab(std::size_t k) const;
  // Left-closed dispatch; t = 1 - t_min belongs to the last slab.
  std::size_t slab_index(double t) const;

 private:
  std::vector<double> knots_;
  std::vector<double> starts_;  // 1 - knots_[k], increasing
  std::optional<std::size_t> boundary_index_;
};

// Early-stopping level t_min = n^(-beta/(2 alpha + d)) log^(beta+1)(n), clamped
// to (0, 0.5], a geometric grid down to it, and the knot nearest to
// n^(-2/(2 alpha + d)) marked as the boundary index.
struct TheoremGrid {
  TimeGrid grid;
  double raw_t_min = 0.0;
  double boundary_value = 0.0;
};
TheoremGrid build_time_grid(long n, double alpha, int d, double beta, double ratio);

enum class ModelMode { single, piecewise };

struct ModelConfig {
  ModelMode mode = ModelMode::single;
  int width = 256;
  int depth = 4;  // hidden layers
  int embedding_dim = 2;
  double embedding_spread = 1000.0;  // ratio of highest to lowest frequency
  double embedding_base = std::numbers::pi;  // lowest frequency
  double clip_constant = 10.0;
};

// u(x, t) = clip(N([x; embed(t)])), clip bound c * sqrt(log n) / (1 - t) per
// coordinate. Piecewise mode keeps one net per TimeGrid slab.
class VelocityModel {
 public:
  VelocityModel() = default;
  VelocityModel(ModelMode mode, std::vector<MlpNet<double>> nets, TimeEmbedding<double> embedding,
                double t_min, double clip_constant, long n_samples,
                std::optional<TimeGrid> grid = std::nullopt);

  static VelocityModel initialize(int dim, const ModelConfig& config, double t_min, long n_samples,
                                  std::optional<TimeGrid> grid, Rng& rng);

  ModelMode mode() const { return mode_; }
  int dim() const { return nets_.front().output_dim(); }
  double t_min() const { return t_min_; }
  double clip_constant() const { return clip_constant_; }
  long n_samples() const { return n_samples_; }
  const TimeEmbedding<double>& embedding() const { return embedding_; }
  const std::optional<TimeGrid>& grid() const { return grid_; }
  std::vector<MlpNet<double>>& nets() { return nets_; }
  const std::vector<MlpNet<double>>& nets() const { return nets_; }

  double clip_bound(double t) const;
  // Index of the net consulted at time t.
  std::size_t net_index(double t) const;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x, double t) const;
  // Rows of `points` are samples, all evaluated at the same time.
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& points, double t) const;

  // Network input [x; embed(t)] for column-major states (D x B).
  Eigen::MatrixXd features(const Eigen::MatrixXd& states, std::span<const double> times) const;

 private:
  void check_time(double t) const;

  ModelMode mode_ = ModelMode::single;
  std::vector<MlpNet<double>> nets_;
  TimeEmbedding<double> embedding_;
  double t_min_ = 0.0;
  double clip_constant_ = 10.0;
  long n_samples_ = 2;
  std::optional<TimeGrid> grid_;
};

struct LossAndGrads {
  double loss = 0.0;
  std::vector<MlpParams<double>> grads;  // one per net
};

// (1/m) sum_j || u(x_{t_j}, t_j) - (x1_j - x0_j) ||^2 and its exact parameter
// gradient. Rows of x0/x1 are pairs. Clipped output coordinates get zero
// gradient.
LossAndGrads fm_loss_and_grads(const VelocityModel& model, const Eigen::MatrixXd& x0,
                               const Eigen::MatrixXd& x1, std::span<const double> times);

enum class LrSchedule { constant, cosine };
enum class TimeSampling { uniform, stratified };

struct TrainConfig {
  long iterations = 1000;
  long batch_size = 2048;
  double learning_rate = 2e-4;
  LrSchedule lr_schedule = LrSchedule::constant;
  long cosine_t_max = 0;  // 0 means `iterations`
  AdamWConfig<double> optimizer{};
  double t_min = 1.0 / (250.0 * 250.0);
  TimeSampling t_sampling = TimeSampling::uniform;
  std::uint64_t seed = 0;
  ModelConfig model{};
  // Draw batch indices with replacement; required when n < batch_size.
  bool replacement = false;
  // Pair target j with a fixed source draw j instead of fresh noise.
  bool fixed_source = false;
  // Grid for Piecewise slabs and stratified time sampling; geometric ratio 2
  // down to t_min when absent.
  std::optional<TimeGrid> grid;

  void validate() const;
  TimeGrid effective_grid() const;
};

struct TrainRecord {
  std::vector<double> losses;
  std::vector<double> learning_rates;
  std::uint64_t seed = 0;
};

struct TrainResult {
  VelocityModel model;
  TrainRecord record;
};

// Rows of target_samples are the n observations of pi_1.
TrainResult train(const TrainConfig& config, const Eigen::MatrixXd& target_samples);

// Post-hoc Lipschitz estimate of x -> u(x, t) from random finite-difference
// probes. The scaled value is ratio * (1 - t)^(1 - xi).
struct LipschitzReport {
  double xi = 0.0;
  std::vector<double> times;
  std::vector<double> max_ratio;
  std::vector<double> scaled;
};
LipschitzReport probe_lipschitz(const VelocityModel& model, std::span<const double> times,
                                const Eigen::MatrixXd& points, double step, double xi,
                                std::uint64_t seed);

}  // namespace fmflow
