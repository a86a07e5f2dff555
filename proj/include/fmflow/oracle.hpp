#pragma once

// The true velocity field of the linear path for atomic targets, its
// Monte-Carlo counterpart for sampler-defined targets, and the slab-wise
// squared discrepancy between a model and the exact field.

#include "fmflow/common.hpp"
#include "fmflow/flow.hpp"
#include "fmflow/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace fmflow {

// Finite weighted point set; rows of `atoms` are support points.
class AtomicTarget {
 public:
  AtomicTarget() = default;
  AtomicTarget(Eigen::MatrixXd atoms, Eigen::VectorXd weights);
  static AtomicTarget uniform(Eigen::MatrixXd atoms);

  Eigen::Index size() const { return atoms_.rows(); }
  Eigen::Index dim() const { return atoms_.cols(); }
  const Eigen::MatrixXd& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& log_weights() const { return log_weights_; }
  Eigen::VectorXd mean() const { return atoms_.transpose() * weights_; }

  // Row index drawn with probability weights_(j).
  Eigen::Index draw(Rng& rng) const;

 private:
  Eigen::MatrixXd atoms_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd log_weights_;
  std::vector<double> cumulative_;
};

// Posterior P(X_1 = y_j | X_t = x) proportional to
// w_j exp(-|x - t y_j|^2 / (2 (1 - t)^2)), evaluated in the log domain.
Eigen::VectorXd posterior_weights(const AtomicTarget& target, const Eigen::VectorXd& x, double t);

// v(x, t) = (sum_j p_j y_j - x) / (1 - t).
Eigen::VectorXd exact_velocity(const AtomicTarget& target, const Eigen::VectorXd& x, double t);

// Row-wise exact velocity for many states at one time.
Eigen::MatrixXd exact_velocity_rows(const AtomicTarget& target, const Eigen::MatrixXd& points, double t);

using TargetSampler = std::function<Eigen::VectorXd(Rng&)>;

// Self-normalized estimate from m draws of pi_1; equals exact_velocity of the
// empirical measure of the draws.
Eigen::VectorXd mc_velocity(const TargetSampler& sampler, const Eigen::VectorXd& x, double t,
                            long m, std::uint64_t seed);

struct Slab {
  double lo = 0.0;
  double hi = 0.0;
};

struct ProbeEstimate {
  double mse = 0.0;
  double standard_error = 0.0;
  long n_mc = 0;
};

// Monte-Carlo mean of |model(x, t) - v(x, t)|^2 with t ~ Unif(slab) and
// x = t x1 + (1 - t) x0, x0 ~ N(0, I), x1 ~ target.
template <typename Field>
ProbeEstimate velocity_mse(const Field& model, const AtomicTarget& target, Slab slab, long n_mc,
                           std::uint64_t seed) {
  require(slab.lo < slab.hi, "velocity_mse: empty slab");
  require(slab.lo >= 0.0 && slab.hi < 1.0, "velocity_mse: slab must lie in [0, 1)");
  require(n_mc >= 2, "velocity_mse: need at least two Monte-Carlo points");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(slab.lo, slab.hi);
  std::normal_distribution<double> normal;
  double sum = 0.0, sum_sq = 0.0;
  Eigen::VectorXd x0(target.dim());
  for (long i = 0; i < n_mc; ++i) {
    const double t = unif(rng);
    for (auto& c : x0) c = normal(rng);
    const Eigen::VectorXd x1 = target.atoms().row(target.draw(rng)).transpose();
    const Eigen::VectorXd x = interpolate(x0, x1, t);
    const Eigen::VectorXd predicted = model(x, t);
    const double err = (predicted - exact_velocity(target, x, t)).squaredNorm();
    sum += err;
    sum_sq += err * err;
  }
  const double n = static_cast<double>(n_mc);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), n_mc};
}

}  // namespace fmflow
