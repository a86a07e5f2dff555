#include "fmflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fmflow {

AtomicTarget::AtomicTarget(Eigen::MatrixXd atoms, Eigen::VectorXd weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  require(atoms_.rows() >= 1 && atoms_.cols() >= 1, "AtomicTarget needs at least one atom");
  require(weights_.size() == atoms_.rows(), "AtomicTarget: one weight per atom required");
  require(atoms_.allFinite(), "AtomicTarget: atoms must be finite");
  require(weights_.allFinite() && (weights_.array() >= 0.0).all(),
          "AtomicTarget: weights must be finite and nonnegative");
  long double total = 0.0L;
  for (double w : weights_) total += w;
  require(std::abs(static_cast<double>(total) - 1.0) <= 1e-12, "AtomicTarget: weights must sum to 1");
  log_weights_ = weights_.array().log().matrix();
  cumulative_.resize(static_cast<std::size_t>(weights_.size()));
  double acc = 0.0;
  for (Eigen::Index j = 0; j < weights_.size(); ++j) {
    acc += weights_(j);
    cumulative_[static_cast<std::size_t>(j)] = acc;
  }
}

AtomicTarget AtomicTarget::uniform(Eigen::MatrixXd atoms) {
  const Eigen::Index m = atoms.rows();
  require(m >= 1, "AtomicTarget needs at least one atom");
  return AtomicTarget(std::move(atoms), Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)));
}

Eigen::Index AtomicTarget::draw(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, cumulative_.back());
  const double u = unif(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto j = static_cast<Eigen::Index>(std::distance(cumulative_.begin(), it));
  return std::min(j, size() - 1);
}

Eigen::VectorXd posterior_weights(const AtomicTarget& target, const Eigen::VectorXd& x, double t) {
  require(t < 1.0, "exact_velocity: t must be below 1, got " + std::to_string(t));
  require(x.size() == target.dim(), "exact_velocity: point dimension does not match target");
  const double scale = 1.0 / (2.0 * (1.0 - t) * (1.0 - t));
  const Eigen::VectorXd sq = ((t * target.atoms()).rowwise() - x.transpose()).rowwise().squaredNorm();
  return softmax((target.log_weights() - scale * sq).eval());
}

Eigen::VectorXd exact_velocity(const AtomicTarget& target, const Eigen::VectorXd& x, double t) {
  const Eigen::VectorXd p = posterior_weights(target, x, t);
  return (target.atoms().transpose() * p - x) / (1.0 - t);
}

Eigen::MatrixXd exact_velocity_rows(const AtomicTarget& target, const Eigen::MatrixXd& points, double t) {
  Eigen::MatrixXd out(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out.row(i) = exact_velocity(target, points.row(i).transpose(), t).transpose();
  return out;
}

Eigen::VectorXd mc_velocity(const TargetSampler& sampler, const Eigen::VectorXd& x, double t,
                            long m, std::uint64_t seed) {
  require(m >= 1, "mc_velocity: need at least one draw");
  require(t < 1.0, "mc_velocity: t must be below 1");
  Rng rng(seed);
  Eigen::MatrixXd draws(m, x.size());
  for (long i = 0; i < m; ++i) {
    const Eigen::VectorXd y = sampler(rng);
    require(y.size() == x.size(), "mc_velocity: sampler dimension does not match point");
    draws.row(i) = y.transpose();
  }
  return exact_velocity(AtomicTarget::uniform(std::move(draws)), x, t);
}

}  // namespace fmflow
