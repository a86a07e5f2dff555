#include "fmflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fmflow {

namespace {

constexpr double kKnotTolerance = 1e-12;

}  // namespace

TimeGrid TimeGrid::from_knots(std::vector<double> knots, std::optional<std::size_t> boundary_index) {
  require(knots.size() >= 2, "TimeGrid needs at least two knots");
  require(knots.front() == 1.0, "TimeGrid must start at t_0 = 1");
  require(knots.back() > 0.0, "TimeGrid final knot must be positive");
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double ratio = knots[k] / knots[k + 1];
    require(knots[k] > knots[k + 1], "TimeGrid knots must be strictly decreasing");
    require(ratio > 1.0 && ratio <= 2.0 * (1.0 + kKnotTolerance),
            "TimeGrid knot ratio t_k/t_{k+1} = " + std::to_string(ratio) + " outside (1, 2]");
  }
  if (boundary_index) require(*boundary_index < knots.size(), "TimeGrid boundary index out of range");
  TimeGrid grid;
  grid.knots_ = std::move(knots);
  grid.starts_.reserve(grid.knots_.size());
  for (double k : grid.knots_) grid.starts_.push_back(1.0 - k);
  grid.boundary_index_ = boundary_index;
  return grid;
}

TimeGrid TimeGrid::geometric(double t_min, double ratio) {
  require(t_min > 0.0 && t_min < 1.0, "TimeGrid::geometric: t_min must lie in (0, 1)");
  require(ratio > 1.0 && ratio <= 2.0, "TimeGrid::geometric: ratio must lie in (1, 2]");
  std::vector<double> knots{1.0};
  for (int k = 1;; ++k) {
    const double next = std::pow(ratio, -k);
    if (next > t_min * (1.0 + kKnotTolerance)) {
      knots.push_back(next);
    } else {
      knots.push_back(t_min);
      break;
    }
  }
  return from_knots(std::move(knots));
}

std::pair<double, double> TimeGrid::slab(std::size_t k) const {
  require(k < num_slabs(), "TimeGrid::slab: index out of range");
  return {starts_[k], starts_[k + 1]};
}

std::size_t TimeGrid::slab_index(double t) const {
  require(!knots_.empty(), "TimeGrid used before construction");
  require(t >= 0.0 && t <= starts_.back(),
          "TimeGrid::slab_index: t = " + std::to_string(t) + " outside [0, 1 - t_min]");
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  return std::min(k, num_slabs() - 1);
}

TheoremGrid build_time_grid(long n, double alpha, int d, double beta, double ratio) {
  require(n >= 2, "build_time_grid: n must be at least 2");
  require(alpha >= 0.0, "build_time_grid: alpha must be nonnegative");
  require(d >= 3, "build_time_grid: intrinsic dimension must be at least 3");
  require(beta >= 2.0, "build_time_grid: beta must be at least 2");
  require(ratio > 1.0 && ratio <= 2.0, "build_time_grid: ratio must lie in (1, 2]");
  const double nn = static_cast<double>(n);
  const double denom = 2.0 * alpha + d;
  const double raw = std::pow(nn, -beta / denom) * std::pow(std::log(nn), beta + 1.0);
  require(std::isfinite(raw) && raw > 0.0, "build_time_grid: early-stopping level is not positive");
  TheoremGrid out;
  out.raw_t_min = raw;
  out.boundary_value = std::pow(nn, -2.0 / denom);
  out.grid = TimeGrid::geometric(std::min(raw, 0.5), ratio);
  const auto& knots = out.grid.knots();
  std::size_t best = 0;
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (std::abs(std::log(knots[k] / out.boundary_value)) <
        std::abs(std::log(knots[best] / out.boundary_value)))
      best = k;
  }
  out.grid.set_boundary_index(best);
  return out;
}

VelocityModel::VelocityModel(ModelMode mode, std::vector<MlpNet<double>> nets,
                             TimeEmbedding<double> embedding, double t_min, double clip_constant,
                             long n_samples, std::optional<TimeGrid> grid)
    : mode_(mode),
      nets_(std::move(nets)),
      embedding_(std::move(embedding)),
      t_min_(t_min),
      clip_constant_(clip_constant),
      n_samples_(n_samples),
      grid_(std::move(grid)) {
  require(!nets_.empty(), "VelocityModel needs at least one net");
  require(t_min_ > 0.0 && t_min_ < 1.0, "VelocityModel: t_min must lie in (0, 1)");
  require(clip_constant_ > 0.0, "VelocityModel: clip constant must be positive");
  require(n_samples_ >= 2, "VelocityModel: sample count for the clip bound must be at least 2");
  const auto& dims = nets_.front().layer_dims();
  for (const auto& net : nets_)
    require(net.layer_dims() == dims, "VelocityModel: all nets must share one architecture");
  require(dims.front() == dims.back() + embedding_.dim(),
          "VelocityModel: net input must be state dim + embedding dim");
  if (mode_ == ModelMode::single) {
    require(nets_.size() == 1, "VelocityModel: single mode takes exactly one net");
  } else {
    require(grid_.has_value(), "VelocityModel: piecewise mode requires a time grid");
    require(nets_.size() == grid_->num_slabs(), "VelocityModel: one net per grid slab required");
    require(std::abs(grid_->t_min() - t_min_) <= kKnotTolerance * t_min_,
            "VelocityModel: grid t_min differs from model t_min");
  }
}

VelocityModel VelocityModel::initialize(int dim, const ModelConfig& config, double t_min,
                                        long n_samples, std::optional<TimeGrid> grid, Rng& rng) {
  require(dim > 0, "VelocityModel::initialize: dimension must be positive");
  require(config.width > 0 && config.depth >= 0, "VelocityModel::initialize: bad architecture");
  auto embedding = TimeEmbedding<double>::geometric(config.embedding_dim, config.embedding_spread,
                                                          config.embedding_base);
  const auto dims = MlpNet<double>::mlp_dims(dim + embedding.dim(), config.width, config.depth, dim);
  std::size_t count = 1;
  if (config.mode == ModelMode::piecewise) {
    require(grid.has_value(), "VelocityModel::initialize: piecewise mode requires a time grid");
    count = grid->num_slabs();
  } else {
    grid.reset();
  }
  std::vector<MlpNet<double>> nets;
  nets.reserve(count);
  for (std::size_t k = 0; k < count; ++k) nets.push_back(MlpNet<double>::he_uniform(dims, rng));
  return VelocityModel(config.mode, std::move(nets), std::move(embedding), t_min,
                       config.clip_constant, n_samples, std::move(grid));
}

double VelocityModel::clip_bound(double t) const {
  return clip_constant_ * std::sqrt(std::log(static_cast<double>(n_samples_))) / (1.0 - t);
}

void VelocityModel::check_time(double t) const {
  require(t >= 0.0 && t < 1.0, "VelocityModel: t = " + std::to_string(t) + " outside [0, 1)");
  if (mode_ == ModelMode::piecewise)
    require(t <= 1.0 - t_min_, "VelocityModel: t beyond the last slab");
}

std::size_t VelocityModel::net_index(double t) const {
  check_time(t);
  return mode_ == ModelMode::single ? 0 : grid_->slab_index(t);
}

Eigen::MatrixXd VelocityModel::features(const Eigen::MatrixXd& states,
                                        std::span<const double> times) const {
  require(states.rows() == dim(), "VelocityModel: state dimension mismatch");
  require(times.size() == 1 || times.size() == static_cast<std::size_t>(states.cols()),
          "VelocityModel: need one time or one time per state");
  Eigen::MatrixXd in(dim() + embedding_.dim(), states.cols());
  in.topRows(dim()) = states;
  if (times.size() == 1) {
    const Eigen::VectorXd e = embedding_.embed(times[0]);
    in.bottomRows(embedding_.dim()).colwise() = e;
  } else {
    for (Eigen::Index j = 0; j < states.cols(); ++j)
      embedding_.embed_into(times[static_cast<std::size_t>(j)],
                            in.col(j).tail(embedding_.dim()));
  }
  return in;
}

Eigen::VectorXd VelocityModel::operator()(const Eigen::VectorXd& x, double t) const {
  const std::size_t k = net_index(t);
  const double times[1] = {t};
  const double bound = clip_bound(t);
  Eigen::VectorXd out = nets_[k].forward(features(x, times).col(0));
  return out.cwiseMax(-bound).cwiseMin(bound);
}

Eigen::MatrixXd VelocityModel::evaluate_rows(const Eigen::MatrixXd& points, double t) const {
  const std::size_t k = net_index(t);
  const double times[1] = {t};
  const double bound = clip_bound(t);
  Eigen::MatrixXd out = nets_[k].forward_batch(features(points.transpose(), times));
  return out.cwiseMax(-bound).cwiseMin(bound).transpose();
}

LossAndGrads fm_loss_and_grads(const VelocityModel& model, const Eigen::MatrixXd& x0,
                               const Eigen::MatrixXd& x1, std::span<const double> times) {
  require(x0.rows() == x1.rows() && x0.cols() == x1.cols(), "fm_loss: x0 and x1 shapes differ");
  require(x0.cols() == model.dim(), "fm_loss: pair dimension does not match the model");
  require(static_cast<std::size_t>(x0.rows()) == times.size(), "fm_loss: need one time per pair");
  require(x0.rows() > 0, "fm_loss: empty batch");
  const double t_hi = 1.0 - model.t_min();
  for (double t : times)
    require(t >= 0.0 && t <= t_hi, "fm_loss: t = " + std::to_string(t) + " outside [0, 1 - t_min]");

  const auto m = static_cast<double>(x0.rows());
  LossAndGrads out;
  for (const auto& net : model.nets()) out.grads.push_back(MlpParams<double>::zeros(net.layer_dims()));

  // Group pairs by the net that owns their time.
  std::vector<std::vector<Eigen::Index>> groups(model.nets().size());
  for (Eigen::Index j = 0; j < x0.rows(); ++j)
    groups[model.net_index(times[static_cast<std::size_t>(j)])].push_back(j);

  MlpNet<double>::Tape tape;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& idx = groups[k];
    if (idx.empty()) continue;
    const auto b = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd states(model.dim(), b);
    Eigen::MatrixXd targets(model.dim(), b);
    std::vector<double> t_group(idx.size());
    Eigen::VectorXd bounds(b);
    for (Eigen::Index c = 0; c < b; ++c) {
      const Eigen::Index j = idx[static_cast<std::size_t>(c)];
      const double t = times[static_cast<std::size_t>(j)];
      t_group[static_cast<std::size_t>(c)] = t;
      states.col(c) = interpolate(x0.row(j), x1.row(j), t).transpose();
      targets.col(c) = (x1.row(j) - x0.row(j)).transpose();
      bounds(c) = model.clip_bound(t);
    }
    const auto& net = model.nets()[k];
    const Eigen::MatrixXd raw = net.forward_batch(model.features(states, t_group), tape);
    Eigen::MatrixXd upstream(model.dim(), b);
    for (Eigen::Index c = 0; c < b; ++c) {
      for (Eigen::Index i = 0; i < model.dim(); ++i) {
        const double u = raw(i, c);
        const bool active = std::abs(u) > bounds(c);
        const double clipped = active ? std::copysign(bounds(c), u) : u;
        const double r = clipped - targets(i, c);
        out.loss += r * r;
        upstream(i, c) = active ? 0.0 : 2.0 * r / m;
      }
    }
    net.backward_batch(tape, upstream, out.grads[k]);
  }
  out.loss /= m;
  return out;
}

void TrainConfig::validate() const {
  require(iterations >= 0, "TrainConfig: iterations must be nonnegative");
  require(batch_size >= 1, "TrainConfig: batch_size must be at least 1");
  require(learning_rate > 0.0 && std::isfinite(learning_rate),
          "TrainConfig: learning_rate must be positive");
  require(t_min > 0.0 && t_min < 1.0, "TrainConfig: t_min must lie in (0, 1)");
  require(cosine_t_max >= 0, "TrainConfig: cosine_t_max must be nonnegative");
  if (lr_schedule == LrSchedule::cosine && cosine_t_max > 0)
    require(cosine_t_max >= iterations - 1, "TrainConfig: cosine_t_max shorter than the run");
  require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 &&
              optimizer.beta2 < 1.0,
          "TrainConfig: optimizer betas must lie in [0, 1)");
  require(optimizer.epsilon > 0.0 && optimizer.weight_decay >= 0.0,
          "TrainConfig: optimizer epsilon must be positive and weight decay nonnegative");
  require(model.width > 0 && model.depth >= 0 && model.embedding_dim > 0 &&
              model.embedding_dim % 2 == 0 && model.clip_constant > 0.0 &&
              model.embedding_base > 0.0 && model.embedding_spread > 0.0,
          "TrainConfig: invalid model architecture");
  if (grid)
    require(std::abs(grid->t_min() - t_min) <= kKnotTolerance * t_min,
            "TrainConfig: grid must end at t_min");
}

TimeGrid TrainConfig::effective_grid() const { return grid ? *grid : TimeGrid::geometric(t_min, 2.0); }

TrainResult train(const TrainConfig& config, const Eigen::MatrixXd& target_samples) {
  config.validate();
  const Eigen::Index n = target_samples.rows();
  const Eigen::Index dim = target_samples.cols();
  require(n >= 2 && dim >= 1, "train: need at least two target samples");
  require(target_samples.allFinite(), "train: target samples must be finite");
  require(n >= config.batch_size || config.replacement,
          "train: batch_size exceeds sample count; enable sampling with replacement");

  const TimeGrid grid = config.effective_grid();
  Rng init_rng(derive_seed(config.seed, "init"));
  Rng rng(derive_seed(config.seed, "train"));
  TrainResult result{
      VelocityModel::initialize(static_cast<int>(dim), config.model, config.t_min, n,
                                config.model.mode == ModelMode::piecewise
                                    ? std::optional<TimeGrid>(grid)
                                    : std::nullopt,
                                init_rng),
      {}};
  result.record.seed = config.seed;
  auto& model = result.model;

  std::normal_distribution<double> normal;
  Eigen::MatrixXd fixed_source;
  if (config.fixed_source) {
    Rng source_rng(derive_seed(config.seed, "source"));
    fixed_source.resize(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < dim; ++c) fixed_source(i, c) = normal(source_rng);
  }

  std::vector<AdamW<double>> optimizers;
  for (const auto& net : model.nets()) optimizers.emplace_back(net.layer_dims(), config.optimizer);

  const long t_max = config.cosine_t_max > 0 ? config.cosine_t_max : config.iterations;
  const Eigen::Index batch = config.batch_size;
  const double t_hi = 1.0 - config.t_min;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::vector<Eigen::Index> picks(static_cast<std::size_t>(batch));
  std::vector<double> times(static_cast<std::size_t>(batch));
  Eigen::MatrixXd x0(batch, dim), x1(batch, dim);

  result.record.losses.reserve(static_cast<std::size_t>(config.iterations));
  result.record.learning_rates.reserve(static_cast<std::size_t>(config.iterations));
  for (long step = 0; step < config.iterations; ++step) {
    const double lr = config.lr_schedule == LrSchedule::cosine
                          ? cosine_lr(config.learning_rate, step, t_max)
                          : config.learning_rate;
    if (config.replacement) {
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      for (auto& p : picks) p = pick(rng);
    } else {
      for (Eigen::Index i = 0; i < batch; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
        picks[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(i)];
      }
    }
    for (Eigen::Index i = 0; i < batch; ++i) {
      const Eigen::Index j = picks[static_cast<std::size_t>(i)];
      x1.row(i) = target_samples.row(j);
      if (config.fixed_source) {
        x0.row(i) = fixed_source.row(j);
      } else {
        for (Eigen::Index c = 0; c < dim; ++c) x0(i, c) = normal(rng);
      }
    }
    if (config.t_sampling == TimeSampling::uniform) {
      std::uniform_real_distribution<double> unif(0.0, t_hi);
      for (auto& t : times) t = unif(rng);
    } else {
      for (std::size_t i = 0; i < times.size(); ++i) {
        const auto [lo, hi] = grid.slab(i % grid.num_slabs());
        std::uniform_real_distribution<double> unif(lo, hi);
        times[i] = unif(rng);
      }
    }

    auto [loss, grads] = fm_loss_and_grads(model, x0, x1, times);
    if (!std::isfinite(loss)) throw TrainingError(step, "non-finite loss");
    try {
      for (std::size_t k = 0; k < optimizers.size(); ++k) {
        optimizers[k].step(model.nets()[k].params(), grads[k], lr);
        model.nets()[k].check_finite();
      }
    } catch (const NumericalError& e) {
      throw TrainingError(step, e.what());
    }
    result.record.losses.push_back(loss);
    result.record.learning_rates.push_back(lr);
  }
  return result;
}

LipschitzReport probe_lipschitz(const VelocityModel& model, std::span<const double> times,
                                const Eigen::MatrixXd& points, double step, double xi,
                                std::uint64_t seed) {
  require(step > 0.0, "probe_lipschitz: step must be positive");
  require(xi > 0.0 && xi < 1.0, "probe_lipschitz: xi must lie in (0, 1)");
  require(points.cols() == model.dim() && points.rows() > 0, "probe_lipschitz: bad probe points");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  LipschitzReport report;
  report.xi = xi;
  for (double t : times) {
    Eigen::MatrixXd shifted = points;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      Eigen::VectorXd u(points.cols());
      for (auto& c : u) c = normal(rng);
      shifted.row(i) += step * u.normalized().transpose();
    }
    const Eigen::MatrixXd diff = model.evaluate_rows(shifted, t) - model.evaluate_rows(points, t);
    const double ratio = diff.rowwise().norm().maxCoeff() / step;
    report.times.push_back(t);
    report.max_ratio.push_back(ratio);
    report.scaled.push_back(ratio * std::pow(1.0 - t, 1.0 - xi));
  }
  return report;
}

}  // namespace fmflow
