#pragma once

// Fully connected ReLU networks with exact reverse-mode gradients, AdamW,
// a cosine learning-rate schedule and a sinusoidal time embedding.

#include "fmflow/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace fmflow {

// Parameter-shaped storage. Used for the network itself, its gradients and
// the optimizer moments.
template <typename Scalar>
struct MlpParams {
  std::vector<MatrixX<Scalar>> weights;  // weights[l] is (dims[l+1] x dims[l])
  std::vector<VectorX<Scalar>> biases;   // biases[l] has dims[l+1] entries

  static MlpParams zeros(const std::vector<int>& layer_dims) {
    MlpParams p;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
      p.weights.push_back(MatrixX<Scalar>::Zero(layer_dims[l + 1], layer_dims[l]));
      p.biases.push_back(VectorX<Scalar>::Zero(layer_dims[l + 1]));
    }
    return p;
  }

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  MlpParams& operator+=(const MlpParams& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
    return *this;
  }
};

template <typename Scalar>
class MlpNet {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  // Layer outputs recorded by the taped forward pass; values[0] is the input,
  // values[l] for 0 < l < L+1 are post-ReLU hidden activations, the last entry
  // is the network output.
  struct Tape {
    std::vector<Matrix> values;
  };

  MlpNet() = default;

  explicit MlpNet(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
    require(dims_.size() >= 2, "MlpNet needs at least input and output dimensions");
    for (int d : dims_) require(d > 0, "MlpNet layer dimensions must be positive");
    params_ = MlpParams<Scalar>::zeros(dims_);
  }

  // He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static MlpNet he_uniform(std::vector<int> layer_dims, Rng& rng) {
    MlpNet net(std::move(layer_dims));
    for (auto& w : net.params_.weights) {
      const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(dist(rng));
    }
    return net;
  }

  // Hidden widths `width` repeated `depth` times between input and output.
  static std::vector<int> mlp_dims(int input, int width, int depth, int output) {
    std::vector<int> dims{input};
    for (int i = 0; i < depth; ++i) dims.push_back(width);
    dims.push_back(output);
    return dims;
  }

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t num_affine() const { return params_.weights.size(); }
  std::size_t depth() const { return dims_.size() - 2; }
  int width() const {
    int w = 0;
    for (std::size_t l = 1; l + 1 < dims_.size(); ++l) w = std::max(w, dims_[l]);
    return w;
  }
  std::size_t parameter_count() const { return params_.size(); }

  MlpParams<Scalar>& params() { return params_; }
  const MlpParams<Scalar>& params() const { return params_; }

  Vector forward(const Eigen::Ref<const Vector>& input) const {
    require(input.size() == input_dim(), "MlpNet::forward: input has " +
                                             std::to_string(input.size()) + " entries, expected " +
                                             std::to_string(input_dim()));
    Vector h = input;
    const std::size_t last = num_affine() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
      Vector z = params_.weights[l] * h + params_.biases[l];
      h = (l == last) ? std::move(z) : Vector(z.cwiseMax(Scalar(0)));
    }
    return h;
  }

  // Columns are independent samples.
  Matrix forward_batch(const Eigen::Ref<const Matrix>& inputs) const {
    check_batch(inputs);
    Matrix h = inputs;
    const std::size_t last = num_affine() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
      Matrix z = params_.weights[l] * h;
      z.colwise() += params_.biases[l];
      if (l != last) z = z.cwiseMax(Scalar(0));
      h = std::move(z);
    }
    return h;
  }

  Matrix forward_batch(const Eigen::Ref<const Matrix>& inputs, Tape& tape) const {
    check_batch(inputs);
    tape.values.resize(num_affine() + 1);
    tape.values[0] = inputs;
    const std::size_t last = num_affine() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
      Matrix& z = tape.values[l + 1];
      z.noalias() = params_.weights[l] * tape.values[l];
      z.colwise() += params_.biases[l];
      if (l != last) z = z.cwiseMax(Scalar(0));
    }
    return tape.values.back();
  }

  // Accumulates (+=) the parameter gradient of <upstream, output> into grads.
  // ReLU subgradient at a pre-activation of exactly 0 is 0.
  void backward_batch(const Tape& tape, const Eigen::Ref<const Matrix>& upstream,
                      MlpParams<Scalar>& grads, Matrix* input_grad = nullptr) const {
    require(tape.values.size() == num_affine() + 1, "MlpNet::backward: tape does not match net");
    require(upstream.rows() == output_dim() && upstream.cols() == tape.values[0].cols(),
            "MlpNet::backward: upstream shape mismatch");
    require(grads.weights.size() == num_affine(), "MlpNet::backward: gradient storage mismatch");
    Matrix delta = upstream;
    for (std::size_t l = num_affine(); l-- > 0;) {
      grads.weights[l].noalias() += delta * tape.values[l].transpose();
      grads.biases[l] += delta.rowwise().sum();
      if (l == 0 && input_grad == nullptr) break;
      Matrix back = params_.weights[l].transpose() * delta;
      if (l > 0) back = (tape.values[l].array() > Scalar(0)).select(back, Scalar(0));
      delta = std::move(back);
    }
    if (input_grad != nullptr) *input_grad = std::move(delta);
  }

  // Single-sample reverse pass: gradient of <upstream, forward(input)>.
  std::pair<MlpParams<Scalar>, Vector> backward(const Eigen::Ref<const Vector>& input,
                                                const Eigen::Ref<const Vector>& upstream) const {
    require(upstream.size() == output_dim(), "MlpNet::backward: upstream has wrong length");
    Tape tape;
    forward_batch(Matrix(input), tape);
    auto grads = MlpParams<Scalar>::zeros(dims_);
    Matrix input_grad;
    backward_batch(tape, Matrix(upstream), grads, &input_grad);
    return {std::move(grads), Vector(input_grad.col(0))};
  }

  void check_finite() const {
    for (std::size_t l = 0; l < num_affine(); ++l) {
      if (!params_.weights[l].allFinite() || !params_.biases[l].allFinite())
        throw NumericalError("non-finite parameter in layer " + std::to_string(l));
    }
  }

 private:
  void check_batch(const Eigen::Ref<const Matrix>& inputs) const {
    require(!dims_.empty(), "MlpNet used before construction");
    require(inputs.rows() == input_dim(), "MlpNet::forward_batch: input has " +
                                              std::to_string(inputs.rows()) + " rows, expected " +
                                              std::to_string(input_dim()));
  }

  std::vector<int> dims_;
  MlpParams<Scalar> params_;
};

template <typename Scalar>
struct AdamWConfig {
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  Scalar weight_decay = Scalar(0.01);
};

// Decoupled weight decay Adam. The step counter is incremented before bias
// correction, so the first update uses 1 - beta^1.
template <typename Scalar>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const std::vector<int>& layer_dims, AdamWConfig<Scalar> config)
      : config_(config),
        first_(MlpParams<Scalar>::zeros(layer_dims)),
        second_(MlpParams<Scalar>::zeros(layer_dims)) {}

  void step(MlpParams<Scalar>& params, const MlpParams<Scalar>& grads, Scalar learning_rate) {
    require(grads.weights.size() == params.weights.size() &&
                first_.weights.size() == params.weights.size(),
            "AdamW::step: parameter/gradient layer count mismatch");
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
      require(grads.weights[l].rows() == params.weights[l].rows() &&
                  grads.weights[l].cols() == params.weights[l].cols() &&
                  grads.biases[l].size() == params.biases[l].size(),
              "AdamW::step: shape mismatch in layer " + std::to_string(l));
      if (!grads.weights[l].allFinite())
        throw NumericalError("non-finite gradient in layer " + std::to_string(l) + " weights");
      if (!grads.biases[l].allFinite())
        throw NumericalError("non-finite gradient in layer " + std::to_string(l) + " biases");
    }
    ++steps_;
    const Scalar c1 = Scalar(1) - std::pow(config_.beta1, static_cast<Scalar>(steps_));
    const Scalar c2 = Scalar(1) - std::pow(config_.beta2, static_cast<Scalar>(steps_));
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
      update(params.weights[l], grads.weights[l], first_.weights[l], second_.weights[l], c1, c2,
             learning_rate);
      update(params.biases[l], grads.biases[l], first_.biases[l], second_.biases[l], c1, c2,
             learning_rate);
    }
  }

  long steps() const { return steps_; }
  const AdamWConfig<Scalar>& config() const { return config_; }
  const MlpParams<Scalar>& first_moment() const { return first_; }
  const MlpParams<Scalar>& second_moment() const { return second_; }

 private:
  template <typename P, typename G, typename M>
  void update(P& p, const G& g, M& m, M& v, Scalar c1, Scalar c2, Scalar lr) const {
    m = config_.beta1 * m + (Scalar(1) - config_.beta1) * g;
    v = config_.beta2 * v + (Scalar(1) - config_.beta2) * g.cwiseProduct(g);
    p.array() -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon) +
                       config_.weight_decay * p.array());
  }

  AdamWConfig<Scalar> config_;
  MlpParams<Scalar> first_;
  MlpParams<Scalar> second_;
  long steps_ = 0;
};

template <typename Scalar>
Scalar cosine_lr(Scalar base_lr, long step, long t_max) {
  require(t_max > 0, "cosine_lr: t_max must be positive");
  require(step >= 0 && step <= t_max, "cosine_lr: step outside [0, t_max]");
  const Scalar phase = std::numbers::pi_v<Scalar> * static_cast<Scalar>(step) /
                       static_cast<Scalar>(t_max);
  return base_lr * (Scalar(1) + std::cos(phase)) / Scalar(2);
}

// Sinusoidal features (sin f_i t, cos f_i t), interleaved per frequency.
template <typename Scalar>
class TimeEmbedding {
 public:
  using Vector = VectorX<Scalar>;

  TimeEmbedding() = default;
  explicit TimeEmbedding(std::vector<Scalar> frequencies) : frequencies_(std::move(frequencies)) {
    require(!frequencies_.empty(), "TimeEmbedding needs at least one frequency");
    for (Scalar f : frequencies_)
      require(std::isfinite(static_cast<double>(f)) && f > Scalar(0),
              "TimeEmbedding frequencies must be positive");
  }

  // f_i = base * spread^(i / (dim/2 - 1)), i = 0 .. dim/2 - 1.
  static TimeEmbedding geometric(int dim = 64, Scalar spread = Scalar(1000),
                                 Scalar base = Scalar(2) * std::numbers::pi_v<Scalar>) {
    require(dim > 0 && dim % 2 == 0, "TimeEmbedding dim must be even and positive");
    require(base > Scalar(0) && spread > Scalar(0), "TimeEmbedding base and spread must be positive");
    const int half = dim / 2;
    std::vector<Scalar> f(half);
    for (int i = 0; i < half; ++i) {
      const Scalar e = half == 1 ? Scalar(0) : static_cast<Scalar>(i) / static_cast<Scalar>(half - 1);
      f[i] = base * std::pow(spread, e);
    }
    return TimeEmbedding(std::move(f));
  }

  int dim() const { return static_cast<int>(2 * frequencies_.size()); }
  const std::vector<Scalar>& frequencies() const { return frequencies_; }

  template <typename Out>
  void embed_into(Scalar t, Out&& out) const {
    for (std::size_t i = 0; i < frequencies_.size(); ++i) {
      out[2 * i] = std::sin(frequencies_[i] * t);
      out[2 * i + 1] = std::cos(frequencies_[i] * t);
    }
  }

  Vector embed(Scalar t) const {
    Vector out(dim());
    embed_into(t, out);
    return out;
  }

 private:
  std::vector<Scalar> frequencies_;
};

}  // namespace fmflow
