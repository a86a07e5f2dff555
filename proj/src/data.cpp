#include "fmflow/data.hpp"

#include <cmath>
#include <numbers>

namespace fmflow {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_sphere(const SphereSpec& s) {
  require(s.d >= 1, "sphere: intrinsic dimension must be positive");
  require(s.ambient >= s.d + 1, "sphere: ambient dimension must be at least d + 1");
  require(s.gamma.size() == 0 || s.gamma.size() == s.d + 1, "sphere: gamma must have d + 1 entries");
}

void validate_torus(const TorusSpec& s) {
  require(s.d >= 1, "torus: intrinsic dimension must be positive");
  require(s.ambient >= 2 * s.d, "torus: ambient dimension must be at least 2d");
  require(s.sigma1 >= 0.0, "torus: sigma1 must be nonnegative");
  require(s.rotation.rows() == s.ambient && s.rotation.cols() == s.ambient,
          "torus: rotation must be D x D");
  const double err =
      (s.rotation.transpose() * s.rotation - Eigen::MatrixXd::Identity(s.ambient, s.ambient))
          .cwiseAbs()
          .maxCoeff();
  require(err <= 1e-10, "torus: rotation is not orthogonal to 1e-10");
}

void validate_floral(const FloralSpec& s) {
  require(s.petals >= 2, "floral: need at least two petals");
  require(s.r_in > 0.0 && s.r_in < s.r_out, "floral: need 0 < r_in < r_out");
  require(s.tau > 0.0 && s.tau < 1.0, "floral: tau must lie in (0, 1)");
  require(s.sigma_r >= 0.0 && s.sigma_theta >= 0.0, "floral: noise scales must be nonnegative");
}

}  // namespace

std::string ManifoldSpec::kind_name() const {
  return std::visit(Overloaded{[](const SphereSpec&) { return std::string("sphere"); },
                               [](const TorusSpec&) { return std::string("torus"); },
                               [](const FloralSpec&) { return std::string("floral"); }},
                    kind);
}

int ManifoldSpec::intrinsic_dim() const {
  return std::visit(Overloaded{[](const SphereSpec& s) { return s.d; },
                               [](const TorusSpec& s) { return s.d; },
                               [](const FloralSpec&) { return 1; }},
                    kind);
}

int ManifoldSpec::ambient_dim() const {
  return std::visit(Overloaded{[](const SphereSpec& s) { return s.ambient; },
                               [](const TorusSpec& s) { return s.ambient; },
                               [](const FloralSpec&) { return 2; }},
                    kind);
}

void ManifoldSpec::validate() const {
  std::visit(Overloaded{[](const SphereSpec& s) { validate_sphere(s); },
                        [](const TorusSpec& s) { validate_torus(s); },
                        [](const FloralSpec& s) { validate_floral(s); }},
             kind);
}

TorusSpec make_torus(int d, int ambient, std::uint64_t rotation_seed) {
  TorusSpec spec;
  spec.d = d;
  spec.ambient = ambient;
  spec.rotation = random_orthogonal(ambient, rotation_seed);
  return spec;
}

Eigen::MatrixXd sample_sphere(const SphereSpec& spec, Eigen::Index n, Rng& rng) {
  validate_sphere(spec);
  std::normal_distribution<double> normal;
  const Eigen::VectorXd gamma = spec.gamma.size() ? spec.gamma : Eigen::VectorXd::Zero(spec.d + 1);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, spec.ambient);
  Eigen::VectorXd z(spec.d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    do {
      for (Eigen::Index c = 0; c < z.size(); ++c) z(c) = gamma(c) + normal(rng);
    } while (z.squaredNorm() == 0.0);
    out.row(i).head(spec.d + 1) = (z / z.norm()).transpose();
  }
  return out;
}

Eigen::MatrixXd sample_torus(const TorusSpec& spec, Eigen::Index n, Rng& rng) {
  validate_torus(spec);
  std::normal_distribution<double> noise(-spec.gamma1, spec.sigma1);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> phase(-1.0, 1.0);
  Eigen::MatrixXd axis = Eigen::MatrixXd::Zero(n, spec.ambient);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double phi = spec.continuous_phase ? phase(rng) : (coin(rng) ? 1.0 : -1.0);
    for (int i = 1; i <= spec.d; ++i) {
      const double theta = phi + spec.gamma1 * i + noise(rng);
      axis(r, 2 * (i - 1)) = std::cos(theta);
      axis(r, 2 * (i - 1) + 1) = std::sin(theta);
    }
  }
  return axis * spec.rotation.transpose();
}

Eigen::Vector2d floral_curve(const FloralSpec& spec, int petal, double s) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double r = spec.r_in + s * (spec.r_out - spec.r_in);
  const double theta = two_pi * petal / spec.petals + two_pi * spec.tau * s;
  return {r * std::cos(theta), r * std::sin(theta)};
}

Eigen::MatrixXd sample_floral(const FloralSpec& spec, Eigen::Index n, Rng& rng) {
  validate_floral(spec);
  std::uniform_int_distribution<int> petal(0, spec.petals - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::MatrixXd out(n, 2);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = petal(rng);
    const double s = unit(rng);
    const double z1 = normal(rng), z2 = normal(rng), z3 = normal(rng);
    const double r = spec.r_in + s * (spec.r_out - spec.r_in);
    const double theta = two_pi * i / spec.petals + two_pi * spec.tau * s + spec.sigma_theta * z1;
    out(k, 0) = r * std::cos(theta) + spec.sigma_r * z2;
    out(k, 1) = r * std::sin(theta) + spec.sigma_r * z3;
  }
  return out;
}

Eigen::MatrixXd sample_manifold(const ManifoldSpec& spec, Eigen::Index n) {
  require(n >= 0, "sample_manifold: negative sample count");
  spec.validate();
  Rng rng(derive_seed(spec.seed, "manifold"));
  return std::visit([&](const auto& s) -> Eigen::MatrixXd {
    using T = std::decay_t<decltype(s)>;
    if constexpr (std::is_same_v<T, SphereSpec>) return sample_sphere(s, n, rng);
    else if constexpr (std::is_same_v<T, TorusSpec>) return sample_torus(s, n, rng);
    else return sample_floral(s, n, rng);
  }, spec.kind);
}

Eigen::MatrixXd random_orthogonal(int dim, std::uint64_t seed) {
  require(dim >= 1, "random_orthogonal: dimension must be positive");
  const Eigen::MatrixXd g = sample_source(dim, dim, derive_seed(seed, "orthogonal"));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

Eigen::MatrixXd sample_source(int dim, Eigen::Index n, Rng& rng) {
  require(dim >= 1 && n >= 0, "sample_source: bad shape");
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c) out(i, c) = normal(rng);
  return out;
}

Eigen::MatrixXd sample_source(int dim, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_source(dim, n, rng);
}

}  // namespace fmflow
