#pragma once

// Seeded generators for the synthetic manifold targets and the Gaussian
// source. Sample matrices are n x D with one sample per row.

#include "fmflow/common.hpp"

#include <cstdint>
#include <string>
#include <variant>

namespace fmflow {

// Projected Gaussian on S^d in the first d+1 coordinates, zero padded to D.
struct SphereSpec {
  int d = 2;
  int ambient = 4;
  Eigen::VectorXd gamma;  // length d+1; empty means zero
};

// theta_i = phi + gamma1 * i + eps_i, eps_i ~ N(-gamma1, sigma1^2),
// phi ~ Unif{-1, 1}; circles in coordinate pairs, rotated by x -> x O^T.
struct TorusSpec {
  int d = 2;
  int ambient = 4;
  double gamma1 = 0.35;
  double sigma1 = 0.38078865529319544;  // sqrt(0.35^2 + 0.15^2)
  Eigen::MatrixXd rotation;             // D x D orthogonal
  bool continuous_phase = false;        // phi ~ Unif[-1, 1] instead
};

// m spiral petals psi_i(s) = r(s) (cos theta_i(s), sin theta_i(s)).
struct FloralSpec {
  int petals = 5;
  double r_in = 1.0;
  double r_out = 4.0;
  double tau = 0.2;
  double sigma_r = 0.05;
  double sigma_theta = 0.05;
};

struct ManifoldSpec {
  std::variant<SphereSpec, TorusSpec, FloralSpec> kind;
  std::uint64_t seed = 0;

  std::string kind_name() const;
  int intrinsic_dim() const;
  int ambient_dim() const;
  void validate() const;
};

// Torus spec with a Haar rotation drawn from rotation_seed.
TorusSpec make_torus(int d, int ambient, std::uint64_t rotation_seed);

Eigen::MatrixXd sample_sphere(const SphereSpec& spec, Eigen::Index n, Rng& rng);
Eigen::MatrixXd sample_torus(const TorusSpec& spec, Eigen::Index n, Rng& rng);
Eigen::MatrixXd sample_floral(const FloralSpec& spec, Eigen::Index n, Rng& rng);

// Dispatches on the kind and seeds from spec.seed.
Eigen::MatrixXd sample_manifold(const ManifoldSpec& spec, Eigen::Index n);

// Haar orthogonal matrix: QR of a Gaussian matrix with R-diagonal sign fix.
Eigen::MatrixXd random_orthogonal(int dim, std::uint64_t seed);

// i.i.d. N(0, 1) entries from std::normal_distribution (polar Box-Muller in
// libstdc++).
Eigen::MatrixXd sample_source(int dim, Eigen::Index n, std::uint64_t seed);
Eigen::MatrixXd sample_source(int dim, Eigen::Index n, Rng& rng);

// Floral petal centerline psi_i(s).
Eigen::Vector2d floral_curve(const FloralSpec& spec, int petal, double s);

}  // namespace fmflow
