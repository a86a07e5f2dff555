#pragma once

// Fixed-grid Euler and classical RK4 integration of a velocity field.

#include "fmflow/common.hpp"

#include <string>
#include <vector>

namespace fmflow {

enum class Scheme { euler, rk4 };

// Strictly increasing nodes starting at 0 and ending at or below 1.
struct SamplerGrid {
  std::vector<double> nodes;
  Scheme scheme = Scheme::euler;

  void validate() const;
  std::size_t steps() const { return nodes.size() - 1; }
};

// s_i = 1 - (1 - i/N)^2, truncated at 1 - t_min; 1 - t_min is appended when it
// is not already a node.
SamplerGrid quadratic_grid(int N, double t_min, Scheme scheme = Scheme::euler);
SamplerGrid uniform_grid(int N, double t_end, Scheme scheme = Scheme::euler);

const char* scheme_name(Scheme scheme);
Scheme parse_scheme(const std::string& name);

// Field is callable as field(x, t) -> vector. Returns the state at every node.
template <typename Field, typename Scalar>
std::vector<VectorX<Scalar>> integrate(const Field& field, const VectorX<Scalar>& x0,
                                       const SamplerGrid& grid) {
  grid.validate();
  require(x0.allFinite(), "integrate: initial state must be finite");
  std::vector<VectorX<Scalar>> path;
  path.reserve(grid.nodes.size());
  path.push_back(x0);
  for (std::size_t i = 0; i + 1 < grid.nodes.size(); ++i) {
    const Scalar s = static_cast<Scalar>(grid.nodes[i]);
    const Scalar h = static_cast<Scalar>(grid.nodes[i + 1] - grid.nodes[i]);
    const VectorX<Scalar>& x = path.back();
    VectorX<Scalar> next;
    if (grid.scheme == Scheme::euler) {
      next = x + h * VectorX<Scalar>(field(x, s));
    } else {
      const Scalar half = h / Scalar(2);
      const VectorX<Scalar> k1 = field(x, s);
      const VectorX<Scalar> k2 = field(VectorX<Scalar>(x + half * k1), s + half);
      const VectorX<Scalar> k3 = field(VectorX<Scalar>(x + half * k2), s + half);
      const VectorX<Scalar> k4 = field(VectorX<Scalar>(x + h * k3), s + h);
      next = x + (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
    }
    if (!next.allFinite()) throw SamplingError(i + 1, "non-finite state");
    path.push_back(std::move(next));
  }
  return path;
}

// Endpoints for many starting points at once. Rows of `starts` are states and
// field(points, t) maps an n x D block of states to their velocities.
template <typename BatchField>
Eigen::MatrixXd integrate_rows(const BatchField& field, const Eigen::MatrixXd& starts,
                               const SamplerGrid& grid) {
  grid.validate();
  require(starts.allFinite(), "integrate_rows: initial states must be finite");
  Eigen::MatrixXd x = starts;
  for (std::size_t i = 0; i + 1 < grid.nodes.size(); ++i) {
    const double s = grid.nodes[i];
    const double h = grid.nodes[i + 1] - grid.nodes[i];
    if (grid.scheme == Scheme::euler) {
      x += h * Eigen::MatrixXd(field(x, s));
    } else {
      const double half = h / 2.0;
      const Eigen::MatrixXd k1 = field(x, s);
      const Eigen::MatrixXd k2 = field(Eigen::MatrixXd(x + half * k1), s + half);
      const Eigen::MatrixXd k3 = field(Eigen::MatrixXd(x + half * k2), s + half);
      const Eigen::MatrixXd k4 = field(Eigen::MatrixXd(x + h * k3), s + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite()) throw SamplingError(i + 1, "non-finite state");
  }
  return x;
}

}  // namespace fmflow
