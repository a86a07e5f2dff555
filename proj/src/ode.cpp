#include "fmflow/ode.hpp"

#include <cmath>

namespace fmflow {

void SamplerGrid::validate() const {
  require(nodes.size() >= 2, "SamplerGrid needs at least two nodes");
  require(nodes.front() == 0.0, "SamplerGrid must start at 0");
  require(nodes.back() <= 1.0, "SamplerGrid must end at or below 1");
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    require(nodes[i] < nodes[i + 1], "SamplerGrid nodes must be strictly increasing");
}

SamplerGrid quadratic_grid(int N, double t_min, Scheme scheme) {
  require(N >= 1, "quadratic_grid: N must be at least 1");
  require(t_min >= 0.0 && t_min < 1.0, "quadratic_grid: t_min must lie in [0, 1)");
  const double cap = 1.0 - t_min;
  SamplerGrid grid;
  grid.scheme = scheme;
  for (int i = 0; i <= N; ++i) {
    const double r = 1.0 - static_cast<double>(i) / N;
    const double s = 1.0 - r * r;
    if (std::abs(s - cap) <= 1e-12) {
      grid.nodes.push_back(cap);
      break;
    }
    if (s > cap) break;
    grid.nodes.push_back(s);
  }
  if (grid.nodes.back() < cap) grid.nodes.push_back(cap);
  grid.validate();
  return grid;
}

SamplerGrid uniform_grid(int N, double t_end, Scheme scheme) {
  require(N >= 1, "uniform_grid: N must be at least 1");
  require(t_end > 0.0 && t_end <= 1.0, "uniform_grid: t_end must lie in (0, 1]");
  SamplerGrid grid;
  grid.scheme = scheme;
  for (int i = 0; i <= N; ++i) grid.nodes.push_back(t_end * static_cast<double>(i) / N);
  grid.nodes.back() = t_end;
  grid.validate();
  return grid;
}

const char* scheme_name(Scheme scheme) { return scheme == Scheme::euler ? "euler" : "rk4"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "euler") return Scheme::euler;
  if (name == "rk4") return Scheme::rk4;
  throw ContractError("unknown ODE scheme '" + name + "' (expected euler or rk4)");
}

}  // namespace fmflow
