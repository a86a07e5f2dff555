#pragma once

#include "fmflow/common.hpp"

#include <cmath>
#include <limits>

namespace fmflow {

// log(sum_i exp(a_i)) with a max shift. -inf entries contribute nothing; an
// all -inf input returns -inf.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require(a.size() > 0, "log_sum_exp: empty input");
  const Scalar top = a.maxCoeff();
  if (top == -std::numeric_limits<Scalar>::infinity()) return top;
  return top + std::log((a.array() - top).exp().sum());
}

// Normalized exp(a_i - log_sum_exp(a)); the largest entry maps to exp(0) before
// normalization, so the denominator is at least 1.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require(a.size() > 0, "softmax: empty input");
  const Scalar top = a.maxCoeff();
  require(top > -std::numeric_limits<Scalar>::infinity(), "softmax: all logits are -inf");
  VectorX<Scalar> w = (a.array() - top).exp().matrix();
  w /= w.sum();
  return w;
}

}  // namespace fmflow
