#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fmflow {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

// Shape or domain precondition violated by the caller.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf appeared where finite values are required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration or input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public NumericalError {
 public:
  TrainingError(long step, const std::string& what)
      : NumericalError("training step " + std::to_string(step) + ": " + what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class SamplingError : public NumericalError {
 public:
  SamplingError(std::size_t node, const std::string& what)
      : NumericalError("sampler node " + std::to_string(node) + ": " + what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable sub-seed for (master, component, index). Independent of the RNG
// implementation so derived seeds survive a change of generator.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master);
  h = fnv1a64(component, h);
  return splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace fmflow
