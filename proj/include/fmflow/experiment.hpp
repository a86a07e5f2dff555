#pragma once

// One generate -> train -> sample -> evaluate run for a synthetic family.

#include "fmflow/config.hpp"
#include "fmflow/data.hpp"
#include "fmflow/flow.hpp"
#include "fmflow/ode.hpp"

#include <cstdint>
#include <string>

namespace fmflow {

// Pushes n fresh source draws (seeded) through the model on the sampler grid.
Eigen::MatrixXd sample_model(const VelocityModel& model, Eigen::Index n, const SamplerGrid& grid,
                             std::uint64_t seed);

SamplerGrid sampler_grid(const SampleConfig& config);

struct ExperimentCell {
  std::string family = "sphere";  // sphere | torus | floral
  int d = 2;
  int ambient = 4;
  long n_train = 2048;
  long n_eval = 2048;
  int n_projections = 128;
  TrainConfig train;
  SampleConfig sample;
  FloralSpec floral;
};

// Seeds for every random component of a run, derived from one run seed.
struct RunSeeds {
  std::uint64_t run = 0;
  std::uint64_t data = 0;
  std::uint64_t reference = 0;
  std::uint64_t rotation = 0;
  std::uint64_t train = 0;
  std::uint64_t sample = 0;
  std::uint64_t projections = 0;
  static RunSeeds derive(std::uint64_t run_seed);
};

struct RunOutcome {
  RunSeeds seeds;
  ManifoldSpec spec;
  Eigen::MatrixXd train_data;
  Eigen::MatrixXd reference;
  TrainResult trained;
  Eigen::MatrixXd generated;
  double w1_slice_std = 0.0;
  Eigen::VectorXd dist;
  double dist_mean = 0.0;
  double train_seconds = 0.0;
  double sample_seconds = 0.0;
};

// Training and reference data come from the same spec with independent seeds.
ManifoldSpec cell_spec(const ExperimentCell& cell, const RunSeeds& seeds);
RunOutcome run_cell(const ExperimentCell& cell, std::uint64_t run_seed);

// Reference recipe cells.
ExperimentCell sphere_recipe(int d, int ambient);
ExperimentCell torus_recipe(int d, int ambient);
ExperimentCell floral_recipe();

}  // namespace fmflow
