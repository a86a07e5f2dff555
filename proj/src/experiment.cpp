#include "fmflow/experiment.hpp"

#include "fmflow/metrics.hpp"

#include <chrono>

namespace fmflow {

Eigen::MatrixXd sample_model(const VelocityModel& model, Eigen::Index n, const SamplerGrid& grid,
                             std::uint64_t seed) {
  const Eigen::MatrixXd starts = sample_source(model.dim(), n, seed);
  return integrate_rows([&](const Eigen::MatrixXd& x, double t) { return model.evaluate_rows(x, t); },
                        starts, grid);
}

SamplerGrid sampler_grid(const SampleConfig& config) {
  return quadratic_grid(config.steps, config.effective_t_min(), config.scheme);
}

RunSeeds RunSeeds::derive(std::uint64_t run_seed) {
  RunSeeds s;
  s.run = run_seed;
  s.data = derive_seed(run_seed, "train-data");
  s.reference = derive_seed(run_seed, "reference");
  s.rotation = derive_seed(run_seed, "rotation");
  s.train = derive_seed(run_seed, "train");
  s.sample = derive_seed(run_seed, "sample");
  s.projections = derive_seed(run_seed, "projections");
  return s;
}

ManifoldSpec cell_spec(const ExperimentCell& cell, const RunSeeds& seeds) {
  ManifoldSpec spec;
  spec.seed = seeds.data;
  if (cell.family == "sphere") {
    SphereSpec s;
    s.d = cell.d;
    s.ambient = cell.ambient;
    spec.kind = s;
  } else if (cell.family == "torus") {
    spec.kind = make_torus(cell.d, cell.ambient, seeds.rotation);
  } else if (cell.family == "floral") {
    spec.kind = cell.floral;
  } else {
    throw ContractError("unknown family '" + cell.family + "'");
  }
  spec.validate();
  return spec;
}

RunOutcome run_cell(const ExperimentCell& cell, std::uint64_t run_seed) {
  using clock = std::chrono::steady_clock;
  RunOutcome out;
  out.seeds = RunSeeds::derive(run_seed);
  out.spec = cell_spec(cell, out.seeds);
  out.train_data = sample_manifold(out.spec, cell.n_train);
  ManifoldSpec reference_spec = out.spec;
  reference_spec.seed = out.seeds.reference;
  out.reference = sample_manifold(reference_spec, cell.n_eval);

  TrainConfig config = cell.train;
  config.seed = out.seeds.train;
  if (cell.n_train < config.batch_size) config.replacement = true;
  const auto t0 = clock::now();
  out.trained = train(config, out.train_data);
  const auto t1 = clock::now();
  out.generated = sample_model(out.trained.model, cell.n_eval, sampler_grid(cell.sample), out.seeds.sample);
  const auto t2 = clock::now();
  out.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.sample_seconds = std::chrono::duration<double>(t2 - t1).count();

  out.w1_slice_std = sliced_w1_std(out.generated, out.reference, cell.n_projections, out.seeds.projections);
  out.dist = dist_manifold(out.generated, out.spec);
  out.dist_mean = out.dist.mean();
  return out;
}

ExperimentCell sphere_recipe(int d, int ambient) {
  ExperimentCell c;
  c.family = "sphere";
  c.d = d;
  c.ambient = ambient;
  c.train.model.width = 256;
  c.train.model.depth = 4;
  c.train.learning_rate = 2e-4;
  c.train.batch_size = 2048;
  c.train.iterations = 1000;
  c.sample.scheme = Scheme::euler;
  c.sample.steps = 250;
  c.train.t_min = c.sample.effective_t_min();
  return c;
}

ExperimentCell torus_recipe(int d, int ambient) {
  ExperimentCell c = sphere_recipe(d, ambient);
  c.family = "torus";
  c.train.model.depth = 6;
  return c;
}

ExperimentCell floral_recipe() {
  ExperimentCell c;
  c.family = "floral";
  c.d = 1;
  c.ambient = 2;
  c.train.model.width = 256;
  c.train.model.depth = 4;
  c.train.learning_rate = 1e-3;
  c.train.optimizer.weight_decay = 0.0;
  c.train.batch_size = 512;
  c.train.iterations = 5000;
  c.train.lr_schedule = LrSchedule::cosine;
  c.train.cosine_t_max = 5000;
  c.sample.scheme = Scheme::rk4;
  c.sample.steps = 500;
  c.train.t_min = c.sample.effective_t_min();
  return c;
}

}  // namespace fmflow
