#pragma once

// TOML configuration for training, manifold generation, sampling and sweeps.

#include "fmflow/data.hpp"
#include "fmflow/flow.hpp"
#include "fmflow/ode.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fmflow {

struct SampleConfig {
  Scheme scheme = Scheme::euler;
  int steps = 250;
  double t_min = 0.0;  // 0 means 1 / steps^2
  double effective_t_min() const {
    return t_min > 0.0 ? t_min : 1.0 / (static_cast<double>(steps) * steps);
  }
};

// Keys: seed; [model] mode width depth embedding_dim embedding_spread
// embedding_base clip_constant;
// [train] iterations batch_size learning_rate lr_schedule cosine_t_max t_min
// t_sampling replacement fixed_source; [optimizer] beta1 beta2 epsilon
// weight_decay; optional [grid] kind = "geometric" (ratio) or "theorem"
// (n alpha d beta ratio), whose last knot then sets t_min.
TrainConfig train_config_from_toml(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);
nlohmann::json train_config_to_json(const TrainConfig& config);

// Keys: kind = sphere|torus|floral, seed, d, D, and per kind: gamma (sphere);
// gamma1 sigma1 rotation_seed continuous_phase (torus); petals r_in r_out tau
// sigma_r sigma_theta (floral).
ManifoldSpec manifold_spec_from_toml(std::string_view text);
ManifoldSpec load_manifold_spec(const std::filesystem::path& path);

// [sample] scheme steps t_min.
SampleConfig sample_config_from_toml(std::string_view text);

struct SweepSpec {
  std::string family = "sphere";
  std::vector<int> intrinsic_dims{2};
  std::vector<int> ambient_multipliers{2};  // D = k * d (ignored for floral)
  std::vector<long> n_train{2048};
  int runs = 5;
  std::uint64_t seed = 0;
  long n_eval = 2048;
  int n_projections = 128;
  std::filesystem::path output_dir = "sweep";
  TrainConfig train;
  SampleConfig sample;
  // Floral parameters when family = floral.
  FloralSpec floral;
};

SweepSpec sweep_spec_from_toml(std::string_view text);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

}  // namespace fmflow
