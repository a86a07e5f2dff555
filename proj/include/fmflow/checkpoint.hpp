#pragma once

// JSON forms of networks, velocity models and manifold specs.
//
// A checkpoint is {"version": 1, "layer_dims": [...], "weights": [[row-major
// floats] per layer], "biases": [[...] per layer], "time_embedding": {"dim",
// "frequencies"}, "model": {...}}. The top-level weights/biases hold the first
// (or only) net; piecewise models list the remaining slab nets under
// "slab_nets" in slab order.

#include "fmflow/data.hpp"
#include "fmflow/flow.hpp"
#include "fmflow/nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace fmflow {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json net_params_to_json(const MlpNet<double>& net);
MlpNet<double> net_from_json(const std::vector<int>& layer_dims, const nlohmann::json& j);

nlohmann::json embedding_to_json(const TimeEmbedding<double>& emb);
TimeEmbedding<double> embedding_from_json(const nlohmann::json& j);

// Bare network checkpoint (no model block).
nlohmann::json net_checkpoint(const MlpNet<double>& net, const TimeEmbedding<double>& emb);

nlohmann::json model_to_json(const VelocityModel& model);
VelocityModel model_from_json(const nlohmann::json& j);

std::string model_checkpoint_text(const VelocityModel& model);
VelocityModel load_model(const std::filesystem::path& path);

nlohmann::json spec_to_json(const ManifoldSpec& spec);
ManifoldSpec spec_from_json(const nlohmann::json& j);
ManifoldSpec load_spec_sidecar(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace fmflow
