#include "fmflow/checkpoint.hpp"

#include "fmflow/io.hpp"

namespace fmflow {

using nlohmann::json;

namespace {

template <typename T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("matrix must be an array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != static_cast<std::size_t>(m.cols())) throw ConfigError("ragged matrix rows");
    for (std::size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

json net_params_to_json(const MlpNet<double>& net) {
  json weights = json::array(), biases = json::array();
  for (std::size_t l = 0; l < net.num_affine(); ++l) {
    const auto& w = net.params().weights[l];
    json flat = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    weights.push_back(std::move(flat));
    const auto& b = net.params().biases[l];
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  return json{{"weights", std::move(weights)}, {"biases", std::move(biases)}};
}

MlpNet<double> net_from_json(const std::vector<int>& layer_dims, const json& j) {
  MlpNet<double> net(layer_dims);
  const auto weights = get_field<std::vector<std::vector<double>>>(j, "weights");
  const auto biases = get_field<std::vector<std::vector<double>>>(j, "biases");
  if (weights.size() != net.num_affine() || biases.size() != net.num_affine())
    throw ConfigError("checkpoint layer count does not match layer_dims");
  for (std::size_t l = 0; l < net.num_affine(); ++l) {
    auto& w = net.params().weights[l];
    auto& b = net.params().biases[l];
    if (weights[l].size() != static_cast<std::size_t>(w.size()) ||
        biases[l].size() != static_cast<std::size_t>(b.size()))
      throw ConfigError("checkpoint layer " + std::to_string(l) + " has the wrong size");
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = weights[l][static_cast<std::size_t>(r * w.cols() + c)];
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = biases[l][static_cast<std::size_t>(i)];
  }
  try {
    net.check_finite();
  } catch (const NumericalError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  return net;
}

json embedding_to_json(const TimeEmbedding<double>& emb) {
  return json{{"dim", emb.dim()}, {"frequencies", emb.frequencies()}};
}

TimeEmbedding<double> embedding_from_json(const json& j) {
  const int dim = get_field<int>(j, "dim");
  auto freqs = get_field<std::vector<double>>(j, "frequencies");
  if (dim != static_cast<int>(2 * freqs.size())) throw ConfigError("time_embedding dim != 2 * #frequencies");
  try {
    return TimeEmbedding<double>(std::move(freqs));
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

json net_checkpoint(const MlpNet<double>& net, const TimeEmbedding<double>& emb) {
  json j = net_params_to_json(net);
  j["version"] = kCheckpointVersion;
  j["layer_dims"] = net.layer_dims();
  j["time_embedding"] = embedding_to_json(emb);
  return j;
}

json model_to_json(const VelocityModel& model) {
  json j = net_checkpoint(model.nets().front(), model.embedding());
  json block{{"mode", model.mode() == ModelMode::single ? "single" : "piecewise"},
             {"dim", model.dim()},
             {"t_min", model.t_min()},
             {"clip_constant", model.clip_constant()},
             {"n_samples", model.n_samples()}};
  if (model.grid()) {
    block["knots"] = model.grid()->knots();
    if (model.grid()->boundary_index()) block["boundary_index"] = *model.grid()->boundary_index();
  }
  j["model"] = std::move(block);
  if (model.nets().size() > 1) {
    json slabs = json::array();
    for (std::size_t k = 1; k < model.nets().size(); ++k) slabs.push_back(net_params_to_json(model.nets()[k]));
    j["slab_nets"] = std::move(slabs);
  }
  return j;
}

VelocityModel model_from_json(const json& j) {
  if (get_field<int>(j, "version") != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version");
  const auto dims = get_field<std::vector<int>>(j, "layer_dims");
  const auto emb = embedding_from_json(get_field<json>(j, "time_embedding"));
  const json block = get_field<json>(j, "model");
  const auto mode_name = get_field<std::string>(block, "mode");
  if (mode_name != "single" && mode_name != "piecewise") throw ConfigError("unknown model mode " + mode_name);
  const ModelMode mode = mode_name == "single" ? ModelMode::single : ModelMode::piecewise;
  std::vector<MlpNet<double>> nets;
  try {
    nets.push_back(net_from_json(dims, j));
    if (j.contains("slab_nets"))
      for (const auto& s : j.at("slab_nets")) nets.push_back(net_from_json(dims, s));
    std::optional<TimeGrid> grid;
    if (block.contains("knots")) {
      std::optional<std::size_t> boundary;
      if (block.contains("boundary_index")) boundary = block.at("boundary_index").get<std::size_t>();
      grid = TimeGrid::from_knots(block.at("knots").get<std::vector<double>>(), boundary);
    }
    return VelocityModel(mode, std::move(nets), emb, get_field<double>(block, "t_min"),
                         get_field<double>(block, "clip_constant"), get_field<long>(block, "n_samples"),
                         std::move(grid));
  } catch (const ContractError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

std::string model_checkpoint_text(const VelocityModel& model) { return model_to_json(model).dump() + "\n"; }

VelocityModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json spec_to_json(const ManifoldSpec& spec) {
  json j{{"kind", spec.kind_name()}, {"seed", spec.seed}, {"d", spec.intrinsic_dim()}, {"D", spec.ambient_dim()}};
  json params;
  if (const auto* s = std::get_if<SphereSpec>(&spec.kind)) {
    const Eigen::VectorXd g = s->gamma.size() ? s->gamma : Eigen::VectorXd::Zero(s->d + 1);
    params["gamma"] = std::vector<double>(g.data(), g.data() + g.size());
  } else if (const auto* s = std::get_if<TorusSpec>(&spec.kind)) {
    params["gamma1"] = s->gamma1;
    params["sigma1"] = s->sigma1;
    params["continuous_phase"] = s->continuous_phase;
    j["rotation"] = matrix_to_json(s->rotation);
  } else {
    const auto& f = std::get<FloralSpec>(spec.kind);
    params = json{{"petals", f.petals}, {"r_in", f.r_in}, {"r_out", f.r_out}, {"tau", f.tau},
                  {"sigma_r", f.sigma_r}, {"sigma_theta", f.sigma_theta}};
  }
  j["params"] = std::move(params);
  return j;
}

ManifoldSpec spec_from_json(const json& j) {
  ManifoldSpec spec;
  spec.seed = j.value("seed", std::uint64_t{0});
  const auto kind = get_field<std::string>(j, "kind");
  const json params = j.value("params", json::object());
  if (kind == "sphere") {
    SphereSpec s;
    s.d = get_field<int>(j, "d");
    s.ambient = get_field<int>(j, "D");
    if (params.contains("gamma")) {
      const auto g = params.at("gamma").get<std::vector<double>>();
      s.gamma = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    }
    spec.kind = s;
  } else if (kind == "torus") {
    TorusSpec s;
    s.d = get_field<int>(j, "d");
    s.ambient = get_field<int>(j, "D");
    s.gamma1 = params.value("gamma1", s.gamma1);
    s.sigma1 = params.value("sigma1", s.sigma1);
    s.continuous_phase = params.value("continuous_phase", false);
    s.rotation = matrix_from_json(get_field<json>(j, "rotation"));
    spec.kind = s;
  } else if (kind == "floral") {
    FloralSpec f;
    f.petals = params.value("petals", f.petals);
    f.r_in = params.value("r_in", f.r_in);
    f.r_out = params.value("r_out", f.r_out);
    f.tau = params.value("tau", f.tau);
    f.sigma_r = params.value("sigma_r", f.sigma_r);
    f.sigma_theta = params.value("sigma_theta", f.sigma_theta);
    spec.kind = f;
  } else {
    throw ConfigError("unknown manifold kind '" + kind + "'");
  }
  try {
    spec.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

ManifoldSpec load_spec_sidecar(const std::filesystem::path& path) {
  try {
    return spec_from_json(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fmflow
