#include "fmflow/config.hpp"

#include "fmflow/io.hpp"

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include <sstream>

namespace fmflow {

namespace {

toml::table parse(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream ss;
    ss << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(ss.str());
  }
}

template <typename T>
T get_or(const toml::node_view<const toml::node>& node, const char* key, T fallback) {
  const auto v = node[key];
  if (!v) return fallback;
  if constexpr (std::is_same_v<T, double>) {
    if (auto x = v.template value<double>()) return *x;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto x = v.template value<bool>()) return *x;
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto x = v.template value<std::string>()) return *x;
  } else {
    if (auto x = v.template value<std::int64_t>()) return static_cast<T>(*x);
  }
  throw ConfigError(std::string("config key '") + key + "' has the wrong type");
}

template <typename T>
std::vector<T> list_or(const toml::node_view<const toml::node>& node, const char* key, std::vector<T> fallback) {
  const auto v = node[key];
  if (!v) return fallback;
  std::vector<T> out;
  if (const auto* arr = v.as_array()) {
    for (const auto& item : *arr) {
      const auto x = item.template value<std::int64_t>();
      if (!x) throw ConfigError(std::string("config key '") + key + "' must hold integers");
      out.push_back(static_cast<T>(*x));
    }
    if (out.empty()) throw ConfigError(std::string("config key '") + key + "' is empty");
    return out;
  }
  if (auto x = v.template value<std::int64_t>()) return {static_cast<T>(*x)};
  throw ConfigError(std::string("config key '") + key + "' must be an integer or list");
}

void read_train(const toml::node_view<const toml::node>& root, TrainConfig& c) {
  c.seed = static_cast<std::uint64_t>(get_or<std::int64_t>(root, "seed", static_cast<std::int64_t>(c.seed)));

  const auto model = root["model"];
  const auto mode = get_or<std::string>(model, "mode", "single");
  if (mode == "single") c.model.mode = ModelMode::single;
  else if (mode == "piecewise") c.model.mode = ModelMode::piecewise;
  else throw ConfigError("model.mode must be single or piecewise");
  c.model.width = get_or<int>(model, "width", c.model.width);
  c.model.depth = get_or<int>(model, "depth", c.model.depth);
  c.model.embedding_dim = get_or<int>(model, "embedding_dim", c.model.embedding_dim);
  c.model.clip_constant = get_or<double>(model, "clip_constant", c.model.clip_constant);
  c.model.embedding_spread = get_or<double>(model, "embedding_spread", c.model.embedding_spread);
  c.model.embedding_base = get_or<double>(model, "embedding_base", c.model.embedding_base);

  const auto train = root["train"];
  c.iterations = get_or<long>(train, "iterations", c.iterations);
  c.batch_size = get_or<long>(train, "batch_size", c.batch_size);
  c.learning_rate = get_or<double>(train, "learning_rate", c.learning_rate);
  const auto schedule = get_or<std::string>(train, "lr_schedule", "constant");
  if (schedule == "constant") c.lr_schedule = LrSchedule::constant;
  else if (schedule == "cosine") c.lr_schedule = LrSchedule::cosine;
  else throw ConfigError("train.lr_schedule must be constant or cosine");
  c.cosine_t_max = get_or<long>(train, "cosine_t_max", c.cosine_t_max);
  c.t_min = get_or<double>(train, "t_min", c.t_min);
  const auto sampling = get_or<std::string>(train, "t_sampling", "uniform");
  if (sampling == "uniform") c.t_sampling = TimeSampling::uniform;
  else if (sampling == "stratified") c.t_sampling = TimeSampling::stratified;
  else throw ConfigError("train.t_sampling must be uniform or stratified");
  c.replacement = get_or<bool>(train, "replacement", c.replacement);
  c.fixed_source = get_or<bool>(train, "fixed_source", c.fixed_source);

  const auto opt = root["optimizer"];
  c.optimizer.beta1 = get_or<double>(opt, "beta1", c.optimizer.beta1);
  c.optimizer.beta2 = get_or<double>(opt, "beta2", c.optimizer.beta2);
  c.optimizer.epsilon = get_or<double>(opt, "epsilon", c.optimizer.epsilon);
  c.optimizer.weight_decay = get_or<double>(opt, "weight_decay", c.optimizer.weight_decay);

  const auto grid = root["grid"];
  if (grid) {
    const auto kind = get_or<std::string>(grid, "kind", "geometric");
    const double ratio = get_or<double>(grid, "ratio", 2.0);
    try {
      if (kind == "geometric") {
        c.grid = TimeGrid::geometric(c.t_min, ratio);
      } else if (kind == "theorem") {
        c.grid = build_time_grid(get_or<long>(grid, "n", 0), get_or<double>(grid, "alpha", 1.0),
                                 get_or<int>(grid, "d", 3), get_or<double>(grid, "beta", 2.0), ratio)
                     .grid;
        c.t_min = c.grid->t_min();
      } else {
        throw ConfigError("grid.kind must be geometric or theorem");
      }
    } catch (const ContractError& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

SampleConfig read_sample(const toml::node_view<const toml::node>& node) {
  SampleConfig s;
  try {
    s.scheme = parse_scheme(get_or<std::string>(node, "scheme", "euler"));
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  s.steps = get_or<int>(node, "steps", s.steps);
  s.t_min = get_or<double>(node, "t_min", s.t_min);
  if (s.steps < 1) throw ConfigError("sample.steps must be at least 1");
  if (s.t_min < 0.0 || s.t_min >= 1.0) throw ConfigError("sample.t_min must lie in [0, 1)");
  return s;
}

FloralSpec read_floral(const toml::node_view<const toml::node>& n) {
  FloralSpec f;
  f.petals = get_or<int>(n, "petals", f.petals);
  f.r_in = get_or<double>(n, "r_in", f.r_in);
  f.r_out = get_or<double>(n, "r_out", f.r_out);
  f.tau = get_or<double>(n, "tau", f.tau);
  f.sigma_r = get_or<double>(n, "sigma_r", f.sigma_r);
  f.sigma_theta = get_or<double>(n, "sigma_theta", f.sigma_theta);
  return f;
}

}  // namespace

TrainConfig train_config_from_toml(std::string_view text) {
  const auto table = parse(text);
  TrainConfig c;
  read_train(toml::node_view<const toml::node>(table), c);
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  try {
    return train_config_from_toml(io::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j{
      {"seed", c.seed},
      {"model",
       {{"mode", c.model.mode == ModelMode::single ? "single" : "piecewise"},
        {"width", c.model.width},
        {"depth", c.model.depth},
        {"embedding_dim", c.model.embedding_dim},
        {"embedding_spread", c.model.embedding_spread},
        {"embedding_base", c.model.embedding_base},
        {"clip_constant", c.model.clip_constant}}},
      {"train",
       {{"iterations", c.iterations},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"lr_schedule", c.lr_schedule == LrSchedule::constant ? "constant" : "cosine"},
        {"cosine_t_max", c.cosine_t_max},
        {"t_min", c.t_min},
        {"t_sampling", c.t_sampling == TimeSampling::uniform ? "uniform" : "stratified"},
        {"replacement", c.replacement},
        {"fixed_source", c.fixed_source}}},
      {"optimizer",
       {{"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon},
        {"weight_decay", c.optimizer.weight_decay}}}};
  if (c.grid) j["grid"] = {{"knots", c.grid->knots()}};
  return j;
}

ManifoldSpec manifold_spec_from_toml(std::string_view text) {
  const auto table = parse(text);
  const toml::node_view<const toml::node> root(table);
  ManifoldSpec spec;
  spec.seed = static_cast<std::uint64_t>(get_or<std::int64_t>(root, "seed", 0));
  const auto kind = get_or<std::string>(root, "kind", "");
  if (kind == "sphere") {
    SphereSpec s;
    s.d = get_or<int>(root, "d", s.d);
    s.ambient = get_or<int>(root, "D", s.ambient);
    if (const auto* arr = root["gamma"].as_array()) {
      s.gamma.resize(static_cast<Eigen::Index>(arr->size()));
      for (std::size_t i = 0; i < arr->size(); ++i) {
        const auto x = (*arr)[i].value<double>();
        if (!x) throw ConfigError("gamma must hold numbers");
        s.gamma(static_cast<Eigen::Index>(i)) = *x;
      }
    }
    spec.kind = s;
  } else if (kind == "torus") {
    const int d = get_or<int>(root, "d", 2);
    const int ambient = get_or<int>(root, "D", 4);
    if (d < 1 || ambient < 2 * d) throw ConfigError("torus: need d >= 1 and D >= 2d");
    const auto rotation_seed = static_cast<std::uint64_t>(
        get_or<std::int64_t>(root, "rotation_seed", static_cast<std::int64_t>(derive_seed(spec.seed, "rotation"))));
    TorusSpec s = make_torus(d, ambient, rotation_seed);
    s.gamma1 = get_or<double>(root, "gamma1", s.gamma1);
    s.sigma1 = get_or<double>(root, "sigma1", s.sigma1);
    s.continuous_phase = get_or<bool>(root, "continuous_phase", false);
    spec.kind = s;
  } else if (kind == "floral") {
    spec.kind = read_floral(root);
  } else {
    throw ConfigError("manifold kind must be sphere, torus or floral");
  }
  try {
    spec.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

ManifoldSpec load_manifold_spec(const std::filesystem::path& path) {
  try {
    return manifold_spec_from_toml(io::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

SampleConfig sample_config_from_toml(std::string_view text) {
  const auto table = parse(text);
  return read_sample(toml::node_view<const toml::node>(table)["sample"]);
}

SweepSpec sweep_spec_from_toml(std::string_view text) {
  const auto table = parse(text);
  const toml::node_view<const toml::node> root(table);
  SweepSpec s;
  s.family = get_or<std::string>(root, "family", s.family);
  if (s.family != "sphere" && s.family != "torus" && s.family != "floral")
    throw ConfigError("sweep family must be sphere, torus or floral");
  s.intrinsic_dims = list_or<int>(root, "d", s.intrinsic_dims);
  s.ambient_multipliers = list_or<int>(root, "ambient_multipliers", s.ambient_multipliers);
  s.n_train = list_or<long>(root, "n_train", s.n_train);
  s.runs = get_or<int>(root, "runs", s.runs);
  s.seed = static_cast<std::uint64_t>(get_or<std::int64_t>(root, "seed", 0));
  s.n_eval = get_or<long>(root, "n_eval", s.n_eval);
  s.n_projections = get_or<int>(root, "n_projections", s.n_projections);
  s.output_dir = get_or<std::string>(root, "output_dir", s.output_dir.string());
  read_train(root, s.train);
  s.sample = read_sample(root["sample"]);
  s.floral = read_floral(root["floral"]);
  if (s.runs < 1) throw ConfigError("sweep runs must be at least 1");
  if (s.n_eval < 2) throw ConfigError("sweep n_eval must be at least 2");
  if (s.n_projections < 1) throw ConfigError("sweep n_projections must be at least 1");
  for (int d : s.intrinsic_dims)
    if (d < 1) throw ConfigError("sweep d values must be positive");
  for (int k : s.ambient_multipliers)
    if (k < 1) throw ConfigError("sweep ambient multipliers must be positive");
  for (long n : s.n_train)
    if (n < 2) throw ConfigError("sweep n_train values must be at least 2");
  return s;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  try {
    return sweep_spec_from_toml(io::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fmflow
