#include "fmflow/checkpoint.hpp"
#include "fmflow/config.hpp"
#include "fmflow/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace fmflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fmflow_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Csv, RoundTripProperty) {
  Rng rng(1);
  std::uniform_int_distribution<int> size(0, 9);
  std::uniform_real_distribution<double> exponent(-300, 300);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = size(rng), cols = 1 + size(rng);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = std::pow(10.0, exponent(rng)) * (i % 2 ? -1.0 : 1.0) * std::uniform_real_distribution<double>(1, 10)(rng);
    if (m.size() > 0) m(0, 0) = std::numeric_limits<double>::denorm_min();
    const Eigen::MatrixXd back = io::matrix_from_csv(io::matrix_to_csv(m));
    if (rows == 0) {
      EXPECT_EQ(back.size(), 0);
      continue;
    }
    ASSERT_EQ(back.rows(), rows);
    ASSERT_EQ(back.cols(), cols);
    EXPECT_EQ(back, m);
  }
}

TEST(Csv, HeaderAndErrors) {
  const Eigen::MatrixXd m = io::matrix_from_csv("a,b\n1,2\n3,4\n");
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m(1, 1), 4.0);
  EXPECT_THROW(io::matrix_from_csv("1,2\n3\n"), ConfigError);
  EXPECT_THROW(io::matrix_from_csv("1,2\n3,x\n"), ConfigError);
  EXPECT_EQ(io::matrix_from_csv("").size(), 0);
  EXPECT_EQ(io::matrix_to_csv(Eigen::MatrixXd::Zero(1, 3)).substr(0, 9), "x0,x1,x2\n");
}

TEST(Io, AtomicWriteAndHash) {
  const fs::path p = scratch("atomic.txt");
  io::atomic_write(p, "hello");
  EXPECT_EQ(io::read_file(p), "hello");
  io::atomic_write(p, "world");
  EXPECT_EQ(io::read_file(p), "world");
  EXPECT_EQ(io::file_hash(p), io::content_hash("world"));
  EXPECT_EQ(io::content_hash("").size(), 16u);
  EXPECT_EQ(io::content_hash(""), "cbf29ce484222325");
  EXPECT_THROW(io::read_file(scratch("missing.txt")), ConfigError);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0})
    EXPECT_EQ(std::stod(io::format_double(v)), v);
}

TEST(Checkpoint, SingleModelRoundTrip) {
  Rng rng(3);
  ModelConfig cfg;
  cfg.width = 12;
  cfg.depth = 3;
  cfg.embedding_dim = 8;
  const auto model = VelocityModel::initialize(3, cfg, 1e-3, 500, std::nullopt, rng);
  const fs::path p = scratch("model.json");
  io::atomic_write(p, model_checkpoint_text(model));
  const auto back = load_model(p);
  EXPECT_EQ(back.t_min(), model.t_min());
  EXPECT_EQ(back.n_samples(), 500);
  const Eigen::Vector3d x(0.3, -0.2, 1.1);
  for (double t : {0.0, 0.4, 0.999}) EXPECT_EQ(back(x, t), model(x, t));
  const auto j = nlohmann::json::parse(io::read_file(p));
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["layer_dims"], (std::vector<int>{11, 12, 12, 12, 3}));
  EXPECT_EQ(j["time_embedding"]["dim"], 8);
}

TEST(Checkpoint, PiecewiseRoundTrip) {
  Rng rng(4);
  ModelConfig cfg;
  cfg.mode = ModelMode::piecewise;
  cfg.width = 6;
  cfg.depth = 1;
  cfg.embedding_dim = 4;
  const auto grid = TimeGrid::geometric(1.0 / 16, 2.0);
  const auto model = VelocityModel::initialize(2, cfg, 1.0 / 16, 100, grid, rng);
  const auto back = model_from_json(model_to_json(model));
  ASSERT_EQ(back.nets().size(), 4u);
  EXPECT_EQ(back.grid()->knots(), grid.knots());
  for (double t : {0.1, 0.6, 0.8, 0.9}) EXPECT_EQ(back(Eigen::Vector2d(1, 2), t), model(Eigen::Vector2d(1, 2), t));
}

TEST(Checkpoint, RejectsMalformed) {
  EXPECT_THROW(model_from_json(nlohmann::json{{"version", 2}}), ConfigError);
  EXPECT_THROW(model_from_json(nlohmann::json::object()), ConfigError);
}

TEST(Checkpoint, SpecRoundTrip) {
  const ManifoldSpec torus{make_torus(2, 6, 5), 9};
  const auto back = spec_from_json(spec_to_json(torus));
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(std::get<TorusSpec>(back.kind).rotation, std::get<TorusSpec>(torus.kind).rotation);
  const ManifoldSpec sphere{SphereSpec{3, 7, {}}, 1};
  EXPECT_EQ(spec_from_json(spec_to_json(sphere)).ambient_dim(), 7);
  const ManifoldSpec floral{FloralSpec{}, 2};
  EXPECT_EQ(spec_from_json(spec_to_json(floral)).kind_name(), "floral");
}

TEST(Config, TrainDefaultsAndOverrides) {
  const auto c = train_config_from_toml(R"(
seed = 3
[model]
width = 32
depth = 2
[train]
iterations = 10
batch_size = 64
learning_rate = 1e-3
lr_schedule = "cosine"
t_sampling = "stratified"
[optimizer]
weight_decay = 0.0
)");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.model.width, 32);
  EXPECT_EQ(c.iterations, 10);
  EXPECT_EQ(c.lr_schedule, LrSchedule::cosine);
  EXPECT_EQ(c.t_sampling, TimeSampling::stratified);
  EXPECT_EQ(c.optimizer.weight_decay, 0.0);
  EXPECT_EQ(c.optimizer.beta2, 0.999);
  EXPECT_DOUBLE_EQ(c.t_min, 1.0 / 62500);
}

TEST(Config, TheoremGrid) {
  const auto c = train_config_from_toml(R"(
[model]
mode = "piecewise"
[grid]
kind = "theorem"
n = 10000
alpha = 1.0
d = 3
beta = 2.0
)");
  EXPECT_EQ(c.t_min, 0.5);
  EXPECT_EQ(c.grid->num_slabs(), 1u);
}

TEST(Config, Errors) {
  EXPECT_THROW(train_config_from_toml("[train]\nbatch_size = 0\n"), ConfigError);
  EXPECT_THROW(train_config_from_toml("[train]\nlr_schedule = \"step\"\n"), ConfigError);
  EXPECT_THROW(train_config_from_toml("[model]\nwidth = \"wide\"\n"), ConfigError);
  EXPECT_THROW(train_config_from_toml("not toml = = 3"), ConfigError);
  EXPECT_THROW(manifold_spec_from_toml("kind = \"klein\"\n"), ConfigError);
  EXPECT_THROW(manifold_spec_from_toml("kind = \"sphere\"\nd = 3\nD = 3\n"), ConfigError);
}

TEST(Config, ManifoldSpecs) {
  const auto torus = manifold_spec_from_toml("kind = \"torus\"\nd = 2\nD = 6\nseed = 4\n");
  EXPECT_EQ(torus.ambient_dim(), 6);
  EXPECT_EQ(std::get<TorusSpec>(torus.kind).rotation, random_orthogonal(6, derive_seed(4, "rotation")));
  const auto floral = manifold_spec_from_toml("kind = \"floral\"\npetals = 7\n");
  EXPECT_EQ(std::get<FloralSpec>(floral.kind).petals, 7);
}

TEST(Config, Sweep) {
  const auto s = sweep_spec_from_toml(R"(
family = "sphere"
d = [2, 3]
ambient_multipliers = [2, 4]
n_train = 512
runs = 2
[sample]
scheme = "rk4"
steps = 100
)");
  EXPECT_EQ(s.intrinsic_dims, (std::vector<int>{2, 3}));
  EXPECT_EQ(s.n_train, (std::vector<long>{512}));
  EXPECT_EQ(s.sample.scheme, Scheme::rk4);
  EXPECT_DOUBLE_EQ(s.sample.effective_t_min(), 1e-4);
}
