#pragma once

// Subcommands of the fmflow tool. Each cmd_* throws ConfigError (exit 2),
// TrainingError (exit 3) or SamplingError (exit 4); run_cli maps them.

#include "fmflow/ode.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fmflow::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kTraining = 3, kSampling = 4 };

struct GenerateOptions {
  std::filesystem::path spec;  // TOML manifold spec
  long n = 2048;
  std::filesystem::path out;   // CSV; sidecar written next to it as .json
  std::optional<std::uint64_t> seed;
};
void cmd_generate(const GenerateOptions& opt);

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out_dir;
  double lipschitz_xi = 0.1;
};
// Returns the RunRecord JSON that was written to out_dir/run.json.
nlohmann::json cmd_train(const TrainOptions& opt);

struct SampleOptions {
  std::filesystem::path checkpoint;
  long n = 2048;
  Scheme scheme = Scheme::euler;
  int steps = 250;
  std::optional<double> t_min;  // default 1 / steps^2
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
void cmd_sample(const SampleOptions& opt);

struct EvalOptions {
  std::vector<std::filesystem::path> samples;    // one file per run
  std::vector<std::filesystem::path> reference;  // one shared or one per run
  std::filesystem::path spec;                    // JSON sidecar from generate
  int n_projections = 128;
  std::uint64_t seed = 0;
  std::filesystem::path out;                     // MetricReport JSON
  std::filesystem::path table;                   // appended CSV row
};
nlohmann::json cmd_eval(const EvalOptions& opt);

struct OracleOptions {
  std::filesystem::path target;  // CSV atoms, equal weights
  std::string model = "zero";    // "zero", "exact" or a checkpoint path
  std::string slabs;             // "lo:hi,lo:hi,..."
  long n_mc = 1000;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
void cmd_oracle(const OracleOptions& opt);

struct SvgOptions {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> labels;
  std::filesystem::path out;
};
void cmd_svg(const SvgOptions& opt);

struct SweepOptions {
  std::filesystem::path config;
};
// Runs every cell, continuing past failures. Returns kOk, or the exit code of
// the most severe failure category (training, then sampling, then config).
int cmd_sweep(const SweepOptions& opt);

struct Slab {
  double lo;
  double hi;
};
std::vector<Slab> parse_slabs(const std::string& text);

std::filesystem::path sidecar_path(const std::filesystem::path& csv);

int run_cli(int argc, char** argv);

}  // namespace fmflow::cli
