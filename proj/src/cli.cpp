#include "fmflow/cli.hpp"

#include "fmflow/checkpoint.hpp"
#include "fmflow/config.hpp"
#include "fmflow/experiment.hpp"
#include "fmflow/io.hpp"
#include "fmflow/metrics.hpp"
#include "fmflow/oracle.hpp"
#include "fmflow/svg.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fmflow::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json file_entry(const fs::path& path) { return json{{"path", path.string()}, {"hash", io::file_hash(path)}}; }

std::string loss_csv(const TrainRecord& record) {
  std::string out = "step,loss,lr\n";
  for (std::size_t i = 0; i < record.losses.size(); ++i)
    out += std::to_string(i) + "," + io::format_double(record.losses[i]) + "," +
           io::format_double(record.learning_rates[i]) + "\n";
  return out;
}

Eigen::MatrixXd read_cloud(const fs::path& path) {
  Eigen::MatrixXd m = io::read_matrix_csv(path);
  if (!m.allFinite()) throw ConfigError(path.string() + ": non-finite values");
  return m;
}

json lipschitz_json(const LipschitzReport& r) {
  return json{{"xi", r.xi}, {"times", r.times}, {"max_ratio", r.max_ratio}, {"scaled", r.scaled}};
}

// Writes checkpoint, loss curve and RunRecord into dir; the record is written
// last so every file it references exists.
json persist_training(const fs::path& dir, const TrainResult& trained, const TrainConfig& config,
                      const std::string& config_text, const json& extra_files, double train_seconds,
                      const Eigen::MatrixXd& probe_points, double xi, const json& metrics) {
  fs::create_directories(dir);
  const fs::path checkpoint = dir / "checkpoint.json";
  const fs::path losses = dir / "loss.csv";
  io::atomic_write(checkpoint, model_checkpoint_text(trained.model));
  io::atomic_write(losses, loss_csv(trained.record));

  const std::vector<double> probe_times{0.1, 0.5, 0.9, 0.99};
  const auto lip = probe_lipschitz(trained.model, probe_times, probe_points, 1e-4, xi,
                                   derive_seed(config.seed, "lipschitz"));
  const json config_json = train_config_to_json(config);
  json record{{"tool", "fmflow"},
              {"tool_version", kToolVersion},
              {"config_toml", config_text},
              {"config", config_json},
              {"config_hash", io::content_hash(config_json.dump())},
              {"seeds", {{"master", config.seed}, {"init", derive_seed(config.seed, "init")},
                         {"train", derive_seed(config.seed, "train")}}},
              {"checkpoint", file_entry(checkpoint)},
              {"loss_curve", file_entry(losses)},
              {"final_loss", trained.record.losses.empty() ? json(nullptr) : json(trained.record.losses.back())},
              {"lipschitz_probe", lipschitz_json(lip)},
              {"timings", {{"train_seconds", train_seconds}}},
              {"metrics", metrics}};
  for (const auto& [role, path] : extra_files.items()) record["files"][role] = file_entry(path.get<std::string>());
  io::atomic_write(dir / "run.json", record.dump(2) + "\n");
  return record;
}

std::string spec_echo(const ManifoldSpec& spec, long n) {
  json j = spec_to_json(spec);
  j["n"] = n;
  return j.dump(2) + "\n";
}

std::string format_sd(const std::optional<double>& sd) { return sd ? io::format_double(*sd) : "NA"; }

}  // namespace

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

void cmd_generate(const GenerateOptions& opt) {
  ManifoldSpec spec = load_manifold_spec(opt.spec);
  if (opt.seed) spec.seed = *opt.seed;
  if (opt.n < 0) throw ConfigError("generate: n must be nonnegative");
  const fs::path out = io::output_path(opt.out);
  io::write_matrix_csv(out, sample_manifold(spec, opt.n));
  io::atomic_write(sidecar_path(out), spec_echo(spec, opt.n));
}

json cmd_train(const TrainOptions& opt) {
  const std::string config_text = io::read_file(opt.config);
  TrainConfig config;
  try {
    config = train_config_from_toml(config_text);
  } catch (const ConfigError& e) {
    throw ConfigError(opt.config.string() + ": " + e.what());
  }
  const Eigen::MatrixXd data = read_cloud(opt.data);
  if (data.rows() < 2 || data.cols() < 1) throw ConfigError("train: data needs at least two rows");
  if (data.rows() < config.batch_size && !config.replacement)
    throw ConfigError("train: batch_size exceeds the data size; set train.replacement = true");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult trained;
  try {
    trained = train(config, data);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Eigen::MatrixXd probes = data.topRows(std::min<Eigen::Index>(64, data.rows()));
  return persist_training(io::output_path(opt.out_dir), trained, config, config_text,
                          json{{"data", fs::absolute(opt.data).string()}}, seconds, probes, opt.lipschitz_xi,
                          json::array());
}

void cmd_sample(const SampleOptions& opt) {
  const VelocityModel model = load_model(opt.checkpoint);
  if (opt.n < 0) throw ConfigError("sample: n must be nonnegative");
  if (opt.steps < 1) throw ConfigError("sample: steps must be at least 1");
  const double t_min = opt.t_min.value_or(1.0 / (static_cast<double>(opt.steps) * opt.steps));
  if (!(t_min > 0.0 && t_min < 1.0)) throw ConfigError("sample: t_min must lie in (0, 1)");
  if (model.mode() == ModelMode::piecewise && t_min < model.t_min())
    throw ConfigError("sample: t_min below the piecewise model's last slab");
  const SamplerGrid grid = quadratic_grid(opt.steps, t_min, opt.scheme);
  const Eigen::MatrixXd samples = sample_model(model, opt.n, grid, opt.seed);
  const fs::path out = io::output_path(opt.out);
  io::write_matrix_csv(out, samples);
  json sidecar{{"scheme", scheme_name(opt.scheme)},
               {"steps", opt.steps},
               {"t_min", t_min},
               {"nodes", grid.nodes},
               {"checkpoint", file_entry(opt.checkpoint)},
               {"seed", opt.seed},
               {"n", opt.n},
               {"dim", model.dim()}};
  io::atomic_write(sidecar_path(out), sidecar.dump(2) + "\n");
}

json cmd_eval(const EvalOptions& opt) {
  if (opt.samples.empty()) throw ConfigError("eval: at least one samples file is required");
  if (opt.reference.empty() || (opt.reference.size() != 1 && opt.reference.size() != opt.samples.size()))
    throw ConfigError("eval: give one reference file or one per samples file");
  if (opt.n_projections < 1) throw ConfigError("eval: n_projections must be positive");
  const ManifoldSpec spec = load_spec_sidecar(opt.spec);
  MetricReport report;
  report.n_projections = opt.n_projections;
  std::vector<double> pooled;
  for (std::size_t r = 0; r < opt.samples.size(); ++r) {
    const Eigen::MatrixXd samples = read_cloud(opt.samples[r]);
    const Eigen::MatrixXd reference = read_cloud(opt.reference[opt.reference.size() == 1 ? 0 : r]);
    if (samples.cols() != spec.ambient_dim() || reference.cols() != spec.ambient_dim())
      throw ConfigError("eval: cloud dimension does not match the spec (D = " +
                        std::to_string(spec.ambient_dim()) + ")");
    if (samples.rows() < 2 || reference.rows() < 2) throw ConfigError("eval: clouds need at least two rows");
    const std::uint64_t seed = derive_seed(opt.seed, "projections", r);
    double w1 = 0.0;
    try {
      w1 = sliced_w1_std(samples, reference, opt.n_projections, seed);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("eval: ") + e.what());
    }
    const Eigen::VectorXd dist = dist_manifold(samples, spec);
    report.seeds.push_back(seed);
    report.w1_per_run.push_back(w1);
    report.dist_per_run.push_back(dist.mean());
    pooled.insert(pooled.end(), dist.begin(), dist.end());
  }
  report.n_runs = static_cast<int>(opt.samples.size());
  report.w1_slice_std = mean_sd(report.w1_per_run);
  report.dist_manifold = mean_sd(report.dist_per_run);
  for (double q : {0.5, 0.9, 0.99}) report.dist_quantiles.push_back(quantile(pooled, q));

  auto sd_json = [](const std::optional<double>& sd) { return sd ? json(*sd) : json(nullptr); };
  json j{{"d", spec.intrinsic_dim()},
         {"D", spec.ambient_dim()},
         {"kind", spec.kind_name()},
         {"w1_slice_std", {{"mean", report.w1_slice_std.mean}, {"sd", sd_json(report.w1_slice_std.sd)},
                           {"per_run", report.w1_per_run}}},
         {"dist_manifold", {{"mean", report.dist_manifold.mean}, {"sd", sd_json(report.dist_manifold.sd)},
                            {"per_run", report.dist_per_run},
                            {"quantiles", {{"q50", report.dist_quantiles[0]}, {"q90", report.dist_quantiles[1]},
                                           {"q99", report.dist_quantiles[2]}}}}},
         {"n_projections", report.n_projections},
         {"n_runs", report.n_runs},
         {"seeds", report.seeds}};
  if (!opt.out.empty()) io::atomic_write(io::output_path(opt.out), j.dump(2) + "\n");
  if (!opt.table.empty()) {
    const fs::path table = io::output_path(opt.table);
    std::string text = fs::exists(table) ? io::read_file(table) : "d,D,w1_mean,w1_sd,dist_mean,dist_sd\n";
    text += std::to_string(spec.intrinsic_dim()) + "," + std::to_string(spec.ambient_dim()) + "," +
            io::format_double(report.w1_slice_std.mean) + "," + format_sd(report.w1_slice_std.sd) + "," +
            io::format_double(report.dist_manifold.mean) + "," + format_sd(report.dist_manifold.sd) + "\n";
    io::atomic_write(table, text);
  }
  return j;
}

std::vector<Slab> parse_slabs(const std::string& text) {
  std::vector<Slab> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("slab '" + item + "' is not of the form lo:hi");
    Slab s{};
    try {
      std::size_t used_lo = 0, used_hi = 0;
      const std::string lo = item.substr(0, colon), hi = item.substr(colon + 1);
      s.lo = std::stod(lo, &used_lo);
      s.hi = std::stod(hi, &used_hi);
      if (used_lo != lo.size() || used_hi != hi.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ConfigError("slab '" + item + "' has non-numeric bounds");
    }
    if (!(s.lo >= 0.0 && s.lo < s.hi && s.hi < 1.0))
      throw ConfigError("slab '" + item + "' must satisfy 0 <= lo < hi < 1");
    out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no slabs given");
  return out;
}

void cmd_oracle(const OracleOptions& opt) {
  const auto slabs = parse_slabs(opt.slabs);
  if (opt.n_mc < 2) throw ConfigError("oracle: n_mc must be at least 2");
  const Eigen::MatrixXd atoms = read_cloud(opt.target);
  if (atoms.rows() < 1) throw ConfigError("oracle: target has no atoms");
  const AtomicTarget target = AtomicTarget::uniform(atoms);
  std::optional<VelocityModel> model;
  if (opt.model != "zero" && opt.model != "exact") {
    model = load_model(opt.model);
    if (model->dim() != target.dim()) throw ConfigError("oracle: model and target dimensions differ");
  }
  std::string csv = "t_lo,t_hi,mse,stderr,n_mc,seed\n";
  for (std::size_t k = 0; k < slabs.size(); ++k) {
    const std::uint64_t seed = derive_seed(opt.seed, "oracle", k);
    const fmflow::Slab slab{slabs[k].lo, slabs[k].hi};
    ProbeEstimate est;
    if (opt.model == "zero") {
      est = velocity_mse([&](const Eigen::VectorXd& x, double) { return Eigen::VectorXd::Zero(x.size()).eval(); },
                         target, slab, opt.n_mc, seed);
    } else if (opt.model == "exact") {
      est = velocity_mse([&](const Eigen::VectorXd& x, double t) { return exact_velocity(target, x, t); }, target,
                         slab, opt.n_mc, seed);
    } else {
      if (model->mode() == ModelMode::piecewise && slab.hi > 1.0 - model->t_min())
        throw ConfigError("oracle: slab extends beyond the model's trained range");
      est = velocity_mse(*model, target, slab, opt.n_mc, seed);
    }
    csv += io::format_double(slab.lo) + "," + io::format_double(slab.hi) + "," + io::format_double(est.mse) + "," +
           io::format_double(est.standard_error) + "," + std::to_string(est.n_mc) + "," + std::to_string(seed) + "\n";
  }
  io::atomic_write(io::output_path(opt.out), csv);
}

void cmd_svg(const SvgOptions& opt) {
  if (opt.inputs.empty()) throw ConfigError("svg: at least one input file is required");
  std::vector<ScatterLayer> layers;
  for (std::size_t k = 0; k < opt.inputs.size(); ++k) {
    Eigen::MatrixXd points = read_cloud(opt.inputs[k]);
    if (points.rows() > 0 && points.cols() != 2)
      throw ConfigError("svg: " + opt.inputs[k].string() + " has " + std::to_string(points.cols()) +
                        " columns; scatter plots need D = 2");
    if (points.rows() == 0) points.resize(0, 2);
    layers.push_back({k < opt.labels.size() ? opt.labels[k] : opt.inputs[k].stem().string(), std::move(points)});
  }
  io::atomic_write(io::output_path(opt.out), scatter_svg(layers));
}

int cmd_sweep(const SweepOptions& opt) {
  const std::string config_text = io::read_file(opt.config);
  SweepSpec sweep;
  try {
    sweep = sweep_spec_from_toml(config_text);
  } catch (const ConfigError& e) {
    throw ConfigError(opt.config.string() + ": " + e.what());
  }
  const fs::path root = io::output_path(sweep.output_dir);
  fs::create_directories(root);

  std::string table = "family,d,D,n,w1_mean,w1_sd,dist_mean,dist_sd,runs_ok,runs_failed\n";
  json failures = json::array();
  bool any_training = false, any_sampling = false, any_other = false;
  std::vector<std::pair<int, int>> cells;
  if (sweep.family == "floral") {
    cells.emplace_back(1, 2);
  } else {
    for (int d : sweep.intrinsic_dims)
      for (int k : sweep.ambient_multipliers) cells.emplace_back(d, k * d);
  }
  std::size_t cell_index = 0;
  for (const auto& [d, ambient] : cells) {
    for (long n : sweep.n_train) {
      ExperimentCell cell;
      cell.family = sweep.family;
      cell.d = d;
      cell.ambient = ambient;
      cell.n_train = n;
      cell.n_eval = sweep.n_eval;
      cell.n_projections = sweep.n_projections;
      cell.train = sweep.train;
      cell.sample = sweep.sample;
      cell.floral = sweep.floral;
      const fs::path cell_dir =
          root / ("d" + std::to_string(d) + "_D" + std::to_string(ambient) + "_n" + std::to_string(n));
      std::vector<double> w1s, dists;
      int failed = 0;
      for (int r = 0; r < sweep.runs; ++r) {
        const std::uint64_t run_seed = derive_seed(sweep.seed, "run", cell_index * 1000 + static_cast<std::uint64_t>(r));
        const fs::path run_dir = cell_dir / ("run" + std::to_string(r));
        try {
          const RunOutcome outcome = run_cell(cell, run_seed);
          fs::create_directories(run_dir);
          io::write_matrix_csv(run_dir / "train.csv", outcome.train_data);
          io::write_matrix_csv(run_dir / "reference.csv", outcome.reference);
          io::write_matrix_csv(run_dir / "samples.csv", outcome.generated);
          io::atomic_write(run_dir / "spec.json", spec_echo(outcome.spec, cell.n_train));
          TrainConfig used = cell.train;
          used.seed = outcome.seeds.train;
          json metrics = json::array({json{{"w1_slice_std", outcome.w1_slice_std},
                                           {"dist_manifold_mean", outcome.dist_mean},
                                           {"projection_seed", outcome.seeds.projections},
                                           {"sample_seed", outcome.seeds.sample},
                                           {"sample_seconds", outcome.sample_seconds}}});
          persist_training(run_dir, outcome.trained, used, config_text,
                           json{{"train_data", (run_dir / "train.csv").string()},
                                {"reference", (run_dir / "reference.csv").string()},
                                {"samples", (run_dir / "samples.csv").string()},
                                {"spec", (run_dir / "spec.json").string()}},
                           outcome.train_seconds, outcome.train_data.topRows(std::min<Eigen::Index>(64, n)), 0.1,
                           metrics);
          w1s.push_back(outcome.w1_slice_std);
          dists.push_back(outcome.dist_mean);
          std::cerr << "sweep " << cell_dir.filename().string() << " run " << r << ": W1_std "
                    << outcome.w1_slice_std << ", dist_M " << outcome.dist_mean << "\n";
        } catch (const TrainingError& e) {
          any_training = true;
          ++failed;
          failures.push_back({{"cell", cell_dir.string()}, {"run", r}, {"kind", "training"}, {"error", e.what()}});
        } catch (const SamplingError& e) {
          any_sampling = true;
          ++failed;
          failures.push_back({{"cell", cell_dir.string()}, {"run", r}, {"kind", "sampling"}, {"error", e.what()}});
        } catch (const std::exception& e) {
          any_other = true;
          ++failed;
          failures.push_back({{"cell", cell_dir.string()}, {"run", r}, {"kind", "config"}, {"error", e.what()}});
        }
      }
      table += sweep.family + "," + std::to_string(d) + "," + std::to_string(ambient) + "," + std::to_string(n) + ",";
      if (w1s.empty()) {
        table += "NA,NA,NA,NA";
      } else {
        const auto w = mean_sd(w1s);
        const auto m = mean_sd(dists);
        table += io::format_double(w.mean) + "," + format_sd(w.sd) + "," + io::format_double(m.mean) + "," +
                 format_sd(m.sd);
      }
      table += "," + std::to_string(w1s.size()) + "," + std::to_string(failed) + "\n";
      ++cell_index;
    }
  }
  io::atomic_write(root / "table.csv", table);
  io::atomic_write(root / "failures.json", failures.dump(2) + "\n");
  if (any_training) return kTraining;
  if (any_sampling) return kSampling;
  if (any_other) return kConfig;
  return kOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"fmflow: flow matching on manifold-supported targets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenerateOptions gen;
  std::optional<std::uint64_t> gen_seed;
  auto* generate = app.add_subcommand("generate", "Sample a synthetic manifold target to CSV");
  generate->add_option("--spec", gen.spec, "Manifold spec (TOML)")->required()->check(CLI::ExistingFile);
  generate->add_option("-n,--n", gen.n, "Number of samples");
  generate->add_option("--out", gen.out, "Output CSV")->required();
  generate->add_option("--seed", gen_seed, "Override the spec seed");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a velocity model");
  train_cmd->add_option("--config", tr.config, "Training config (TOML)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data", tr.data, "Target samples (CSV)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out_dir, "Output directory")->required();
  train_cmd->add_option("--lipschitz-xi", tr.lipschitz_xi, "Exponent xi of the post-hoc Lipschitz report");

  SampleOptions sm;
  std::string scheme = "euler";
  std::optional<double> sample_t_min;
  auto* sample_cmd = app.add_subcommand("sample", "Generate samples by integrating a trained model");
  sample_cmd->add_option("--checkpoint", sm.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("-n,--n", sm.n, "Number of samples");
  sample_cmd->add_option("--scheme", scheme, "euler or rk4")->check(CLI::IsMember({"euler", "rk4"}));
  sample_cmd->add_option("--steps", sm.steps, "N of the grid t_i = 1 - (1 - i/N)^2");
  sample_cmd->add_option("--t-min", sample_t_min, "Early-stopping level (default 1/N^2)");
  sample_cmd->add_option("--seed", sm.seed, "Source seed");
  sample_cmd->add_option("--out", sm.out, "Output CSV")->required();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Sliced W1 and distance-to-manifold metrics");
  eval_cmd->add_option("--samples", ev.samples, "Generated samples, one CSV per run")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--reference", ev.reference, "Reference CSV (one, or one per run)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--spec", ev.spec, "Spec sidecar JSON written by generate")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--n-proj", ev.n_projections, "Number of projections");
  eval_cmd->add_option("--seed", ev.seed, "Projection seed");
  eval_cmd->add_option("--out", ev.out, "MetricReport JSON");
  eval_cmd->add_option("--table", ev.table, "CSV table to append a row to");

  OracleOptions orc;
  auto* oracle_cmd = app.add_subcommand("oracle", "Slab-wise squared error against the exact velocity");
  oracle_cmd->add_option("--target", orc.target, "Atoms CSV (equal weights)")->required()->check(CLI::ExistingFile);
  oracle_cmd->add_option("--model", orc.model, "zero, exact, or a checkpoint path");
  oracle_cmd->add_option("--slabs", orc.slabs, "Comma-separated lo:hi slabs")->required();
  oracle_cmd->add_option("--n-mc", orc.n_mc, "Monte-Carlo points per slab");
  oracle_cmd->add_option("--seed", orc.seed, "Seed");
  oracle_cmd->add_option("--out", orc.out, "Probe CSV")->required();

  SvgOptions sv;
  auto* svg_cmd = app.add_subcommand("svg", "Scatter overlay of 2D point clouds");
  svg_cmd->add_option("--input", sv.inputs, "CSV point cloud (repeatable)")->required()->check(CLI::ExistingFile);
  svg_cmd->add_option("--label", sv.labels, "Legend label per input (repeatable)");
  svg_cmd->add_option("--out", sv.out, "Output SVG")->required();

  SweepOptions sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a (d, D, n, seed) experiment grid");
  sweep_cmd->add_option("--config", sw.config, "Sweep config (TOML)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*generate) {
      gen.seed = gen_seed;
      cmd_generate(gen);
    } else if (*train_cmd) {
      const json record = cmd_train(tr);
      std::cout << "final loss " << record["final_loss"] << "\n";
    } else if (*sample_cmd) {
      sm.scheme = parse_scheme(scheme);
      sm.t_min = sample_t_min;
      cmd_sample(sm);
    } else if (*eval_cmd) {
      std::cout << cmd_eval(ev).dump(2) << "\n";
    } else if (*oracle_cmd) {
      cmd_oracle(orc);
    } else if (*svg_cmd) {
      cmd_svg(sv);
    } else if (*sweep_cmd) {
      return cmd_sweep(sw);
    }
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTraining;
  } catch (const SamplingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSampling;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace fmflow::cli
