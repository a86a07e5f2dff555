// Acceptance suite: one PASS/FAIL line per criterion.
//
//   fmflow_acceptance [--only 1,2,...] [--artifacts DIR]
//
// Exit status is 0 only when every selected criterion passes.

#include "fmflow/experiment.hpp"
#include "fmflow/io.hpp"
#include "fmflow/metrics.hpp"
#include "fmflow/ode.hpp"
#include "fmflow/oracle.hpp"
#include "fmflow/svg.hpp"

#include "brute_force.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

using namespace fmflow;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMasterSeed = 20240611;
constexpr int kSeeds = 5;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return "[" + s + "]";
}

// Runs of one recipe cell over kSeeds seeds, computed once and shared.
class RunCache {
 public:
  const std::vector<RunOutcome>& get(const std::string& key, const ExperimentCell& cell) {
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    std::vector<RunOutcome> out;
    for (int s = 0; s < kSeeds; ++s) {
      out.push_back(run_cell(cell, derive_seed(kMasterSeed, key, static_cast<std::uint64_t>(s))));
      std::cerr << "  [" << key << "] seed " << s << ": W1_std " << fmt(out.back().w1_slice_std) << ", dist_M "
                << fmt(out.back().dist_mean) << ", train " << fmt(out.back().train_seconds, 3) << " s\n";
    }
    return runs_.emplace(key, std::move(out)).first->second;
  }

 private:
  std::map<std::string, std::vector<RunOutcome>> runs_;
};

RunCache cache;
fs::path artifacts = "acceptance_artifacts";

ExperimentCell sphere_cell(long n) {
  ExperimentCell c = sphere_recipe(2, 4);
  c.n_train = n;
  return c;
}

// Relative error with gradients below 1e-6 in magnitude compared absolutely.
double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

Verdict gradient_exactness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (int k = 0; k < 10; ++k) {
    Rng rng(derive_seed(kMasterSeed, "gradcheck", k));
    const int width = 8 + 56 * k / 9;
    const int depth = 1 + k % 4;
    const int in = 2 + k % 5, out = 1 + k % 4;
    auto net = MlpNet<double>::he_uniform(MlpNet<double>::mlp_dims(in, width, depth, out), rng);
    std::normal_distribution<double> normal(0.0, 0.1);
    for (auto& b : net.params().biases)
      for (auto& v : b) v = normal(rng);
    Eigen::MatrixXd input(in, 2), upstream(out, 2);
    for (auto& v : input.reshaped()) v = std::normal_distribution<double>()(rng);
    for (auto& v : upstream.reshaped()) v = std::normal_distribution<double>()(rng);

    MlpNet<double>::Tape tape;
    net.forward_batch(input, tape);
    auto grads = MlpParams<double>::zeros(net.layer_dims());
    net.backward_batch(tape, upstream, grads);
    const auto objective = [&] { return (net.forward_batch(input).array() * upstream.array()).sum(); };
    const double h = 1e-5;
    const auto probe = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      const double up = objective();
      p = saved - h;
      const double down = objective();
      p = saved;
      worst = std::max(worst, rel_error((up - down) / (2 * h), analytic));
      ++checked;
    };
    for (std::size_t l = 0; l < net.num_affine(); ++l) {
      auto& w = net.params().weights[l];
      for (Eigen::Index i = 0; i < w.size(); ++i) probe(w.data()[i], grads.weights[l].data()[i]);
      auto& b = net.params().biases[l];
      for (Eigen::Index i = 0; i < b.size(); ++i) probe(b[i], grads.biases[l][i]);
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 10.0, "max rel err " + fmt(worst) + " over " + std::to_string(checked) +
                                            " parameters, " + fmt(secs, 3) + " s"};
}

Verdict oracle_correctness() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(kMasterSeed, "oracle"));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Eigen::Vector3d y0(0.7, -1.2, 0.4);
  const AtomicTarget target = AtomicTarget::uniform(y0.transpose());
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d x;
    for (auto& v : x) v = 3.0 * normal(rng);
    const double t = 0.999 * unif(rng);
    const Eigen::Vector3d expect = (y0 - x) / (1 - t);
    worst = std::max(worst, (exact_velocity(target, x, t) - expect).cwiseAbs().maxCoeff() /
                                std::max(1.0, expect.cwiseAbs().maxCoeff()));
  }
  const double t_min = 1e-3;
  const SamplerGrid grid = quadratic_grid(500, t_min, Scheme::rk4);
  const auto field = [&](const Eigen::VectorXd& x, double t) { return exact_velocity(target, x, t); };
  double path_err = 0.0;
  for (int r = 0; r < 20; ++r) {
    Eigen::VectorXd x0(3);
    for (auto& v : x0) v = normal(rng);
    const auto path = integrate(field, x0, grid);
    for (std::size_t k = 0; k < path.size(); ++k) {
      const double s = grid.nodes[k];
      path_err = std::max(path_err, (path[k] - (s * y0 + (1 - s) * x0)).cwiseAbs().maxCoeff());
    }
  }
  const double secs = seconds_since(t0);
  const double machine = 8 * std::numeric_limits<double>::epsilon();
  return {worst <= machine && path_err <= 1e-6 && secs < 10.0,
          "velocity rel err " + fmt(worst) + " (bound " + fmt(machine) + "), RK4 path err " + fmt(path_err) +
              ", " + fmt(secs, 3) + " s"};
}

Verdict transport_consistency() {
  const auto t0 = Clock::now();
  Eigen::MatrixXd atoms(2, 2);
  atoms << 1.0, 0.5, -1.0, -0.5;
  const AtomicTarget target = AtomicTarget::uniform(atoms);
  const double t_end = 1e-3;
  const SamplerGrid grid = quadratic_grid(500, t_end, Scheme::rk4);
  const auto field = [&](const Eigen::MatrixXd& x, double t) { return exact_velocity_rows(target, x, t); };

  // Antithetic Gaussian pairs (z, -z), interleaved so every block of 1024
  // rows holds 512 pairs.
  const Eigen::MatrixXd half = sample_source(2, 2048, derive_seed(kMasterSeed, "transport-source"));
  Eigen::MatrixXd source(4096, 2);
  for (Eigen::Index i = 0; i < 2048; ++i) {
    source.row(2 * i) = half.row(i);
    source.row(2 * i + 1) = -half.row(i);
  }
  const Eigen::MatrixXd generated = integrate_rows(field, source, grid);
  // Stratified resample of the atoms: 512 copies of each per subset.
  Eigen::MatrixXd resampled(1024, 2);
  for (Eigen::Index i = 0; i < 1024; ++i) resampled.row(i) = atoms.row(i % 2);

  std::vector<double> w2;
  for (int b = 0; b < 4; ++b) w2.push_back(exact_w2(generated.middleRows(1024 * b, 1024), resampled));

  // Same check with i.i.d. draws on both sides, reported for reference.
  const Eigen::MatrixXd iid_gen =
      integrate_rows(field, sample_source(2, 1024, derive_seed(kMasterSeed, "transport-iid")), grid);
  Rng rng(derive_seed(kMasterSeed, "transport-resample"));
  Eigen::MatrixXd iid_atoms(1024, 2);
  for (Eigen::Index i = 0; i < 1024; ++i) iid_atoms.row(i) = atoms.row(target.draw(rng));
  const double iid = exact_w2(iid_gen, iid_atoms);

  const double worst = *std::max_element(w2.begin(), w2.end());
  const double secs = seconds_since(t0);
  return {worst <= 0.05 && secs < 120.0, "max W2 over 4 subsets " + fmt(worst) + " " + join(w2) +
                                             "; i.i.d. draws give " + fmt(iid) + ", " + fmt(secs, 3) + " s"};
}

double convergence_slope(Scheme scheme) {
  const Eigen::Vector2d x0(1.0, -0.5);
  const auto field = [](const Eigen::VectorXd& x, double) { return x; };
  std::vector<double> lx, ly;
  for (int N : {8, 16, 32, 64, 128}) {
    const auto path = integrate(field, Eigen::VectorXd(x0), uniform_grid(N, 1.0, scheme));
    lx.push_back(std::log(double(N)));
    ly.push_back(std::log((path.back() - std::exp(1.0) * x0).norm()));
  }
  const double mx = mean(lx), my = mean(ly);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return -num / den;
}

Verdict ode_orders() {
  const auto t0 = Clock::now();
  const double euler = convergence_slope(Scheme::euler), rk4 = convergence_slope(Scheme::rk4);
  const double secs = seconds_since(t0);
  return {std::abs(euler - 1) <= 0.3 && std::abs(rk4 - 4) <= 0.3 && secs < 5.0,
          "Euler slope " + fmt(euler) + ", RK4 slope " + fmt(rk4) + ", " + fmt(secs, 3) + " s"};
}

Verdict table_cell(const std::string& key, const ExperimentCell& cell, double w1_bound, double dist_bound,
                   double seconds_bound) {
  const auto& runs = cache.get(key, cell);
  std::vector<double> w1, dist, secs;
  for (const auto& r : runs) {
    w1.push_back(r.w1_slice_std);
    dist.push_back(r.dist_mean);
    secs.push_back(r.train_seconds + r.sample_seconds);
  }
  const double slowest = *std::max_element(secs.begin(), secs.end());
  const auto w = mean_sd(w1), d = mean_sd(dist);
  return {w.mean <= w1_bound && d.mean <= dist_bound && slowest < seconds_bound,
          "W1_std " + fmt(w.mean) + " +- " + fmt(*w.sd) + " (<= " + fmt(w1_bound) + "), dist_M " + fmt(d.mean) +
              " +- " + fmt(*d.sd) + " (<= " + fmt(dist_bound) + "), slowest seed " + fmt(slowest, 3) + " s"};
}

Verdict sphere_table() { return table_cell("sphere-n2048", sphere_cell(2048), 0.08, 0.11, 15 * 60.0); }

Verdict torus_table() { return table_cell("torus", torus_recipe(2, 6), 0.06, 0.13, 20 * 60.0); }

Verdict floral_figure() {
  const auto t0 = Clock::now();
  const ExperimentCell cell = floral_recipe();
  const RunOutcome run = run_cell(cell, derive_seed(kMasterSeed, "floral"));
  const auto petals = nearest_petal(run.generated, cell.floral);
  std::vector<double> share(static_cast<std::size_t>(cell.floral.petals), 0.0);
  for (int p : petals) share[static_cast<std::size_t>(p)] += 1.0 / static_cast<double>(petals.size());
  const double smallest = *std::min_element(share.begin(), share.end());

  fs::create_directories(artifacts);
  const fs::path svg = artifacts / "floral.svg";
  io::atomic_write(svg, scatter_svg({{"train", run.train_data}, {"generated", run.generated}}));
  io::write_matrix_csv(artifacts / "floral_generated.csv", run.generated);
  const bool emitted = fs::exists(svg) && fs::file_size(svg) > 0;
  const double secs = seconds_since(t0);
  return {run.dist_mean <= 0.15 && smallest >= 0.05 && emitted && secs < 600.0,
          "dist_M " + fmt(run.dist_mean) + " (<= 0.15), petal shares " + join(share) + ", svg " +
              (emitted ? svg.string() : std::string("missing")) + ", " + fmt(secs, 3) + " s"};
}

Verdict rate_degradation() {
  const auto& runs = cache.get("sphere-n2048", sphere_cell(2048));
  const std::vector<double> knots{0.5, 0.1, 0.02, 0.004};
  std::vector<std::vector<double>> per_slab(knots.size());
  for (std::size_t s = 0; s < runs.size(); ++s) {
    // Large fresh sample of the target as the atomic proxy for its velocity.
    ManifoldSpec proxy_spec = runs[s].spec;
    proxy_spec.seed = derive_seed(runs[s].seeds.run, "velocity-proxy");
    const AtomicTarget proxy = AtomicTarget::uniform(sample_manifold(proxy_spec, 8192));
    for (std::size_t k = 0; k < knots.size(); ++k) {
      const Slab slab{1.0 - knots[k], 1.0 - knots[k] / 2};
      per_slab[k].push_back(
          velocity_mse(runs[s].trained.model, proxy, slab, 2000, derive_seed(runs[s].seeds.run, "probe", k)).mse);
    }
  }
  std::vector<double> medians;
  for (const auto& v : per_slab) medians.push_back(median(v));
  bool monotone = true;
  for (std::size_t k = 0; k + 1 < medians.size(); ++k) monotone = monotone && medians[k + 1] >= medians[k];
  return {monotone, "median velocity MSE for t_k = 0.5, 0.1, 0.02, 0.004: " + join(medians)};
}

Verdict sample_consistency() {
  const std::vector<long> sizes{128, 512, 2048};
  std::vector<double> medians;
  std::string per_n;
  for (long n : sizes) {
    const auto& runs = cache.get("sphere-n" + std::to_string(n), sphere_cell(n));
    std::vector<double> w2;
    for (const auto& r : runs) {
      ManifoldSpec fresh = r.spec;
      fresh.seed = derive_seed(r.seeds.run, "fresh-target");
      w2.push_back(exact_w2(r.generated.topRows(1024), sample_manifold(fresh, 1024)));
    }
    medians.push_back(median(w2));
    per_n += " n=" + std::to_string(n) + ": " + join(w2);
  }
  const bool decreasing = medians[0] > medians[1] && medians[1] > medians[2];
  return {decreasing, "median W2 for n = 128, 512, 2048: " + join(medians) + ";" + per_n};
}

Verdict invariants() {
  const auto t0 = Clock::now();
  std::vector<std::string> failures;
  Rng rng(derive_seed(kMasterSeed, "invariants"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Time grids.
  for (int i = 0; i < 200; ++i) {
    const double ratio = 1.0 + unif(rng);
    const double t_min = std::pow(10.0, -6.0 * unif(rng)) * 0.9;
    const auto g = TimeGrid::geometric(t_min, ratio);
    const auto& k = g.knots();
    bool ok = k.front() == 1.0 && k.back() == t_min;
    for (std::size_t j = 0; j + 1 < k.size(); ++j) ok = ok && k[j] > k[j + 1] && k[j] / k[j + 1] <= 2.0 * (1 + 1e-12);
    if (!ok) {
      failures.push_back("time grid");
      break;
    }
  }
  for (long n : {100L, 10000L, 100000000L}) {
    const auto g = build_time_grid(n, 1.0, 3, 20.0, 2.0).grid;
    for (std::size_t j = 0; j + 1 < g.knots().size(); ++j)
      if (!(g.knots()[j] / g.knots()[j + 1] <= 2.0 * (1 + 1e-12))) failures.push_back("theorem grid");
  }

  // Softmax weights.
  const AtomicTarget many = AtomicTarget::uniform(sample_source(4, 300, derive_seed(kMasterSeed, "atoms")) * 5.0);
  double weight_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = sample_source(4, 1, derive_seed(kMasterSeed, "x", i)).row(0).transpose() * 10.0;
    const double t = 1.0 - std::pow(10.0, -8.0 * unif(rng));
    const Eigen::VectorXd w = posterior_weights(many, x, t);
    weight_err = std::max(weight_err, std::abs(w.sum() - 1.0));
    if (w.minCoeff() < 0.0 || !w.allFinite()) failures.push_back("softmax sign");
  }
  if (weight_err > 1e-12) failures.push_back("softmax normalization " + fmt(weight_err));

  // Clip bound on a model with huge output bias.
  {
    const auto emb = TimeEmbedding<double>::geometric(8);
    MlpNet<double> net({3 + emb.dim(), 4, 3});
    net.params().biases.back() << 1e9, -1e9, 0.5;
    const VelocityModel model(ModelMode::single, {net}, emb, 1e-4, 10.0, 2048);
    for (int i = 0; i < 100; ++i) {
      const double t = (1 - 1e-4) * unif(rng);
      const double bound = 10.0 * std::sqrt(std::log(2048.0)) / (1 - t);
      if (model(Eigen::Vector3d::Random(), t).cwiseAbs().maxCoeff() > bound) {
        failures.push_back("clip");
        break;
      }
    }
  }

  // W2 axioms on random triples.
  for (int i = 0; i < 20; ++i) {
    const auto cloud = [&](int k) {
      return sample_source(2, 16, derive_seed(kMasterSeed, "triple", 3 * i + k)) * (1.0 + k);
    };
    const Eigen::MatrixXd a = cloud(0), b = cloud(1), c = cloud(2);
    const double ab = exact_w2(a, b), ba = exact_w2(b, a), bc = exact_w2(b, c), ac = exact_w2(a, c);
    if (exact_w2(a, a) != 0.0 || std::abs(ab - ba) > 1e-12 || ac > ab + bc + 1e-12 || ab <= 0.0) {
      failures.push_back("W2 axioms");
      break;
    }
  }

  // Closed-form distances against brute-force minimization, 100 points each.
  double worst = 0.0;
  const auto cloud = [&](int dim, const std::string& key, double scale) {
    return sample_source(dim, 100, derive_seed(kMasterSeed, key)) * scale;
  };
  {
    const Eigen::MatrixXd pts = cloud(4, "dist-sphere", 0.8);
    const Eigen::VectorXd d = dist_manifold(pts, {SphereSpec{2, 4, {}}, 0});
    for (Eigen::Index i = 0; i < 100; ++i)
      worst = std::max(worst, std::abs(d[i] - brute::sphere2_distance(pts.row(i).transpose())));
  }
  {
    const TorusSpec torus = make_torus(2, 6, derive_seed(kMasterSeed, "rotation"));
    const Eigen::MatrixXd pts = cloud(6, "dist-torus", 0.8);
    const Eigen::VectorXd d = dist_manifold(pts, {torus, 0});
    for (Eigen::Index i = 0; i < 100; ++i)
      worst = std::max(worst, std::abs(d[i] - brute::torus_distance(pts.row(i).transpose(), torus)));
  }
  {
    const FloralSpec floral;
    const Eigen::MatrixXd pts = cloud(2, "dist-floral", 2.5);
    const Eigen::VectorXd d = dist_manifold(pts, {floral, 0});
    for (Eigen::Index i = 0; i < 100; ++i)
      worst = std::max(worst, std::abs(d[i] - brute::floral_distance(pts.row(i).transpose(), floral)));
  }
  if (worst > 1e-4) failures.push_back("dist_M " + fmt(worst));

  const double secs = seconds_since(t0);
  if (secs >= 60.0) failures.push_back("runtime");
  std::string detail = failures.empty() ? "all invariants hold" : "violated:";
  for (const auto& f : failures) detail += " " + f;
  return {failures.empty(), detail + "; max dist_M deviation " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> check;
};

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"fmflow acceptance suite"};
  std::vector<int> only;
  std::string artifact_dir = artifacts.string();
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--artifacts", artifact_dir, "Directory for emitted figures");
  CLI11_PARSE(app, argc, argv);
  artifacts = artifact_dir;

  const std::vector<Criterion> criteria{
      {1, "gradient exactness", gradient_exactness},
      {2, "oracle correctness", oracle_correctness},
      {3, "transport consistency", transport_consistency},
      {4, "ODE orders", ode_orders},
      {5, "sphere table (d=2, D=4)", sphere_table},
      {6, "torus table (d=2, D=6)", torus_table},
      {7, "floral figure", floral_figure},
      {8, "rate degradation toward t=1", rate_degradation},
      {9, "consistency in n", sample_consistency},
      {10, "invariant suites", invariants},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << "criterion " << c.id << " " << (v.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << v.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
