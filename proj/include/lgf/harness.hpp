#pragma once

#include <string>

#include "lgf/filter.hpp"
#include "lgf/neural.hpp"
#include "lgf/particle_filter.hpp"

namespace lgf {

struct MethodSpec {
  enum class Kind { Lgf1, Lgf2, Pf, Pva };
  Kind kind = Kind::Lgf1;
  Index particles = 0;  // Pf only

  // "LGF1", "LGF2", "PF(100)", "PVA"
  static MethodSpec parse(const std::string& text);
  std::string label() const;
  bool operator==(const MethodSpec&) const = default;
};

struct GoldStandardSpec {
  Index particles = 100000;
  Index replicates = 5;
};

// Simulation-study settings. Defaults are the desk-scale d = 6 setup.
struct ExperimentConfig {
  Index d = 6;
  Index N = 100;
  Index T = 30;
  double delta = 0.03;
  double F_scale = 0.94;
  double W_scale = 0.019;
  Index replicates = 10;
  std::uint64_t base_seed = 20090601;
  std::vector<MethodSpec> methods = {MethodSpec::parse("LGF1"), MethodSpec::parse("LGF2"),
                                     MethodSpec::parse("PF(100)")};
  GoldStandardSpec gold_standard;
  std::vector<Index> pf_grid = {100, 300, 1000, 3000, 10000};
  // Worker threads for replicates; 0 means hardware concurrency.
  unsigned threads = 0;

  void validate() const;
};

// Everything one replicate needs, derived from (config, replicate index).
struct ReplicateData {
  std::uint64_t seed = 0;
  PoissonPopulation population;
  StateSpaceModel model;
  Vector x0;
  Simulation sim;
  GaussianBelief init;
  double gamma = 0.0;
};

// Replicate r uses split_seed(base_seed, r); population, x_0, trajectory and
// particle-filter streams are further split from that seed.
ReplicateData make_replicate(const ExperimentConfig& cfg, Index r);

struct MethodRun {
  Matrix means;  // T x d
  double seconds = 0.0;
};

MethodRun run_method(const MethodSpec& method, const ReplicateData& rep);

// (1 / (T d)) sum_t ||est_t - ref_t||^2
double mise(const Matrix& estimates, const Matrix& reference);

struct MiseRow {
  std::string method;
  double mise_vs_gold = 0.0;
  double mise_vs_gold_se = 0.0;
  double mise_vs_truth = 0.0;
  double mise_vs_truth_se = 0.0;
  double seconds = 0.0;
  double seconds_se = 0.0;
};

struct MiseReport {
  std::vector<MiseRow> methods;
  // Gold-standard posterior mean against the true states (statistical error).
  MiseRow posterior;
  // Average squared between-run standard error of the gold standard.
  double gold_standard_mse = 0.0;
  // gold_standard_mse < 0.1 * smallest method MISE vs gold.
  bool reliable = true;
  Index replicates = 0;

  const MiseRow& row(const std::string& method) const;
};

MiseReport run_table1(const ExperimentConfig& cfg);

struct TimingRow {
  std::string method;
  double seconds = 0.0;
  double seconds_se = 0.0;
};

// Wall-clock seconds per full decode, averaged over replicates. Runs
// sequentially so methods do not compete for cores.
std::vector<TimingRow> run_table2(const ExperimentConfig& cfg);

struct ScalingPoint {
  Index particles = 0;
  double mise = 0.0;
  double se = 0.0;
};

struct PfScaling {
  std::vector<ScalingPoint> points;
  double lgf1_mise = 0.0;
  double lgf2_mise = 0.0;
};

PfScaling run_pf_scaling(const ExperimentConfig& cfg, const std::vector<Index>& grid);

// Least-squares slope of log(mise) on log(particles).
double log_log_slope(const std::vector<ScalingPoint>& points);

struct StabilityResult {
  std::vector<Matrix> trajectories;  // one T x d filtered-mean path per init
  Vector spread;                     // max pairwise distance per step
  Matrix truth;
};

// LGF-1 from each initial mean (covariance W) on replicate 0's data.
StabilityResult run_stability(const ExperimentConfig& cfg, const std::vector<Vector>& init_means);

// x_0 + {0, +1, -1, +/-1 alternating, -/+1 alternating}.
std::vector<Vector> stability_inits(const Vector& x0);

}  // namespace lgf
