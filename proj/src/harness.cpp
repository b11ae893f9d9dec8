#include "lgf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <regex>
#include <thread>

namespace lgf {

namespace {

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

Stats summarize(const std::vector<double>& v) {
  Stats s;
  const auto n = static_cast<double>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return s;
}

// Runs body(r) for r in [0, n) on a small worker pool. Each index owns its
// output slot, so results do not depend on scheduling.
template <typename Body>
void parallel_for(Index n, unsigned threads, Body body) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<Index>(workers, n));
  if (workers <= 1) {
    for (Index r = 0; r < n; ++r) body(r);
    return;
  }
  std::mutex mu;
  Index next = 0;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        Index r;
        {
          std::lock_guard lock(mu);
          if (next >= n || failure) return;
          r = next++;
        }
        try {
          body(r);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

constexpr std::uint64_t kPopulationStream = 0;
constexpr std::uint64_t kInitialStateStream = 1;
constexpr std::uint64_t kSimulationStream = 2;
constexpr std::uint64_t kGoldStream = 100;
constexpr std::uint64_t kPfStream = 1000;

std::vector<std::uint64_t> gold_seeds(const ReplicateData& rep, Index R) {
  std::vector<std::uint64_t> seeds;
  for (Index k = 0; k < R; ++k) seeds.push_back(split_seed(rep.seed, kGoldStream + static_cast<std::uint64_t>(k)));
  return seeds;
}

GoldStandard replicate_gold(const ExperimentConfig& cfg, const ReplicateData& rep) {
  const auto seeds = gold_seeds(rep, cfg.gold_standard.replicates);
  return gold_standard(rep.model, rep.sim.observations, rep.init, cfg.gold_standard.particles, seeds);
}

}  // namespace

MethodSpec MethodSpec::parse(const std::string& text) {
  static const std::regex pf(R"(PF\((\d+)\))");
  std::smatch m;
  if (text == "LGF1") return {Kind::Lgf1, 0};
  if (text == "LGF2") return {Kind::Lgf2, 0};
  if (text == "PVA") return {Kind::Pva, 0};
  if (std::regex_match(text, m, pf)) {
    const Index M = std::stoll(m[1].str());
    if (M < 1) throw Error("method PF needs at least one particle");
    return {Kind::Pf, M};
  }
  throw Error("unknown method '" + text + "'");
}

std::string MethodSpec::label() const {
  switch (kind) {
    case Kind::Lgf1: return "LGF1";
    case Kind::Lgf2: return "LGF2";
    case Kind::Pva: return "PVA";
    case Kind::Pf: return "PF(" + std::to_string(particles) + ")";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (d < 1 || N < 1 || T < 1) throw Error("config: d, N and T must be positive");
  if (!(delta > 0.0)) throw Error("config: delta must be positive");
  if (!(W_scale > 0.0)) throw Error("config: W_scale must be positive");
  if (!std::isfinite(F_scale)) throw Error("config: F_scale must be finite");
  if (replicates < 1) throw Error("config: replicates must be at least 1");
  if (gold_standard.particles < 1 || gold_standard.replicates < 1) throw Error("config: malformed gold_standard");
  for (const auto& m : methods) {
    if (m.kind == MethodSpec::Kind::Pf && m.particles < 1) throw Error("config: PF method needs particles");
  }
}

ReplicateData make_replicate(const ExperimentConfig& cfg, Index r) {
  cfg.validate();
  const std::uint64_t seed = split_seed(cfg.base_seed, static_cast<std::uint64_t>(r));
  PoissonPopulation pop = sample_population(cfg.N, cfg.d, split_seed(seed, kPopulationStream), cfg.delta);
  const Matrix I = Matrix::Identity(cfg.d, cfg.d);
  LinearGaussianTransition trans(cfg.F_scale * I, cfg.W_scale * I);
  const double gamma = compute_gamma(pop, trans.W());

  // x_0 from the stationary law of the AR process when it has one.
  Vector x0 = Vector::Zero(cfg.d);
  if (std::abs(cfg.F_scale) < 1.0) {
    Rng rng(split_seed(seed, kInitialStateStream));
    std::normal_distribution<double> z(0.0, 1.0);
    const double sd = std::sqrt(cfg.W_scale / (1.0 - cfg.F_scale * cfg.F_scale));
    for (Index i = 0; i < cfg.d; ++i) x0[i] = sd * z(rng);
  }

  StateSpaceModel model{trans, std::make_shared<PoissonObservation>(pop), cfg.delta};
  Simulation sim = simulate(model, cfg.T, x0, split_seed(seed, kSimulationStream));
  GaussianBelief init = initial_belief(x0, trans);
  return ReplicateData{seed, std::move(pop), std::move(model), std::move(x0), std::move(sim), std::move(init), gamma};
}

MethodRun run_method(const MethodSpec& method, const ReplicateData& rep) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  MethodRun out;
  switch (method.kind) {
    case MethodSpec::Kind::Lgf1:
      out.means = lgf_filter(rep.model, rep.sim.observations, rep.init, rep.gamma, LgfConfig::first_order())
                      .filtered_means();
      break;
    case MethodSpec::Kind::Lgf2:
      out.means = lgf_filter(rep.model, rep.sim.observations, rep.init, rep.gamma, LgfConfig::second_order())
                      .filtered_means();
      break;
    case MethodSpec::Kind::Pf:
      out.means = pf_filter(rep.model, rep.sim.observations, rep.init, method.particles,
                            split_seed(rep.seed, kPfStream + static_cast<std::uint64_t>(method.particles)))
                      .means;
      break;
    case MethodSpec::Kind::Pva: {
      const SpikeCounts counts = SpikeCounts::from_observations(rep.sim.observations);
      out.means = pva_decode(counts, pva_params_from_population(rep.population), rep.model.dt).states;
      break;
    }
  }
  out.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return out;
}

double mise(const Matrix& estimates, const Matrix& reference) {
  if (estimates.rows() != reference.rows() || estimates.cols() != reference.cols()) {
    throw DimensionError("mise: shape mismatch");
  }
  if (estimates.size() == 0) throw DimensionError("mise: empty input");
  return (estimates - reference).squaredNorm() / static_cast<double>(estimates.size());
}

const MiseRow& MiseReport::row(const std::string& method) const {
  for (const auto& r : methods) {
    if (r.method == method) return r;
  }
  throw Error("no report row for method " + method);
}

MiseReport run_table1(const ExperimentConfig& cfg) {
  cfg.validate();
  const Index R = cfg.replicates;
  const std::size_t K = cfg.methods.size();

  struct Sample {
    std::vector<double> vs_gold, vs_truth, seconds;
    double posterior = 0.0;
    double gold_mse = 0.0;
  };
  std::vector<Sample> samples(static_cast<std::size_t>(R));

  parallel_for(R, cfg.threads, [&](Index r) {
    const ReplicateData rep = make_replicate(cfg, r);
    const GoldStandard gold = replicate_gold(cfg, rep);
    const Matrix& truth = rep.sim.trajectory.states;
    Sample& s = samples[static_cast<std::size_t>(r)];
    for (const auto& m : cfg.methods) {
      MethodRun run;
      try {
        run = run_method(m, rep);
      } catch (const std::exception& e) {
        throw Error("replicate " + std::to_string(r) + ", method " + m.label() + ": " + e.what());
      }
      s.vs_gold.push_back(mise(run.means, gold.mean));
      s.vs_truth.push_back(mise(run.means, truth));
      s.seconds.push_back(run.seconds);
    }
    s.posterior = mise(gold.mean, truth);
    s.gold_mse = gold.mean_squared_se();
  });

  MiseReport report;
  report.replicates = R;
  std::vector<double> posterior, gold_mse;
  for (const auto& s : samples) {
    posterior.push_back(s.posterior);
    gold_mse.push_back(s.gold_mse);
  }
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> g, t, sec;
    for (const auto& s : samples) {
      g.push_back(s.vs_gold[k]);
      t.push_back(s.vs_truth[k]);
      sec.push_back(s.seconds[k]);
    }
    const Stats sg = summarize(g), st = summarize(t), ss = summarize(sec);
    report.methods.push_back({cfg.methods[k].label(), sg.mean, sg.se, st.mean, st.se, ss.mean, ss.se});
  }
  const Stats sp = summarize(posterior);
  report.posterior = {"posterior", 0.0, 0.0, sp.mean, sp.se, 0.0, 0.0};
  report.gold_standard_mse = summarize(gold_mse).mean;
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& row : report.methods) smallest = std::min(smallest, row.mise_vs_gold);
  report.reliable = report.methods.empty() || report.gold_standard_mse < 0.1 * smallest;
  return report;
}

std::vector<TimingRow> run_table2(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<double>> seconds(cfg.methods.size());
  for (Index r = 0; r < cfg.replicates; ++r) {
    const ReplicateData rep = make_replicate(cfg, r);
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) seconds[k].push_back(run_method(cfg.methods[k], rep).seconds);
  }
  std::vector<TimingRow> rows;
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    const Stats s = summarize(seconds[k]);
    rows.push_back({cfg.methods[k].label(), s.mean, s.se});
  }
  return rows;
}

PfScaling run_pf_scaling(const ExperimentConfig& cfg, const std::vector<Index>& grid) {
  cfg.validate();
  if (grid.empty()) throw Error("pf-scaling: empty particle grid");
  const Index R = cfg.replicates;
  const std::size_t G = grid.size();
  std::vector<std::vector<double>> pf(static_cast<std::size_t>(R));
  std::vector<double> lgf1(static_cast<std::size_t>(R)), lgf2(static_cast<std::size_t>(R));

  parallel_for(R, cfg.threads, [&](Index r) {
    const ReplicateData rep = make_replicate(cfg, r);
    const GoldStandard gold = replicate_gold(cfg, rep);
    auto& row = pf[static_cast<std::size_t>(r)];
    for (Index M : grid) row.push_back(mise(run_method({MethodSpec::Kind::Pf, M}, rep).means, gold.mean));
    lgf1[static_cast<std::size_t>(r)] = mise(run_method({MethodSpec::Kind::Lgf1, 0}, rep).means, gold.mean);
    lgf2[static_cast<std::size_t>(r)] = mise(run_method({MethodSpec::Kind::Lgf2, 0}, rep).means, gold.mean);
  });

  PfScaling out;
  for (std::size_t g = 0; g < G; ++g) {
    std::vector<double> v;
    for (const auto& row : pf) v.push_back(row[g]);
    const Stats s = summarize(v);
    out.points.push_back({grid[g], s.mean, s.se});
  }
  out.lgf1_mise = summarize(lgf1).mean;
  out.lgf2_mise = summarize(lgf2).mean;
  return out;
}

double log_log_slope(const std::vector<ScalingPoint>& points) {
  if (points.size() < 2) throw Error("log_log_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(points.size());
  for (const auto& p : points) {
    const double x = std::log(static_cast<double>(p.particles));
    const double y = std::log(p.mise);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

StabilityResult run_stability(const ExperimentConfig& cfg, const std::vector<Vector>& init_means) {
  cfg.validate();
  if (init_means.empty()) throw Error("stability: need at least one initial mean");
  const ReplicateData rep = make_replicate(cfg, 0);
  StabilityResult out;
  out.truth = rep.sim.trajectory.states;
  for (const Vector& m : init_means) {
    const GaussianBelief init = initial_belief(m, rep.model.transition);
    out.trajectories.push_back(
        lgf_filter(rep.model, rep.sim.observations, init, rep.gamma, LgfConfig::first_order()).filtered_means());
  }
  out.spread = Vector::Zero(cfg.T);
  for (std::size_t a = 0; a < out.trajectories.size(); ++a) {
    for (std::size_t b = a + 1; b < out.trajectories.size(); ++b) {
      const Vector dist = (out.trajectories[a] - out.trajectories[b]).rowwise().norm();
      out.spread = out.spread.cwiseMax(dist);
    }
  }
  return out;
}

std::vector<Vector> stability_inits(const Vector& x0) {
  const Index d = x0.size();
  Vector alt(d);
  for (Index i = 0; i < d; ++i) alt[i] = (i % 2 == 0) ? 1.0 : -1.0;
  const Vector ones = Vector::Ones(d);
  return {x0, x0 + ones, x0 - ones, x0 + alt, x0 - alt};
}

}  // namespace lgf
