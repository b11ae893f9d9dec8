// Command-line front end: simulation, filtering, smoothing and the
// simulation-study tables. Every command writes CSV files plus a manifest
// into --out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "lgf/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

lgf::ExperimentConfig load_config(const Common& c) {
  lgf::ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw lgf::Error("cannot open config " + c.config_path);
    cfg = lgf::io::config_from_json(json::parse(in));
  }
  if (c.seed) cfg.base_seed = *c.seed;
  return cfg;
}

std::ofstream open_out(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  std::ofstream os(fs::path(c.out) / name);
  if (!os) throw lgf::Error("cannot write " + (fs::path(c.out) / name).string());
  return os;
}

template <typename Fn>
void write_file(const Common& c, const std::string& name, Fn&& fn) {
  auto os = open_out(c, name);
  fn(os);
}

void write_manifest(const Common& c, const std::string& command, const lgf::ExperimentConfig& cfg) {
  json m{{"command", command},
         {"version", kVersion},
         {"config", lgf::io::config_to_json(cfg)},
         {"config_hash", lgf::io::config_hash(cfg)},
         {"seed", cfg.base_seed},
         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION)},
         {"compiler", __VERSION__}};
  open_out(c, "manifest.json") << m.dump(2) << '\n';
}

// Data written by `simulate`, read back by the decoding commands.
struct Dataset {
  lgf::PoissonPopulation population;
  lgf::Trajectory states;
  lgf::SpikeCounts counts;
  lgf::Vector x0;
};

Dataset load_dataset(const std::string& dir) {
  auto open = [&](const char* name) {
    std::ifstream in(fs::path(dir) / name);
    if (!in) throw lgf::Error("cannot open " + (fs::path(dir) / name).string() + " (run `simulate` first)");
    return in;
  };
  Dataset ds;
  {
    auto in = open("population.json");
    ds.population = lgf::io::population_from_json(json::parse(in));
  }
  {
    auto in = open("states.csv");
    ds.states.states = lgf::io::read_series_csv(in);
    ds.states.dt = ds.population.delta;
  }
  {
    auto in = open("spikes.csv");
    ds.counts.y = lgf::io::read_series_csv(in);
  }
  {
    auto in = open("simulation.json");
    const auto x0 = json::parse(in).at("x0").get<std::vector<double>>();
    ds.x0 = Eigen::Map<const lgf::Vector>(x0.data(), static_cast<lgf::Index>(x0.size()));
  }
  return ds;
}

lgf::StateSpaceModel model_for(const lgf::ExperimentConfig& cfg, const Dataset& ds) {
  const lgf::Index d = ds.population.dim();
  const lgf::Matrix I = lgf::Matrix::Identity(d, d);
  return {lgf::LinearGaussianTransition(cfg.F_scale * I, cfg.W_scale * I),
          std::make_shared<lgf::PoissonObservation>(ds.population), ds.population.delta};
}

void cmd_simulate(const Common& c) {
  const auto cfg = load_config(c);
  const lgf::ReplicateData rep = lgf::make_replicate(cfg, 0);
  write_file(c, "states.csv", [&](std::ostream& os) { lgf::io::write_states_csv(os, rep.sim.trajectory); });
  write_file(c, "spikes.csv", [&](std::ostream& os) { lgf::io::write_counts_csv(os, lgf::SpikeCounts::from_observations(rep.sim.observations)); });
  open_out(c, "population.json") << lgf::io::population_to_json(rep.population).dump(2) << '\n';
  json sim{{"x0", std::vector<double>(rep.x0.begin(), rep.x0.end())}, {"gamma", rep.gamma}, {"seed", rep.seed}};
  open_out(c, "simulation.json") << sim.dump(2) << '\n';
  write_manifest(c, "simulate", cfg);
}

void write_filter_output(const Common& c, const lgf::FilterOutput& fo) {
  write_file(c, "filtered.csv", [&](std::ostream& os) { lgf::io::write_beliefs_csv(os, fo.filtered); });
  write_file(c, "predictive.csv", [&](std::ostream& os) { lgf::io::write_beliefs_csv(os, fo.predictive); });
  auto os = open_out(c, "diagnostics.csv");
  os << "t,newton_iterations,seconds\n";
  for (std::size_t t = 0; t < fo.diagnostics.size(); ++t) {
    os << (t + 1) << ',' << fo.diagnostics[t].newton_iterations << ',' << fo.diagnostics[t].seconds << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplace-Gaussian filtering and neural decoding benchmarks"};
  app.require_subcommand(1);
  Common common;
  std::string data_dir;
  int order = 1;
  std::string init_cov = "w";
  lgf::Index particles = 100;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Base seed (overrides the config)");
    sub->add_option("--out", common.out, "Output directory");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", data_dir, "Directory written by `simulate` (default: --out)");
  };
  auto add_filter_flags = [&](CLI::App* sub) {
    sub->add_option("--order", order, "Laplace order")->check(CLI::IsMember({1, 2}));
    sub->add_option("--init-cov", init_cov, "Initial covariance: W or diffuse")->check(CLI::IsMember({"w", "diffuse"}));
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a trajectory and spike counts");
  auto* filter = app.add_subcommand("filter", "Run the Laplace-Gaussian filter on simulated data");
  auto* smooth = app.add_subcommand("smooth", "Filter, then run the backward smoother");
  auto* pf = app.add_subcommand("pf", "Run the bootstrap particle filter");
  auto* pva = app.add_subcommand("pva", "Population vector decoding");
  auto* table1 = app.add_subcommand("table1", "MISE of each method against the gold-standard posterior");
  auto* table2 = app.add_subcommand("table2", "Decode wall-clock time per method");
  auto* scaling = app.add_subcommand("pf-scaling", "Particle-filter MISE as a function of particle count");
  auto* stability = app.add_subcommand("stability", "LGF-1 runs from five initial means");
  for (auto* s : {simulate, filter, smooth, pf, pva, table1, table2, scaling, stability}) add_common(s);
  for (auto* s : {filter, smooth, pf, pva}) add_data(s);
  add_filter_flags(filter);
  add_filter_flags(smooth);
  pf->add_option("--particles", particles, "Particle count")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  if (data_dir.empty()) data_dir = common.out;

  try {
    if (*simulate) {
      cmd_simulate(common);
    } else if (*filter || *smooth) {
      const auto cfg = load_config(common);
      const Dataset ds = load_dataset(data_dir);
      const auto model = model_for(cfg, ds);
      const auto kind = init_cov == "diffuse" ? lgf::InitCovariance::Diffuse : lgf::InitCovariance::TransitionNoise;
      const auto init = lgf::initial_belief(ds.x0, model.transition, kind);
      const double gamma = lgf::compute_gamma(ds.population, model.transition.W());
      const auto lcfg = order == 2 ? lgf::LgfConfig::second_order() : lgf::LgfConfig::first_order();
      const auto fo = lgf::lgf_filter(model, ds.counts.to_observations(), init, gamma, lcfg);
      write_filter_output(common, fo);
      if (*smooth) {
        const auto so = lgf::lgf_smooth(fo, model.transition);
        write_file(common, "smoothed.csv", [&](std::ostream& os) { lgf::io::write_beliefs_csv(os, so.smoothed); });
      }
      write_manifest(common, *smooth ? "smooth" : "filter", cfg);
    } else if (*pf) {
      const auto cfg = load_config(common);
      const Dataset ds = load_dataset(data_dir);
      const auto model = model_for(cfg, ds);
      const auto init = lgf::initial_belief(ds.x0, model.transition);
      const auto out = lgf::pf_filter(model, ds.counts.to_observations(), init, particles, cfg.base_seed);
      write_file(common, "pf.csv", [&](std::ostream& os) { lgf::io::write_pf_csv(os, out); });
      write_manifest(common, "pf", cfg);
    } else if (*pva) {
      const auto cfg = load_config(common);
      const Dataset ds = load_dataset(data_dir);
      const auto decoded =
          lgf::pva_decode(ds.counts, lgf::pva_params_from_population(ds.population), ds.population.delta);
      write_file(common, "pva.csv", [&](std::ostream& os) { lgf::io::write_states_csv(os, decoded); });
      write_manifest(common, "pva", cfg);
    } else if (*table1) {
      const auto cfg = load_config(common);
      const auto report = lgf::run_table1(cfg);
      write_file(common, "table1.csv", [&](std::ostream& os) { lgf::io::write_mise_report_csv(os, report); });
      lgf::io::write_mise_report_csv(std::cout, report);
      if (!report.reliable) std::cerr << "warning: gold-standard error is not negligible against the smallest MISE\n";
      write_manifest(common, "table1", cfg);
    } else if (*table2) {
      const auto cfg = load_config(common);
      const auto rows = lgf::run_table2(cfg);
      write_file(common, "table2.csv", [&](std::ostream& os) { lgf::io::write_timing_csv(os, rows); });
      lgf::io::write_timing_csv(std::cout, rows);
      write_manifest(common, "table2", cfg);
    } else if (*scaling) {
      const auto cfg = load_config(common);
      const auto result = lgf::run_pf_scaling(cfg, cfg.pf_grid);
      write_file(common, "pf_scaling.csv", [&](std::ostream& os) { lgf::io::write_scaling_csv(os, result); });
      write_file(common, "pf_scaling_reference.csv", [&](std::ostream& os) { lgf::io::write_scaling_reference_csv(os, result); });
      lgf::io::write_scaling_csv(std::cout, result);
      lgf::io::write_scaling_reference_csv(std::cout, result);
      write_manifest(common, "pf-scaling", cfg);
    } else if (*stability) {
      const auto cfg = load_config(common);
      const auto rep = lgf::make_replicate(cfg, 0);
      const auto result = lgf::run_stability(cfg, lgf::stability_inits(rep.x0));
      write_file(common, "stability.csv", [&](std::ostream& os) { lgf::io::write_stability_csv(os, result); });
      write_file(common, "spread.csv", [&](std::ostream& os) { lgf::io::write_spread_csv(os, result); });
      write_file(common, "truth.csv", [&](std::ostream& os) { lgf::io::write_series_csv(os, result.truth, "x"); });
      write_manifest(common, "stability", cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
