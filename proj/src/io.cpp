#include "lgf/io.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace lgf::io {

using nlohmann::json;

namespace {

struct FullPrecision {
  explicit FullPrecision(std::ostream& os) : os_(os), flags_(os.flags()), prec_(os.precision()) {
    os_ << std::setprecision(17);
    os_.unsetf(std::ios::floatfield);
  }
  ~FullPrecision() {
    os_.flags(flags_);
    os_.precision(prec_);
  }
  std::ostream& os_;
  std::ios::fmtflags flags_;
  std::streamsize prec_;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_series_csv(std::ostream& os, const Matrix& rows, const std::string& prefix) {
  FullPrecision guard(os);
  os << "t";
  for (Index k = 0; k < rows.cols(); ++k) os << ',' << prefix << (k + 1);
  os << '\n';
  for (Index t = 0; t < rows.rows(); ++t) {
    os << (t + 1);
    for (Index k = 0; k < rows.cols(); ++k) os << ',' << rows(t, k);
    os << '\n';
  }
}

void write_states_csv(std::ostream& os, const Trajectory& traj) { write_series_csv(os, traj.states, "x"); }

void write_counts_csv(std::ostream& os, const SpikeCounts& counts) { write_series_csv(os, counts.y, "y"); }

Table read_csv(std::istream& is) {
  Table table;
  std::string line;
  if (!std::getline(is, line)) throw Error("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw Error("csv: row " + std::to_string(rows.size() + 1) + " has " + std::to_string(cells.size()) +
                  " fields, header has " + std::to_string(table.header.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size()) throw Error("csv: cannot parse '" + c + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return table;
}

Matrix read_series_csv(std::istream& is) {
  Table table = read_csv(is);
  if (table.header.empty() || table.header.front() != "t") throw Error("csv: first column must be t");
  return table.values.rightCols(table.values.cols() - 1);
}

void write_moments_csv(std::ostream& os, const Matrix& means, const std::vector<Matrix>& covs) {
  if (static_cast<std::size_t>(means.rows()) != covs.size()) throw DimensionError("moments: means/covs length differ");
  FullPrecision guard(os);
  const Index d = means.cols();
  os << "t";
  for (Index i = 0; i < d; ++i) os << ",m" << (i + 1);
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) os << ",V" << (i + 1) << (j + 1);
  os << '\n';
  for (Index t = 0; t < means.rows(); ++t) {
    os << (t + 1);
    for (Index i = 0; i < d; ++i) os << ',' << means(t, i);
    const Matrix& V = covs[static_cast<std::size_t>(t)];
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j) os << ',' << V(i, j);
    os << '\n';
  }
}

void write_beliefs_csv(std::ostream& os, const std::vector<GaussianBelief>& beliefs) {
  if (beliefs.empty()) throw DimensionError("beliefs: empty sequence");
  Matrix means(static_cast<Index>(beliefs.size()), beliefs.front().dim());
  std::vector<Matrix> covs;
  for (std::size_t t = 0; t < beliefs.size(); ++t) {
    means.row(static_cast<Index>(t)) = beliefs[t].mean().transpose();
    covs.push_back(beliefs[t].cov());
  }
  write_moments_csv(os, means, covs);
}

void write_pf_csv(std::ostream& os, const ParticleFilterOutput& out) { write_moments_csv(os, out.means, out.covariances); }

json population_to_json(const PoissonPopulation& pop) {
  json beta = json::array();
  for (Index i = 0; i < pop.beta.rows(); ++i) {
    std::vector<double> row(pop.beta.row(i).begin(), pop.beta.row(i).end());
    beta.push_back(row);
  }
  return json{{"delta", pop.delta},
              {"alpha", std::vector<double>(pop.alpha.begin(), pop.alpha.end())},
              {"beta", beta}};
}

PoissonPopulation population_from_json(const json& j) {
  PoissonPopulation pop;
  pop.delta = j.at("delta").get<double>();
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  const auto beta = j.at("beta").get<std::vector<std::vector<double>>>();
  if (alpha.size() != beta.size()) throw DimensionError("population: alpha and beta lengths differ");
  pop.alpha = Eigen::Map<const Vector>(alpha.data(), static_cast<Index>(alpha.size()));
  const Index d = beta.empty() ? 0 : static_cast<Index>(beta.front().size());
  pop.beta.resize(static_cast<Index>(beta.size()), d);
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (static_cast<Index>(beta[i].size()) != d) throw DimensionError("population: ragged beta");
    for (Index k = 0; k < d; ++k) pop.beta(static_cast<Index>(i), k) = beta[i][static_cast<std::size_t>(k)];
  }
  pop.validate();
  return pop;
}

json config_to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (const auto& m : cfg.methods) methods.push_back(m.label());
  return json{{"d", cfg.d},
              {"N", cfg.N},
              {"T", cfg.T},
              {"delta", cfg.delta},
              {"F_scale", cfg.F_scale},
              {"W_scale", cfg.W_scale},
              {"replicates", cfg.replicates},
              {"base_seed", cfg.base_seed},
              {"methods", methods},
              {"gold_standard", {{"M", cfg.gold_standard.particles}, {"R", cfg.gold_standard.replicates}}},
              {"pf_grid", cfg.pf_grid},
              {"threads", cfg.threads}};
}

ExperimentConfig config_from_json(const json& j) {
  static const std::set<std::string> known = {"d",          "N",         "T",       "delta",   "F_scale",
                                              "W_scale",    "replicates", "base_seed", "methods", "gold_standard",
                                              "pf_grid",    "threads"};
  if (!j.is_object()) throw Error("config: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error("config: unknown key '" + key + "'");
  }
  ExperimentConfig cfg;
  if (j.contains("d")) cfg.d = j["d"].get<Index>();
  if (j.contains("N")) cfg.N = j["N"].get<Index>();
  if (j.contains("T")) cfg.T = j["T"].get<Index>();
  if (j.contains("delta")) cfg.delta = j["delta"].get<double>();
  if (j.contains("F_scale")) cfg.F_scale = j["F_scale"].get<double>();
  if (j.contains("W_scale")) cfg.W_scale = j["W_scale"].get<double>();
  if (j.contains("replicates")) cfg.replicates = j["replicates"].get<Index>();
  if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"]) cfg.methods.push_back(MethodSpec::parse(m.get<std::string>()));
  }
  if (j.contains("gold_standard")) {
    const auto& g = j["gold_standard"];
    if (g.contains("M")) cfg.gold_standard.particles = g["M"].get<Index>();
    if (g.contains("R")) cfg.gold_standard.replicates = g["R"].get<Index>();
  }
  if (j.contains("pf_grid")) cfg.pf_grid = j["pf_grid"].get<std::vector<Index>>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<unsigned>();
  cfg.validate();
  return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_mise_report_csv(std::ostream& os, const MiseReport& report) {
  FullPrecision guard(os);
  os << "method,mise_vs_gold,mise_vs_gold_se,mise_vs_truth,mise_vs_truth_se,seconds,seconds_se\n";
  auto emit = [&](const MiseRow& r) {
    os << r.method << ',' << r.mise_vs_gold << ',' << r.mise_vs_gold_se << ',' << r.mise_vs_truth << ','
       << r.mise_vs_truth_se << ',' << r.seconds << ',' << r.seconds_se << '\n';
  };
  for (const auto& r : report.methods) emit(r);
  emit(report.posterior);
}

void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows) {
  FullPrecision guard(os);
  os << "method,seconds,seconds_se\n";
  for (const auto& r : rows) os << r.method << ',' << r.seconds << ',' << r.seconds_se << '\n';
}

void write_scaling_csv(std::ostream& os, const PfScaling& scaling) {
  FullPrecision guard(os);
  os << "M,mise,se\n";
  for (const auto& p : scaling.points) os << p.particles << ',' << p.mise << ',' << p.se << '\n';
}

void write_scaling_reference_csv(std::ostream& os, const PfScaling& scaling) {
  FullPrecision guard(os);
  os << "method,mise\n" << "LGF1," << scaling.lgf1_mise << '\n' << "LGF2," << scaling.lgf2_mise << '\n';
}

void write_stability_csv(std::ostream& os, const StabilityResult& result) {
  FullPrecision guard(os);
  const Index d = result.truth.cols();
  os << "t,init";
  for (Index i = 0; i < d; ++i) os << ",x" << (i + 1);
  os << '\n';
  for (std::size_t k = 0; k < result.trajectories.size(); ++k) {
    const Matrix& m = result.trajectories[k];
    for (Index t = 0; t < m.rows(); ++t) {
      os << (t + 1) << ',' << k;
      for (Index i = 0; i < d; ++i) os << ',' << m(t, i);
      os << '\n';
    }
  }
}

void write_spread_csv(std::ostream& os, const StabilityResult& result) {
  FullPrecision guard(os);
  os << "t,spread\n";
  for (Index t = 0; t < result.spread.size(); ++t) os << (t + 1) << ',' << result.spread[t] << '\n';
}

}  // namespace lgf::io
