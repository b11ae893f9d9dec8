#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "lgf/harness.hpp"

namespace lgf::io {

// Header `t,<prefix>1..<prefix>k`, then one row per step with t = 1..T.
// Values are written with 17 significant digits.
void write_series_csv(std::ostream& os, const Matrix& rows, const std::string& prefix);
void write_states_csv(std::ostream& os, const Trajectory& traj);
void write_counts_csv(std::ostream& os, const SpikeCounts& counts);

struct Table {
  std::vector<std::string> header;
  Matrix values;  // every column, including t
};

Table read_csv(std::istream& is);
// Reads a `t,...` series file and drops the t column.
Matrix read_series_csv(std::istream& is);

// Header `t,m1..md,V11,V12..Vdd`: the covariance upper triangle, row-major.
void write_moments_csv(std::ostream& os, const Matrix& means, const std::vector<Matrix>& covs);
void write_beliefs_csv(std::ostream& os, const std::vector<GaussianBelief>& beliefs);
void write_pf_csv(std::ostream& os, const ParticleFilterOutput& out);

// {"delta": ..., "alpha": [...], "beta": [[...], ...]}
nlohmann::json population_to_json(const PoissonPopulation& pop);
PoissonPopulation population_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const ExperimentConfig& cfg);

void write_mise_report_csv(std::ostream& os, const MiseReport& report);
void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows);
// `M,mise,se`
void write_scaling_csv(std::ostream& os, const PfScaling& scaling);
// `method,mise` for the LGF-1 / LGF-2 reference lines.
void write_scaling_reference_csv(std::ostream& os, const PfScaling& scaling);
// `t,init,x1..xd`, init = 0-based index of the initial mean.
void write_stability_csv(std::ostream& os, const StabilityResult& result);
// `t,spread`
void write_spread_csv(std::ostream& os, const StabilityResult& result);

}  // namespace lgf::io
