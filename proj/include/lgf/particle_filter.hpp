#pragma once

#include <span>

#include "lgf/model.hpp"

namespace lgf {

// Columns of `particles` (d x M) are the particles; weights sum to one.
struct ParticleEnsemble {
  Matrix particles;
  Vector weights;

  Index size() const { return particles.cols(); }
  Vector mean() const;
  Matrix covariance() const;
};

// exp(log_w - logsumexp(log_w)); NaN entries get zero weight. Throws when
// every entry is -inf or NaN.
Vector normalize_log_weights(const Vector& log_weights);

// Systematic resampling with a single uniform u in [0, 1): returns, for each
// of the M slots, the index of the particle copied into it.
std::vector<Index> systematic_resample(const Vector& weights, double u);

// Per-step weighted moments, recorded before resampling.
struct ParticleFilterOutput {
  Matrix means;                      // T x d
  std::vector<Matrix> covariances;   // T entries, d x d
  std::vector<double> ess;           // effective sample size per step
  std::vector<double> step_seconds;
  double total_seconds = 0.0;

  std::size_t steps() const { return covariances.size(); }
};

// Bootstrap filter: initial particles drawn from `init` (the x_0 belief),
// propagated through the transition, weighted by the observation density in
// log space and systematically resampled every step.
ParticleFilterOutput pf_filter(const StateSpaceModel& model, const ObservationSeq& observations,
                               const GaussianBelief& init, Index M, std::uint64_t seed);

struct GoldStandard {
  Matrix mean;  // T x d, average of the replicate means
  Matrix se;    // T x d, between-replicate standard error (zero when R = 1)

  // Mean squared standard error over all entries: the reference's own MISE scale.
  double mean_squared_se() const;
};

// Averages R independent pf_filter runs, run r seeded with seeds[r].
GoldStandard gold_standard(const StateSpaceModel& model, const ObservationSeq& observations,
                           const GaussianBelief& init, Index M, std::span<const std::uint64_t> seeds);

}  // namespace lgf
