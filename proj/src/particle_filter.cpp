#include "lgf/particle_filter.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace lgf {

Vector ParticleEnsemble::mean() const { return particles * weights; }

Matrix ParticleEnsemble::covariance() const {
  const Matrix centred = particles.colwise() - mean();
  return symmetrize(centred * weights.asDiagonal() * centred.transpose());
}

Vector normalize_log_weights(const Vector& log_weights) {
  if (log_weights.size() == 0) throw DimensionError("normalize_log_weights: empty weight vector");
  // NaN entries get zero weight.
  const Vector lw = log_weights.array().isNaN().select(-std::numeric_limits<double>::infinity(), log_weights);
  const double top = lw.maxCoeff();
  if (!std::isfinite(top)) throw Error("weight collapse: no particle has finite likelihood");
  Vector w = (lw.array() - top).exp();
  return w / w.sum();
}

std::vector<Index> systematic_resample(const Vector& weights, double u) {
  const Index M = weights.size();
  if (M == 0) throw DimensionError("systematic_resample: empty weight vector");
  if (!(u >= 0.0 && u < 1.0)) throw Error("systematic_resample: u must lie in [0, 1)");
  std::vector<Index> idx(static_cast<std::size_t>(M));
  const double step = 1.0 / static_cast<double>(M);
  double cumulative = weights[0];
  Index j = 0;
  for (Index m = 0; m < M; ++m) {
    const double point = (static_cast<double>(m) + u) * step;
    while (point >= cumulative && j < M - 1) cumulative += weights[++j];
    idx[static_cast<std::size_t>(m)] = j;
  }
  return idx;
}

ParticleFilterOutput pf_filter(const StateSpaceModel& model, const ObservationSeq& observations,
                               const GaussianBelief& init, Index M, std::uint64_t seed) {
  if (M < 1) throw Error("pf_filter: need at least one particle");
  if (observations.empty()) throw DimensionError("pf_filter: need at least one observation");
  if (init.dim() != model.state_dim()) throw DimensionError("pf_filter: init dimension differs from model");
  using clock = std::chrono::steady_clock;

  const Index d = model.state_dim();
  const auto T = static_cast<Index>(observations.size());
  const Matrix& F = model.transition.F();
  const Matrix& S = model.transition.noise_factor();

  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto fill_normal = [&](Matrix& m) {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = z(rng);
  };

  Matrix noise(d, M);
  fill_normal(noise);
  Matrix particles = (init.chol() * noise).colwise() + init.mean();
  Matrix next(d, M);

  ParticleFilterOutput out;
  out.means.resize(T, d);
  out.covariances.reserve(static_cast<std::size_t>(T));
  out.ess.reserve(static_cast<std::size_t>(T));
  out.step_seconds.reserve(static_cast<std::size_t>(T));
  const auto t_start = clock::now();

  for (Index t = 0; t < T; ++t) {
    const auto step_start = clock::now();
    fill_normal(noise);
    next.noalias() = F * particles;
    next.noalias() += S * noise;
    particles.swap(next);

    ParticleEnsemble ens;
    try {
      ens.weights = normalize_log_weights(model.observation->log_density_batch(observations[t], particles));
    } catch (const Error& e) {
      throw StepError(static_cast<std::size_t>(t) + 1, e.what());
    }
    ens.particles = std::move(particles);
    out.means.row(t) = ens.mean().transpose();
    out.covariances.push_back(ens.covariance());
    out.ess.push_back(1.0 / ens.weights.squaredNorm());

    const std::vector<Index> idx = systematic_resample(ens.weights, unif(rng));
    particles.resize(d, M);
    for (Index m = 0; m < M; ++m) particles.col(m) = ens.particles.col(idx[static_cast<std::size_t>(m)]);
    out.step_seconds.push_back(std::chrono::duration<double>(clock::now() - step_start).count());
  }
  out.total_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return out;
}

double GoldStandard::mean_squared_se() const { return se.size() == 0 ? 0.0 : se.squaredNorm() / se.size(); }

GoldStandard gold_standard(const StateSpaceModel& model, const ObservationSeq& observations,
                           const GaussianBelief& init, Index M, std::span<const std::uint64_t> seeds) {
  const auto R = static_cast<Index>(seeds.size());
  if (R < 1) throw Error("gold_standard: need at least one replicate");
  std::vector<Matrix> runs;
  runs.reserve(seeds.size());
  for (std::uint64_t s : seeds) runs.push_back(pf_filter(model, observations, init, M, s).means);

  GoldStandard gs;
  gs.mean = Matrix::Zero(runs.front().rows(), runs.front().cols());
  for (const Matrix& r : runs) gs.mean += r;
  gs.mean /= static_cast<double>(R);
  gs.se = Matrix::Zero(gs.mean.rows(), gs.mean.cols());
  if (R > 1) {
    for (const Matrix& r : runs) gs.se += (r - gs.mean).cwiseAbs2();
    gs.se = (gs.se / static_cast<double>(R - 1) / static_cast<double>(R)).cwiseSqrt();
  }
  return gs;
}

}  // namespace lgf
