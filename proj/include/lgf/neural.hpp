#pragma once

#include "lgf/model.hpp"

namespace lgf {

// log lambda_i(x) = alpha_i + beta_i . x; counts y_i ~ Poisson(lambda_i(x) delta).
struct PoissonPopulation {
  Vector alpha;  // N
  Matrix beta;   // N x d
  double delta = 0.03;

  Index neurons() const { return alpha.size(); }
  Index dim() const { return beta.cols(); }
  void validate() const;
};

// Spike counts, T x N, one row per time step.
struct SpikeCounts {
  Matrix y;

  Index steps() const { return y.rows(); }
  Index neurons() const { return y.cols(); }
  void validate() const;

  static SpikeCounts from_observations(const ObservationSeq& obs);
  ObservationSeq to_observations() const;
};

// Cosine-tuning parameters: (lambda_i - r_i) / Lambda_i = x . theta_i.
struct PvaParams {
  Matrix theta;   // N x d, unit rows
  Vector r;       // baseline rate, spikes/s
  Vector Lambda;  // modulation depth, spikes/s

  void validate() const;
};

class PoissonObservation final : public ObservationModel {
 public:
  explicit PoissonObservation(PoissonPopulation pop);

  Index obs_dim() const override { return pop_.neurons(); }
  Index state_dim() const override { return pop_.dim(); }
  // Exact log pmf, including -log y! and y log delta.
  double log_density(const Vector& y, const Vector& x) const override;
  Vector gradient(const Vector& y, const Vector& x) const override;
  std::optional<Matrix> hessian(const Vector& y, const Vector& x) const override;
  Vector sample(const Vector& x, Rng& rng) const override;
  Vector log_density_batch(const Vector& y, const Matrix& states) const override;

  const PoissonPopulation& population() const { return pop_; }

 private:
  double log_constant(const Vector& y) const;
  void check(const Vector& y, const Vector& x) const;

  PoissonPopulation pop_;
};

// alpha_i = 2.5 + N(0,1); beta_i uniform on the unit sphere in R^d.
PoissonPopulation sample_population(Index N, Index d, std::uint64_t seed, double delta = 0.03);

struct GlmFit {
  Vector alpha;     // N
  Matrix beta;      // N x d
  Vector alpha_se;  // observed-information standard errors
  Matrix beta_se;
  std::vector<int> iterations;
};

// Per-neuron Poisson regression of counts on states, log link with offset
// log(delta). Newton iterations run until the score norm drops below
// 1e-8 (1 + |X^T y|).
GlmFit fit_poisson_glm(const SpikeCounts& spikes, const Trajectory& states, double delta);

// ML innovation variance of the velocity block of (position, velocity) states:
// sum_t ||v_t - v_{t-1}||^2 / (3 (T - 1)).
double fit_sigma2(const Trajectory& states, double dt);

// Constant-velocity model on (z, v) in R^3 x R^3 with noise sigma2 I on v only.
LinearGaussianTransition build_pv_transition(double sigma2, double dt);

// theta_i = beta_i / |beta_i|, r_i = exp(alpha_i), Lambda_i = exp(alpha_i) |beta_i|:
// first-order match of the log-linear rate to cosine tuning at x = 0.
PvaParams pva_params_from_population(const PoissonPopulation& pop);

// x_pop(t) = sum_i (y_i(t) - r_i dt) / (Lambda_i dt) theta_i
Trajectory pva_decode(const SpikeCounts& spikes, const PvaParams& pva, double dt);

}  // namespace lgf
