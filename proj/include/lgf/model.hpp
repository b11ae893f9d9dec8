#pragma once

#include <memory>
#include <optional>

#include "lgf/types.hpp"

namespace lgf {

// (A + A^T) / 2
Matrix symmetrize(const Matrix& a);

// Gaussian N(mean, cov). Construction validates the covariance: symmetric to
// 1e-12 relative and Cholesky-factorizable. Instances are immutable.
class GaussianBelief {
 public:
  GaussianBelief(Vector mean, Matrix cov);

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  // Lower Cholesky factor of cov.
  const Matrix& chol() const { return chol_; }
  Index dim() const { return mean_.size(); }

  double log_density(const Vector& x) const;
  // log((2 pi)^d |cov|)
  double log_normalizer() const { return log_norm_; }
  Matrix precision() const;

 private:
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  double log_norm_ = 0.0;
};

// x_t = F x_{t-1} + eps_t, eps_t ~ N(0, W), W symmetric PSD.
class LinearGaussianTransition {
 public:
  LinearGaussianTransition(Matrix F, Matrix W);

  const Matrix& F() const { return F_; }
  const Matrix& W() const { return W_; }
  Index dim() const { return F_.rows(); }
  // Any S with S S^T = W; usable for sampling when W is singular.
  const Matrix& noise_factor() const { return noise_factor_; }

 private:
  Matrix F_;
  Matrix W_;
  Matrix noise_factor_;
};

// Observation density p(y | x).
class ObservationModel {
 public:
  virtual ~ObservationModel() = default;

  virtual Index obs_dim() const = 0;
  virtual Index state_dim() const = 0;
  virtual double log_density(const Vector& y, const Vector& x) const = 0;
  virtual Vector gradient(const Vector& y, const Vector& x) const = 0;
  // Analytic Hessian in x, when the model has one.
  virtual std::optional<Matrix> hessian(const Vector& /*y*/, const Vector& /*x*/) const {
    return std::nullopt;
  }
  virtual Vector sample(const Vector& x, Rng& rng) const = 0;

  // log p(y | x_j) for every column x_j of `states` (d x M). Implementations
  // may vectorize; the default loops over log_density.
  virtual Vector log_density_batch(const Vector& y, const Matrix& states) const;
};

// y = H x + v, v ~ N(0, R).
class LinearGaussianObservation final : public ObservationModel {
 public:
  LinearGaussianObservation(Matrix H, Matrix R);

  Index obs_dim() const override { return H_.rows(); }
  Index state_dim() const override { return H_.cols(); }
  double log_density(const Vector& y, const Vector& x) const override;
  Vector gradient(const Vector& y, const Vector& x) const override;
  std::optional<Matrix> hessian(const Vector& y, const Vector& x) const override;
  Vector sample(const Vector& x, Rng& rng) const override;
  Vector log_density_batch(const Vector& y, const Matrix& states) const override;

  const Matrix& H() const { return H_; }
  const Matrix& R() const { return R_; }

 private:
  Matrix H_;
  Matrix R_;
  Matrix R_inv_;
  Matrix R_chol_;
  double log_norm_;
};

// Carries no information about x: log p(y | x) = 0.
class FlatObservation final : public ObservationModel {
 public:
  FlatObservation(Index state_dim, Index obs_dim = 0) : d_(state_dim), n_(obs_dim) {}

  Index obs_dim() const override { return n_; }
  Index state_dim() const override { return d_; }
  double log_density(const Vector&, const Vector&) const override { return 0.0; }
  Vector gradient(const Vector&, const Vector&) const override { return Vector::Zero(d_); }
  std::optional<Matrix> hessian(const Vector&, const Vector&) const override {
    return Matrix::Zero(d_, d_);
  }
  Vector sample(const Vector&, Rng&) const override { return Vector::Zero(n_); }

 private:
  Index d_;
  Index n_;
};

struct StateSpaceModel {
  LinearGaussianTransition transition;
  std::shared_ptr<const ObservationModel> observation;
  // Seconds per step.
  double dt = 1.0;

  Index state_dim() const { return transition.dim(); }
};

struct Trajectory {
  Matrix states;  // T x d, row t-1 holds x_t
  double dt = 1.0;

  Index steps() const { return states.rows(); }
  Index dim() const { return states.cols(); }
  void validate() const;
};

struct Simulation {
  Trajectory trajectory;
  ObservationSeq observations;
};

GaussianBelief predict(const GaussianBelief& belief, const LinearGaussianTransition& trans);

// Draws x_1..x_T from x_0 = x0 and an observation at every state.
Simulation simulate(const StateSpaceModel& model, Index T, const Vector& x0, std::uint64_t seed);

// l(x) = log p(y | x) + log N(x; pred), the log-posterior up to the evidence.
class LogPosterior {
 public:
  LogPosterior(const ObservationModel& obs, Vector y, GaussianBelief pred);

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  // Present only when the observation model supplies an analytic Hessian.
  std::optional<Matrix> hessian(const Vector& x) const;

  const GaussianBelief& prior() const { return pred_; }
  const Matrix& prior_precision() const { return precision_; }
  const ObservationModel& observation() const { return *obs_; }
  const Vector& y() const { return y_; }

 private:
  const ObservationModel* obs_;
  Vector y_;
  GaussianBelief pred_;
  Matrix precision_;
};

}  // namespace lgf
