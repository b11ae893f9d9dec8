#pragma once

#include "lgf/laplace.hpp"

namespace lgf {

struct LgfConfig {
  LaplaceOrder order = LaplaceOrder::First;
  NewtonConfig newton;
  RichardsonConfig richardson;
  bool use_analytic_obs_hessian = true;
  // Numeric Hessian increments are this multiple of the predictive std devs.
  double hessian_increment_scale = 0.1;

  static LgfConfig first_order();
  static LgfConfig second_order();
  // order and newton.alpha must agree.
  void validate() const;
};

struct StepDiagnostics {
  int newton_iterations = 0;
  double seconds = 0.0;
};

// predictive[t-1] and filtered[t-1] describe x_t, t = 1..T.
struct FilterOutput {
  std::vector<GaussianBelief> predictive;
  std::vector<GaussianBelief> filtered;
  std::vector<StepDiagnostics> diagnostics;
  double total_seconds = 0.0;

  std::size_t steps() const { return filtered.size(); }
  Matrix filtered_means() const;
};

struct SmoothOutput {
  std::vector<GaussianBelief> smoothed;

  Matrix means() const;
};

struct LgfStepResult {
  GaussianBelief belief;
  int newton_iterations = 0;
};

// Laplace update of the predictive belief with one observation.
LgfStepResult lgf_step(const GaussianBelief& pred, const Vector& y, const ObservationModel& obs, double gamma,
                       const LgfConfig& cfg);

// `init` describes x_0; each step predicts then updates. Failures are
// rethrown as StepError carrying the time index.
FilterOutput lgf_filter(const StateSpaceModel& model, const ObservationSeq& observations, const GaussianBelief& init,
                        double gamma, const LgfConfig& cfg);

// Fixed-interval backward recursion over Gaussian filtered/predictive beliefs.
SmoothOutput lgf_smooth(const FilterOutput& fo, const LinearGaussianTransition& trans);

enum class InitCovariance { TransitionNoise, Diffuse };

// Belief over x_0 centred on x0: covariance W, or 1e3 I when diffuse.
GaussianBelief initial_belief(const Vector& x0, const LinearGaussianTransition& trans,
                              InitCovariance kind = InitCovariance::TransitionNoise);

}  // namespace lgf
