#include "lgf/filter.hpp"

#include <chrono>

namespace lgf {

LgfConfig LgfConfig::first_order() { return LgfConfig{}; }

LgfConfig LgfConfig::second_order() {
  LgfConfig cfg;
  cfg.order = LaplaceOrder::Second;
  cfg.newton.alpha = 2;
  return cfg;
}

void LgfConfig::validate() const {
  newton.validate();
  richardson.validate();
  if (newton.alpha != static_cast<int>(order)) throw Error("lgf: newton.alpha must equal the Laplace order");
  if (!(hessian_increment_scale > 0.0)) throw Error("lgf: hessian_increment_scale must be positive");
}

Matrix FilterOutput::filtered_means() const {
  if (filtered.empty()) return {};
  Matrix m(static_cast<Index>(filtered.size()), filtered.front().dim());
  for (std::size_t t = 0; t < filtered.size(); ++t) m.row(static_cast<Index>(t)) = filtered[t].mean().transpose();
  return m;
}

Matrix SmoothOutput::means() const {
  if (smoothed.empty()) return {};
  Matrix m(static_cast<Index>(smoothed.size()), smoothed.front().dim());
  for (std::size_t t = 0; t < smoothed.size(); ++t) m.row(static_cast<Index>(t)) = smoothed[t].mean().transpose();
  return m;
}

LgfStepResult lgf_step(const GaussianBelief& pred, const Vector& y, const ObservationModel& obs, double gamma,
                       const LgfConfig& cfg) {
  cfg.validate();
  const LogPosterior post(obs, y, pred);
  const LogDensityBundle l =
      make_bundle(post, cfg.use_analytic_obs_hessian, cfg.richardson, cfg.hessian_increment_scale);
  const LaplaceMode mode = find_mode(l, pred.mean(), gamma, cfg.newton);
  GaussianBelief first = laplace_first(mode);
  if (cfg.order == LaplaceOrder::First) return {std::move(first), mode.iterations};

  // One shared l-mode and l-Hessian; one k maximization per coordinate.
  Vector mean(pred.dim());
  for (Index i = 0; i < pred.dim(); ++i) {
    mean[i] = laplace_second_mean(l, i, choose_offset_c(pred, i), mode, gamma, cfg.newton);
  }
  return {GaussianBelief(std::move(mean), first.cov()), mode.iterations};
}

FilterOutput lgf_filter(const StateSpaceModel& model, const ObservationSeq& observations, const GaussianBelief& init,
                        double gamma, const LgfConfig& cfg) {
  cfg.validate();
  if (observations.empty()) throw DimensionError("lgf_filter: need at least one observation");
  if (!model.observation) throw Error("lgf_filter: model has no observation density");
  if (init.dim() != model.state_dim()) throw DimensionError("lgf_filter: initial belief has the wrong dimension");
  using clock = std::chrono::steady_clock;

  FilterOutput out;
  out.predictive.reserve(observations.size());
  out.filtered.reserve(observations.size());
  out.diagnostics.reserve(observations.size());
  const auto t_start = clock::now();

  GaussianBelief current = init;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    const auto step_start = clock::now();
    try {
      GaussianBelief pred = predict(current, model.transition);
      LgfStepResult r = lgf_step(pred, observations[t], *model.observation, gamma, cfg);
      out.predictive.push_back(std::move(pred));
      current = r.belief;
      out.filtered.push_back(std::move(r.belief));
      out.diagnostics.push_back(
          {r.newton_iterations, std::chrono::duration<double>(clock::now() - step_start).count()});
    } catch (const StepError&) {
      throw;
    } catch (const std::exception& e) {
      throw StepError(t + 1, e.what());
    }
  }
  out.total_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return out;
}

SmoothOutput lgf_smooth(const FilterOutput& fo, const LinearGaussianTransition& trans) {
  const std::size_t T = fo.filtered.size();
  if (T == 0 || fo.predictive.size() != T) throw DimensionError("lgf_smooth: malformed filter output");
  if (fo.filtered.front().dim() != trans.dim()) throw DimensionError("lgf_smooth: transition dimension differs");
  const Matrix& F = trans.F();

  std::vector<GaussianBelief> rev;
  rev.reserve(T);
  rev.push_back(fo.filtered[T - 1]);
  for (std::size_t t = T - 1; t-- > 0;) {
    const GaussianBelief& filt = fo.filtered[t];
    const GaussianBelief& next_pred = fo.predictive[t + 1];
    const GaussianBelief& next_smooth = rev.back();
    Eigen::LLT<Matrix> llt(next_pred.cov());
    if (llt.info() != Eigen::Success) {
      throw StepError(t + 2, "lgf_smooth: predictive covariance is singular");
    }
    // G = V_f F^T V_pred^-1
    const Matrix gain = llt.solve(F * filt.cov()).transpose();
    Vector mean = filt.mean() + gain * (next_smooth.mean() - next_pred.mean());
    Matrix cov = symmetrize(filt.cov() + gain * (next_smooth.cov() - next_pred.cov()) * gain.transpose());
    try {
      rev.emplace_back(std::move(mean), std::move(cov));
    } catch (const std::exception& e) {
      throw StepError(t + 1, e.what());
    }
  }
  return {std::vector<GaussianBelief>(rev.rbegin(), rev.rend())};
}

GaussianBelief initial_belief(const Vector& x0, const LinearGaussianTransition& trans, InitCovariance kind) {
  if (x0.size() != trans.dim()) throw DimensionError("initial_belief: x0 has the wrong dimension");
  if (kind == InitCovariance::Diffuse) return GaussianBelief(x0, 1e3 * Matrix::Identity(x0.size(), x0.size()));
  return GaussianBelief(x0, trans.W());
}

}  // namespace lgf
