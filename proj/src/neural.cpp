#include "lgf/neural.hpp"

#include <cmath>
#include <limits>

namespace lgf {

void PoissonPopulation::validate() const {
  if (!(delta > 0.0)) throw Error("population: delta must be positive");
  if (beta.rows() != alpha.size()) throw DimensionError("population: beta needs one row per neuron");
  if (!alpha.allFinite() || !beta.allFinite()) throw Error("population: non-finite parameters");
}

void SpikeCounts::validate() const {
  if (!y.allFinite() || (y.array() < 0.0).any()) throw Error("spike counts must be finite and non-negative");
}

SpikeCounts SpikeCounts::from_observations(const ObservationSeq& obs) {
  SpikeCounts s;
  if (obs.empty()) return s;
  s.y.resize(static_cast<Index>(obs.size()), obs.front().size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (obs[t].size() != s.y.cols()) throw DimensionError("observation sizes differ across steps");
    s.y.row(static_cast<Index>(t)) = obs[t].transpose();
  }
  return s;
}

ObservationSeq SpikeCounts::to_observations() const {
  ObservationSeq out;
  out.reserve(static_cast<std::size_t>(y.rows()));
  for (Index t = 0; t < y.rows(); ++t) out.push_back(y.row(t).transpose());
  return out;
}

void PvaParams::validate() const {
  if (r.size() != theta.rows() || Lambda.size() != theta.rows()) throw DimensionError("pva: parameter sizes differ");
  if (!(Lambda.array() > 0.0).all()) throw Error("pva: Lambda must be positive");
}

PoissonObservation::PoissonObservation(PoissonPopulation pop) : pop_(std::move(pop)) { pop_.validate(); }

double PoissonObservation::log_constant(const Vector& y) const {
  double c = 0.0;
  const double log_delta = std::log(pop_.delta);
  for (Index i = 0; i < y.size(); ++i) c += y[i] * log_delta - std::lgamma(y[i] + 1.0);
  return c;
}

void PoissonObservation::check(const Vector& y, const Vector& x) const {
  if (y.size() != pop_.neurons()) throw DimensionError("poisson: count vector has the wrong length");
  if (x.size() != pop_.dim()) throw DimensionError("poisson: state has the wrong dimension");
}

double PoissonObservation::log_density(const Vector& y, const Vector& x) const {
  check(y, x);
  const Vector eta = pop_.alpha + pop_.beta * x;
  return y.dot(eta) - pop_.delta * eta.array().exp().sum() + log_constant(y);
}

Vector PoissonObservation::gradient(const Vector& y, const Vector& x) const {
  check(y, x);
  const Vector mu = pop_.delta * (pop_.alpha + pop_.beta * x).array().exp().matrix();
  return pop_.beta.transpose() * (y - mu);
}

std::optional<Matrix> PoissonObservation::hessian(const Vector&, const Vector& x) const {
  const Vector mu = pop_.delta * (pop_.alpha + pop_.beta * x).array().exp().matrix();
  return Matrix(-(pop_.beta.transpose() * mu.asDiagonal() * pop_.beta));
}

Vector PoissonObservation::sample(const Vector& x, Rng& rng) const {
  const Vector mu = pop_.delta * (pop_.alpha + pop_.beta * x).array().exp().matrix();
  Vector y(mu.size());
  for (Index i = 0; i < mu.size(); ++i) {
    std::poisson_distribution<long long> pois(mu[i]);
    y[i] = static_cast<double>(pois(rng));
  }
  return y;
}

Vector PoissonObservation::log_density_batch(const Vector& y, const Matrix& states) const {
  if (y.size() != pop_.neurons() || states.rows() != pop_.dim()) throw DimensionError("poisson: batch dimensions");
  const Index M = states.cols();
  const double base = y.dot(pop_.alpha) + log_constant(y);
  const Eigen::RowVectorXd linear = (pop_.beta.transpose() * y).transpose() * states;
  Vector out(M);
  constexpr Index kChunk = 2048;
  Matrix eta;
  for (Index start = 0; start < M; start += kChunk) {
    const Index n = std::min(kChunk, M - start);
    eta.noalias() = pop_.beta * states.middleCols(start, n);
    eta.colwise() += pop_.alpha;
    const Eigen::RowVectorXd rate = eta.array().exp().colwise().sum();
    out.segment(start, n) = (base + linear.segment(start, n).array() - pop_.delta * rate.array()).transpose();
  }
  return out;
}

PoissonPopulation sample_population(Index N, Index d, std::uint64_t seed, double delta) {
  if (N < 1 || d < 1) throw DimensionError("sample_population needs N >= 1 and d >= 1");
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  PoissonPopulation pop;
  pop.delta = delta;
  pop.alpha.resize(N);
  pop.beta.resize(N, d);
  for (Index i = 0; i < N; ++i) {
    pop.alpha[i] = 2.5 + z(rng);
    Vector b(d);
    do {
      for (Index k = 0; k < d; ++k) b[k] = z(rng);
    } while (b.norm() == 0.0);
    pop.beta.row(i) = b.normalized().transpose();
  }
  return pop;
}

GlmFit fit_poisson_glm(const SpikeCounts& spikes, const Trajectory& states, double delta) {
  spikes.validate();
  states.validate();
  if (!(delta > 0.0)) throw Error("fit_poisson_glm: delta must be positive");
  const Index T = states.steps();
  const Index d = states.dim();
  const Index N = spikes.neurons();
  const Index p = d + 1;
  if (spikes.steps() != T) throw DimensionError("fit_poisson_glm: counts and states have different lengths");
  if (T <= p) throw DimensionError("fit_poisson_glm: need T > d + 1");

  Matrix X(T, p);
  X.col(0).setOnes();
  X.rightCols(d) = states.states;
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  if (qr.rank() < p) throw DimensionError("fit_poisson_glm: design matrix is rank deficient");

  const double offset = std::log(delta);
  constexpr int kMaxIter = 100;
  constexpr double kScoreTol = 1e-8;

  GlmFit fit;
  fit.alpha.resize(N);
  fit.beta.resize(N, d);
  fit.alpha_se.resize(N);
  fit.beta_se.resize(N, d);
  fit.iterations.assign(static_cast<std::size_t>(N), 0);

  for (Index n = 0; n < N; ++n) {
    const Vector y = spikes.y.col(n);
    const double ybar = y.mean();
    if (!(ybar > 0.0)) throw ConvergenceError("fit_poisson_glm: neuron " + std::to_string(n) + " never fires");

    auto loglik = [&](const Vector& theta) {
      const Vector eta = (X * theta).array() + offset;
      return y.dot(eta) - eta.array().exp().sum();
    };

    const double score_tol = kScoreTol * (1.0 + (X.transpose() * y).norm());
    Vector theta = Vector::Zero(p);
    theta[0] = std::log(ybar) - offset;
    double ll = loglik(theta);
    Matrix info;
    bool converged = false;
    int it = 0;
    for (; it < kMaxIter; ++it) {
      const Vector mu = ((X * theta).array() + offset).exp();
      const Vector score = X.transpose() * (y - mu);
      info = X.transpose() * mu.asDiagonal() * X;
      if (score.norm() < score_tol) {
        converged = true;
        break;
      }
      Eigen::LLT<Matrix> llt(info);
      if (llt.info() != Eigen::Success) break;
      const Vector step = llt.solve(score);
      double t = 1.0;
      Vector next = theta + step;
      double ll_next = loglik(next);
      for (int k = 0; !(ll_next >= ll) && k < 50; ++k) {
        t *= 0.5;
        next = theta + t * step;
        ll_next = loglik(next);
      }
      if (!(ll_next >= ll)) {
        // Stalled: converged if the predicted gain is below the rounding level of ll.
        converged = step.dot(score) <= 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ll));
        break;
      }
      theta = std::move(next);
      ll = ll_next;
      if (!theta.allFinite() || theta.norm() > 1e6) break;
    }
    if (!converged) {
      throw ConvergenceError("fit_poisson_glm: neuron " + std::to_string(n) +
                             " did not converge (separation or divergence)");
    }
    const Vector se = info.llt().solve(Matrix::Identity(p, p)).diagonal().cwiseSqrt();
    fit.alpha[n] = theta[0];
    fit.beta.row(n) = theta.tail(d).transpose();
    fit.alpha_se[n] = se[0];
    fit.beta_se.row(n) = se.tail(d).transpose();
    fit.iterations[static_cast<std::size_t>(n)] = it;
  }
  return fit;
}

double fit_sigma2(const Trajectory& states, double dt) {
  states.validate();
  if (!(dt > 0.0)) throw Error("fit_sigma2: dt must be positive");
  if (states.dim() != 6) throw DimensionError("fit_sigma2: states must be (position, velocity) in R^6");
  const Index T = states.steps();
  if (T < 2) throw DimensionError("fit_sigma2: need T >= 2");
  const auto v = states.states.rightCols(3);
  const double ss = (v.bottomRows(T - 1) - v.topRows(T - 1)).squaredNorm();
  return ss / (3.0 * static_cast<double>(T - 1));
}

LinearGaussianTransition build_pv_transition(double sigma2, double dt) {
  if (!(sigma2 > 0.0)) throw Error("build_pv_transition: sigma2 must be positive");
  Matrix F = Matrix::Identity(6, 6);
  F.topRightCorner(3, 3) = dt * Matrix::Identity(3, 3);
  Matrix W = Matrix::Zero(6, 6);
  W.bottomRightCorner(3, 3) = sigma2 * Matrix::Identity(3, 3);
  return LinearGaussianTransition(std::move(F), std::move(W));
}

PvaParams pva_params_from_population(const PoissonPopulation& pop) {
  pop.validate();
  PvaParams p;
  const Index N = pop.neurons();
  p.theta.resize(N, pop.dim());
  p.r.resize(N);
  p.Lambda.resize(N);
  for (Index i = 0; i < N; ++i) {
    const double norm = pop.beta.row(i).norm();
    if (!(norm > 0.0)) throw Error("pva: neuron " + std::to_string(i) + " has no tuning direction");
    p.theta.row(i) = pop.beta.row(i) / norm;
    p.r[i] = std::exp(pop.alpha[i]);
    p.Lambda[i] = p.r[i] * norm;
  }
  return p;
}

Trajectory pva_decode(const SpikeCounts& spikes, const PvaParams& pva, double dt) {
  pva.validate();
  if (spikes.neurons() != pva.theta.rows()) throw DimensionError("pva_decode: neuron counts differ");
  if (!(dt > 0.0)) throw Error("pva_decode: dt must be positive");
  const Eigen::RowVectorXd baseline = (pva.r * dt).transpose();
  const Eigen::RowVectorXd scale = (pva.Lambda * dt).cwiseInverse().transpose();
  Matrix weights = (spikes.y.rowwise() - baseline).array().rowwise() * scale.array();
  Trajectory out;
  out.dt = dt;
  out.states = weights * pva.theta;
  return out;
}

}  // namespace lgf
