#include "lgf/model.hpp"

#include <cmath>
#include <numbers>

namespace lgf {

namespace {

void require_square(const Matrix& m, Index d, const char* name) {
  if (m.rows() != d || m.cols() != d) {
    throw DimensionError(std::string(name) + " must be " + std::to_string(d) + "x" +
                         std::to_string(d));
  }
}

Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = z(rng);
  return out;
}

}  // namespace

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

GaussianBelief::GaussianBelief(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const Index d = mean_.size();
  if (d < 1) throw DimensionError("belief dimension must be positive");
  require_square(cov_, d, "covariance");
  if (!mean_.allFinite() || !cov_.allFinite()) throw Error("belief has non-finite entries");

  const double scale = cov_.cwiseAbs().maxCoeff();
  const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) throw NotPositiveDefinite("covariance is not symmetric");

  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite");
  chol_ = llt.matrixL();
  for (Index i = 0; i < d; ++i) {
    if (!(chol_(i, i) > 0.0)) throw NotPositiveDefinite("covariance is not positive definite");
  }
  log_norm_ = static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
              2.0 * chol_.diagonal().array().log().sum();
}

double GaussianBelief::log_density(const Vector& x) const {
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (log_norm_ + z.squaredNorm());
}

Matrix GaussianBelief::precision() const {
  const Index d = dim();
  Matrix linv = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  return symmetrize(linv.transpose() * linv);
}

LinearGaussianTransition::LinearGaussianTransition(Matrix F, Matrix W) : F_(std::move(F)), W_(std::move(W)) {
  const Index d = F_.rows();
  if (d < 1) throw DimensionError("transition dimension must be positive");
  require_square(F_, d, "F");
  require_square(W_, d, "W");
  const double scale = std::max(W_.cwiseAbs().maxCoeff(), 1e-300);
  if ((W_ - W_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NotPositiveDefinite("W is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(W_));
  const Vector& lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -1e-12 * scale) throw NotPositiveDefinite("W has a negative eigenvalue");
  noise_factor_ = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Vector ObservationModel::log_density_batch(const Vector& y, const Matrix& states) const {
  Vector out(states.cols());
  for (Index j = 0; j < states.cols(); ++j) out[j] = log_density(y, states.col(j));
  return out;
}

LinearGaussianObservation::LinearGaussianObservation(Matrix H, Matrix R) : H_(std::move(H)), R_(std::move(R)) {
  require_square(R_, H_.rows(), "R");
  Eigen::LLT<Matrix> llt(R_);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("R is not positive definite");
  R_chol_ = llt.matrixL();
  R_inv_ = symmetrize(llt.solve(Matrix::Identity(R_.rows(), R_.rows())));
  log_norm_ = static_cast<double>(R_.rows()) * std::log(2.0 * std::numbers::pi) +
              2.0 * R_chol_.diagonal().array().log().sum();
}

double LinearGaussianObservation::log_density(const Vector& y, const Vector& x) const {
  const Vector r = y - H_ * x;
  return -0.5 * (log_norm_ + r.dot(R_inv_ * r));
}

Vector LinearGaussianObservation::log_density_batch(const Vector& y, const Matrix& states) const {
  if (states.rows() != state_dim()) throw DimensionError("log_density_batch: states have the wrong dimension");
  // Whitened residuals L^-1 (y - H x_j), one column per state.
  Matrix r = (-(H_ * states)).colwise() + y;
  R_chol_.triangularView<Eigen::Lower>().solveInPlace(r);
  return (-0.5 * (r.colwise().squaredNorm().array() + log_norm_)).transpose();
}

Vector LinearGaussianObservation::gradient(const Vector& y, const Vector& x) const {
  return H_.transpose() * (R_inv_ * (y - H_ * x));
}

std::optional<Matrix> LinearGaussianObservation::hessian(const Vector&, const Vector&) const {
  return Matrix(-(H_.transpose() * R_inv_ * H_));
}

Vector LinearGaussianObservation::sample(const Vector& x, Rng& rng) const {
  return H_ * x + R_chol_ * standard_normal(H_.rows(), rng);
}

void Trajectory::validate() const {
  if (states.rows() < 1 || states.cols() < 1) throw DimensionError("trajectory needs T >= 1 and d >= 1");
  if (!states.allFinite()) throw Error("trajectory has non-finite entries");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("trajectory dt must be positive");
}

GaussianBelief predict(const GaussianBelief& belief, const LinearGaussianTransition& trans) {
  if (belief.dim() != trans.dim()) throw DimensionError("belief and transition dimensions differ");
  const Matrix& F = trans.F();
  Vector mean = F * belief.mean();
  Matrix cov = symmetrize(F * belief.cov() * F.transpose() + trans.W());
  return GaussianBelief(std::move(mean), std::move(cov));
}

Simulation simulate(const StateSpaceModel& model, Index T, const Vector& x0, std::uint64_t seed) {
  const Index d = model.state_dim();
  if (T < 1) throw DimensionError("simulate needs T >= 1");
  if (x0.size() != d) throw DimensionError("x0 has the wrong dimension");
  if (!model.observation || model.observation->state_dim() != d) {
    throw DimensionError("observation model state dimension differs from transition");
  }

  Rng rng(seed);
  Simulation sim;
  sim.trajectory.dt = model.dt;
  sim.trajectory.states.resize(T, d);
  sim.observations.reserve(static_cast<std::size_t>(T));

  const Matrix& F = model.transition.F();
  const Matrix& S = model.transition.noise_factor();
  Vector x = x0;
  for (Index t = 0; t < T; ++t) {
    x = F * x + S * standard_normal(d, rng);
    sim.trajectory.states.row(t) = x.transpose();
    sim.observations.push_back(model.observation->sample(x, rng));
  }
  return sim;
}

LogPosterior::LogPosterior(const ObservationModel& obs, Vector y, GaussianBelief pred)
    : obs_(&obs), y_(std::move(y)), pred_(std::move(pred)), precision_(pred_.precision()) {
  if (obs.state_dim() != pred_.dim()) throw DimensionError("observation model and prior dimensions differ");
  if (y_.size() != obs.obs_dim()) throw DimensionError("observation vector has the wrong length");
}

double LogPosterior::value(const Vector& x) const { return obs_->log_density(y_, x) + pred_.log_density(x); }

Vector LogPosterior::gradient(const Vector& x) const {
  return obs_->gradient(y_, x) - precision_ * (x - pred_.mean());
}

std::optional<Matrix> LogPosterior::hessian(const Vector& x) const {
  auto h = obs_->hessian(y_, x);
  if (!h) return std::nullopt;
  return symmetrize(*h - precision_);
}

}  // namespace lgf
