#include "lgf/laplace.hpp"

#include <cmath>
#include <limits>

#include "lgf/neural.hpp"

namespace lgf {

void RichardsonConfig::validate() const {
  if (!(h0 > 0.0)) throw Error("richardson: h0 must be positive");
  if (!(c > 1.0)) throw Error("richardson: c must exceed 1");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw Error("richardson: rel_tol must lie in (0, 1)");
  if (max_levels < 2) throw Error("richardson: max_levels must be at least 2");
}

void NewtonConfig::validate() const {
  if (!(c_stop > 0.0)) throw Error("newton: c_stop must be positive");
  if (alpha != 1 && alpha != 2) throw Error("newton: alpha must be 1 or 2");
  if (max_iter < 1) throw Error("newton: max_iter must be positive");
  if (step_halving_limit < 0) throw Error("newton: step_halving_limit must be non-negative");
}

double richardson_d2(const ScalarFn& f, double x0, const RichardsonConfig& cfg) {
  cfg.validate();
  const double f0 = f(x0);
  std::vector<double> prev;
  std::vector<double> row;
  double h = cfg.h0;
  for (int n = 0; n < cfg.max_levels; ++n, h /= cfg.c) {
    row.assign(static_cast<std::size_t>(n) + 1, 0.0);
    row[0] = (f(x0 + h) + f(x0 - h) - 2.0 * f0) / (h * h);
    // A_{n,k} has error O(h^{2(k+1)}); step k removes the h^{2k} term.
    double ck = 1.0;
    for (int k = 1; k <= n; ++k) {
      ck *= cfg.c * cfg.c;
      row[k] = row[k - 1] + (row[k - 1] - prev[k - 1]) / (ck - 1.0);
    }
    if (!std::isfinite(row[n])) break;
    if (n >= 1) {
      const double diff = std::abs(row[n - 1] - prev[n - 1]);
      if (diff <= cfg.rel_tol * std::abs(row[n - 1]) + std::numeric_limits<double>::min()) {
        return row[n];
      }
    }
    prev.swap(row);
  }
  throw ConvergenceError("richardson extrapolation did not converge");
}

Matrix numeric_hessian(const FieldFn& f, const Vector& xhat, const Vector& h, const RichardsonConfig& cfg) {
  const Index d = xhat.size();
  if (h.size() != d) throw DimensionError("numeric_hessian: increment vector has the wrong size");
  if (!(h.array() > 0.0).all()) throw Error("numeric_hessian: increments must be positive");

  Matrix H = Matrix::Zero(d, d);
  RichardsonConfig slice = cfg;
  for (Index i = 0; i < d; ++i) {
    slice.h0 = h[i];
    H(i, i) = richardson_d2(
        [&](double s) {
          Vector x = xhat;
          x[i] += s;
          return f(x);
        },
        0.0, slice);
    if (!(H(i, i) < 0.0)) {
      throw NotPositiveDefinite("numeric_hessian: non-negative second derivative along axis " + std::to_string(i));
    }
  }

  // Slice through (i, j) scaled so each axis alone has curvature -1; then
  // f''(0) = -2 + 2 H_ij / sqrt(H_ii H_jj).
  const Vector mag = H.diagonal().cwiseAbs();
  const Vector scale = mag.cwiseSqrt().cwiseInverse();
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      slice.h0 = std::min(h[i] / scale[i], h[j] / scale[j]);
      const double q = richardson_d2(
          [&](double s) {
            Vector x = xhat;
            x[i] += s * scale[i];
            x[j] += s * scale[j];
            return f(x);
          },
          0.0, slice);
      H(i, j) = H(j, i) = (q / 2.0 + 1.0) * std::sqrt(mag[i] * mag[j]);
    }
  }
  return H;
}

NewtonResult newton_maximize(const FieldFn& f, const GradientFn& grad, const HessianFn& hess,
                             const Vector& x_start, double gamma, const NewtonConfig& cfg) {
  cfg.validate();
  if (!(gamma > 0.0)) throw Error("newton: gamma must be positive");
  const double threshold = cfg.c_stop * std::pow(gamma, -cfg.alpha);

  Vector x = x_start;
  double fx = f(x);
  if (!std::isfinite(fx)) throw ConvergenceError("newton: objective is not finite at the start point");

  for (int it = 0; it < cfg.max_iter; ++it) {
    Matrix H = hess(x);
    Eigen::LLT<Matrix> llt(-H);
    if (llt.info() != Eigen::Success) throw ConvergenceError("newton: Hessian is not negative definite");
    const Vector step = llt.solve(grad(x));
    if (!step.allFinite()) throw ConvergenceError("newton: non-finite step");

    double t = 1.0;
    Vector x_new = x + step;
    double f_new = f(x_new);
    for (int k = 0; !(f_new >= fx) && k < cfg.step_halving_limit; ++k) {
      t *= 0.5;
      x_new = x + t * step;
      f_new = f(x_new);
    }
    if (!(f_new >= fx)) {
      // No ascent at rounding level: x is already within the tolerance.
      if (step.norm() < threshold) return {x, std::move(H), fx, it};
      throw ConvergenceError("newton: step halving failed to increase the objective");
    }

    const double increment = (x_new - x).norm();
    x = std::move(x_new);
    fx = f_new;
    if (increment < threshold) return {x, hess(x), fx, it};
  }
  throw ConvergenceError("newton: iteration limit reached");
}

Matrix LogDensityBundle::hessian_at(const Vector& x) const {
  if (hessian) {
    if (auto h = hessian(x)) return *h;
  }
  return numeric_hessian(value, x, increments, richardson);
}

LogDensityBundle make_bundle(const LogPosterior& post, bool use_analytic_hessian, const RichardsonConfig& richardson,
                             double increment_scale) {
  // `post` must outlive the bundle.
  LogDensityBundle b;
  b.value = [&post](const Vector& x) { return post.value(x); };
  b.gradient = [&post](const Vector& x) { return post.gradient(x); };
  if (use_analytic_hessian) {
    b.hessian = [&post](const Vector& x) { return post.hessian(x); };
  }
  b.increments = increment_scale * post.prior().cov().diagonal().cwiseSqrt();
  b.richardson = richardson;
  return b;
}

LaplaceMode find_mode(const LogDensityBundle& l, const Vector& start, double gamma, const NewtonConfig& cfg) {
  auto r = newton_maximize(
      l.value, l.gradient, [&l](const Vector& x) { return l.hessian_at(x); }, start, gamma, cfg);
  return {std::move(r.x), std::move(r.hessian), r.value, r.iterations};
}

GaussianBelief laplace_first(const LaplaceMode& m) {
  const Index d = m.mode.size();
  Eigen::LLT<Matrix> llt(-m.hessian);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("laplace: Hessian at the mode is not negative definite");
  return GaussianBelief(m.mode, symmetrize(llt.solve(Matrix::Identity(d, d))));
}

GaussianBelief laplace_first(const LogDensityBundle& l, const Vector& start, double gamma, const NewtonConfig& cfg) {
  return laplace_first(find_mode(l, start, gamma, cfg));
}

double laplace_second_mean(const LogDensityBundle& l, Index coord, double offset_c, const LaplaceMode& l_mode,
                           double gamma, const NewtonConfig& cfg) {
  const Index d = l_mode.mode.size();
  if (coord < 0 || coord >= d) throw DimensionError("laplace_second_mean: coordinate out of range");
  if (!(l_mode.mode[coord] + offset_c > 0.0)) {
    throw Error("laplace_second_mean: offset too small, g is not positive at the l-mode");
  }

  auto k_value = [&](const Vector& x) {
    const double g = x[coord] + offset_c;
    if (!(g > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(g) + l.value(x);
  };
  auto k_grad = [&](const Vector& x) {
    Vector gr = l.gradient(x);
    gr[coord] += 1.0 / (x[coord] + offset_c);
    return gr;
  };
  auto k_hess = [&](const Vector& x) {
    Matrix H = l.hessian_at(x);
    const double g = x[coord] + offset_c;
    H(coord, coord) -= 1.0 / (g * g);
    return H;
  };

  const NewtonResult k = newton_maximize(k_value, k_grad, k_hess, l_mode.mode, gamma, cfg);
  if (!(k.x[coord] + offset_c > 0.0)) throw Error("laplace_second_mean: g is not positive at the k-mode");

  const double log_num = -0.5 * log_det_spd(-k.hessian) + k.value;
  const double log_den = -0.5 * log_det_spd(-l_mode.hessian) + l_mode.value;
  return std::exp(log_num - log_den) - offset_c;
}

double choose_offset_c(const GaussianBelief& pred, Index coord) {
  if (coord < 0 || coord >= pred.dim()) throw DimensionError("choose_offset_c: coordinate out of range");
  return std::abs(pred.mean()[coord]) + 10.0 * std::sqrt(pred.cov()(coord, coord));
}

double compute_gamma(const PoissonPopulation& pop, const Matrix& W) {
  if (W.rows() != W.cols()) throw DimensionError("compute_gamma: W must be square");
  if (W.rows() != pop.dim()) throw DimensionError("compute_gamma: W and population dimensions differ");
  Eigen::FullPivLU<Matrix> lu(W);
  if (!lu.isInvertible()) throw Error("compute_gamma: W is singular");
  const Matrix w_inv = lu.inverse();
  Eigen::JacobiSVD<Matrix> svd(w_inv);
  double obs = 0.0;
  for (Index i = 0; i < pop.alpha.size(); ++i) {
    obs += std::exp(pop.alpha[i]) * pop.beta.row(i).squaredNorm();
  }
  return pop.delta * obs + svd.singularValues()[0];
}

double bell_coefficient(std::span<const double> a, int i, int j) {
  if (i < 0 || j < 0) throw Error("bell_coefficient: indices must be non-negative");
  if (static_cast<std::size_t>(i) > a.size()) throw Error("bell_coefficient: need A_1..A_i");
  if (j > i) return 0.0;
  // table[m][q] = C_{m,q}
  std::vector<std::vector<double>> table(static_cast<std::size_t>(i) + 1,
                                         std::vector<double>(static_cast<std::size_t>(j) + 1, 0.0));
  table[0][0] = 1.0;
  for (int q = 1; q <= j; ++q) {
    for (int m = q; m <= i; ++m) {
      double s = 0.0;
      for (int p = q - 1; p <= m - 1; ++p) s += a[static_cast<std::size_t>(m - p - 1)] * table[p][q - 1];
      table[m][q] = s;
    }
  }
  return table[i][j];
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("log_det_spd: matrix is not positive definite");
  const Matrix L = llt.matrixL();
  return 2.0 * L.diagonal().array().log().sum();
}

}  // namespace lgf
