#pragma once

#include <functional>
#include <optional>
#include <span>

#include "lgf/model.hpp"

namespace lgf {

struct PoissonPopulation;

// Second-derivative extrapolation table settings. Increments are h0 * c^-n.
struct RichardsonConfig {
  double h0 = 0.1;
  double c = 2.0;
  double rel_tol = 1e-9;
  int max_levels = 12;

  void validate() const;
};

enum class LaplaceOrder { First = 1, Second = 2 };

// Newton iteration stops once ||x_{i+1} - x_i|| < c_stop * gamma^-alpha.
struct NewtonConfig {
  double c_stop = 1.0;
  int alpha = 1;
  int max_iter = 100;
  int step_halving_limit = 40;

  void validate() const;
};

using ScalarFn = std::function<double(double)>;
using FieldFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;
using HessianFn = std::function<Matrix(const Vector&)>;

// f''(x0) by Richardson extrapolation of second central differences.
// Throws ConvergenceError when successive diagonal entries never agree to
// rel_tol within max_levels rows.
double richardson_d2(const ScalarFn& f, double x0, const RichardsonConfig& cfg);

// Hessian of f at xhat from one-dimensional slices: unmixed second
// derivatives along each axis, then mixed terms from the diagonal slice
// through coordinates (i, j) scaled to unit curvature. `h` holds the
// per-coordinate increments. The diagonal must come out negative.
Matrix numeric_hessian(const FieldFn& f, const Vector& xhat, const Vector& h, const RichardsonConfig& cfg);

struct NewtonResult {
  Vector x;
  Matrix hessian;  // Hessian at x
  double value = 0.0;
  // Steps taken before the one whose increment met the stopping rule.
  int iterations = 0;
};

// Newton ascent with backtracking step halving. Accepted iterates never
// decrease f.
NewtonResult newton_maximize(const FieldFn& f, const GradientFn& grad, const HessianFn& hess,
                             const Vector& x_start, double gamma, const NewtonConfig& cfg);

// A log-density l(x) with its derivatives. When `hessian` is empty or
// returns nullopt, numeric_hessian is applied to `value` with `increments`.
struct LogDensityBundle {
  FieldFn value;
  GradientFn gradient;
  std::function<std::optional<Matrix>(const Vector&)> hessian;
  Vector increments;
  RichardsonConfig richardson;

  Matrix hessian_at(const Vector& x) const;
};

// Builds the bundle for l(x) = log p(y|x) + log pred(x). Numeric Hessian
// increments default to 0.1 * sqrt(diag V_pred).
LogDensityBundle make_bundle(const LogPosterior& post, bool use_analytic_hessian,
                             const RichardsonConfig& richardson, double increment_scale = 0.1);

struct LaplaceMode {
  Vector mode;
  Matrix hessian;
  double value = 0.0;
  int iterations = 0;
};

LaplaceMode find_mode(const LogDensityBundle& l, const Vector& start, double gamma, const NewtonConfig& cfg);

// N(mode, [-l''(mode)]^-1)
GaussianBelief laplace_first(const LaplaceMode& m);
GaussianBelief laplace_first(const LogDensityBundle& l, const Vector& start, double gamma, const NewtonConfig& cfg);

// Fully exponential approximation of E[x_coord] using g(x) = x_coord + offset_c:
// maximizes k = log g + l from the l-mode, forms the ratio of the two Laplace
// integrals in log space and subtracts the offset again.
double laplace_second_mean(const LogDensityBundle& l, Index coord, double offset_c, const LaplaceMode& l_mode,
                           double gamma, const NewtonConfig& cfg);

// |m_i| + 10 sqrt(V_ii)
double choose_offset_c(const GaussianBelief& pred, Index coord);

// Delta * sum_i exp(alpha_i) ||beta_i||^2 + ||W^-1||_2
double compute_gamma(const PoissonPopulation& pop, const Matrix& W);

// Partial ordinary Bell polynomial C_{i,j}(A_1, A_2, ...): the coefficient of
// x^i in (A_1 x + A_2 x^2 + ...)^j. a[m - 1] holds A_m; needs a.size() >= i.
double bell_coefficient(std::span<const double> a, int i, int j);

// log |M| for symmetric positive definite M.
double log_det_spd(const Matrix& m);

}  // namespace lgf
