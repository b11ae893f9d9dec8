#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lgf/laplace.hpp"
#include "lgf/neural.hpp"
#include "oracles.hpp"

using namespace lgf;

namespace {

// Gaussian states with standard deviation `scale`, one row per step.
Trajectory gaussian_states(Index T, Index d, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {oracle::random_matrix(T, d, rng, scale), 0.03};
}

SpikeCounts sample_counts(const PoissonObservation& obs, const Trajectory& states, std::uint64_t seed) {
  Rng rng(seed);
  SpikeCounts s;
  s.y.resize(states.steps(), obs.obs_dim());
  for (Index t = 0; t < states.steps(); ++t) s.y.row(t) = obs.sample(states.states.row(t).transpose(), rng).transpose();
  return s;
}

}  // namespace

TEST_CASE("population sampling") {
  const PoissonPopulation pop = sample_population(10000, 6, 1);
  CHECK(pop.neurons() == 10000);
  CHECK(pop.dim() == 6);
  CHECK(pop.delta == 0.03);
  CHECK((pop.beta.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(std::abs(pop.alpha.mean() - 2.5) < 3.0 / std::sqrt(10000.0));
  // Directions uniform on the sphere: E[beta beta^T] = I / d.
  const Matrix second = pop.beta.transpose() * pop.beta / 10000.0;
  CHECK((second - Matrix::Identity(6, 6) / 6.0).cwiseAbs().maxCoeff() < 0.01);

  const PoissonPopulation again = sample_population(10000, 6, 1);
  CHECK(again.alpha == pop.alpha);
  CHECK(again.beta == pop.beta);
  CHECK(sample_population(5, 2, 2, 0.1).delta == 0.1);
  CHECK_THROWS(sample_population(0, 6, 1));

  PoissonPopulation bad = sample_population(3, 2, 1);
  bad.delta = 0.0;
  CHECK_THROWS(bad.validate());
  bad = sample_population(3, 2, 1);
  bad.alpha.resize(2);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
}

TEST_CASE("spike counts") {
  SpikeCounts s{Matrix::Constant(3, 2, 1.0)};
  CHECK_NOTHROW(s.validate());
  const ObservationSeq obs = s.to_observations();
  CHECK(obs.size() == 3);
  CHECK(SpikeCounts::from_observations(obs).y == s.y);
  s.y(1, 1) = -1.0;
  CHECK_THROWS(s.validate());
  ObservationSeq ragged = obs;
  ragged[2] = Vector::Zero(3);
  CHECK_THROWS_AS(SpikeCounts::from_observations(ragged), DimensionError);
}

TEST_CASE("poisson observation density") {
  const PoissonPopulation pop = sample_population(40, 3, 7);
  const PoissonObservation obs(pop);
  std::mt19937_64 gen(8);
  Rng rng(9);

  SUBCASE("log pmf") {
    const Vector x = oracle::random_matrix(3, 1, gen, 0.5);
    const Vector y = obs.sample(x, rng);
    double expect = 0.0;
    for (Index i = 0; i < 40; ++i) {
      const double mu = std::exp(pop.alpha[i] + pop.beta.row(i).dot(x)) * pop.delta;
      expect += y[i] * std::log(mu) - mu - std::lgamma(y[i] + 1.0);
    }
    CHECK(obs.log_density(y, x) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("no spikes at vanishing rate has probability one") {
    PoissonPopulation quiet = pop;
    quiet.alpha.setConstant(-60.0);
    const PoissonObservation q(quiet);
    CHECK(std::abs(q.log_density(Vector::Zero(40), Vector::Zero(3))) < 1e-20);
  }

  SUBCASE("gradient and Hessian against finite differences") {
    for (int k = 0; k < 10; ++k) {
      const Vector x = oracle::random_matrix(3, 1, gen, 0.5);
      const Vector y = obs.sample(oracle::random_matrix(3, 1, gen, 0.5), rng);
      const Vector g = obs.gradient(y, x);
      const Vector fd = oracle::fd_gradient([&](const Vector& v) { return obs.log_density(y, v); }, x);
      CHECK((g - fd).norm() < 1e-6 * g.norm() + 1e-8);
      const Matrix H = *obs.hessian(y, x);
      for (Index j = 0; j < 3; ++j) {
        const Vector col = oracle::fd_gradient([&](const Vector& v) { return obs.gradient(y, v)[j]; }, x);
        CHECK((H.row(j).transpose() - col).norm() < 1e-6 * H.norm());
      }
    }
  }

  SUBCASE("Hessian is negative semi-definite") {
    for (int k = 0; k < 100; ++k) {
      const Vector x = oracle::random_matrix(3, 1, gen, 2.0);
      const Vector u = oracle::random_matrix(3, 1, gen);
      const Vector y = obs.sample(x, rng);
      CHECK(u.dot(*obs.hessian(y, x) * u) <= 0.0);
    }
  }

  SUBCASE("Hessian agrees with the numeric Hessian at the posterior mode") {
    const Vector y = obs.sample(Vector::Constant(3, 0.2), rng);
    const GaussianBelief pred(Vector::Zero(3), 0.04 * Matrix::Identity(3, 3));
    const LogPosterior post(obs, y, pred);
    const LogDensityBundle l = make_bundle(post, true, RichardsonConfig{});
    NewtonConfig nc;
    nc.alpha = 2;
    const LaplaceMode mode = find_mode(l, pred.mean(), 1e5, nc);
    const Matrix analytic = *obs.hessian(y, mode.mode);
    const Matrix numeric = numeric_hessian(l.value, mode.mode, 0.1 * pred.cov().diagonal().cwiseSqrt(),
                                           RichardsonConfig{}) + pred.precision();
    CHECK((numeric - analytic).cwiseAbs().maxCoeff() < 1e-5 * analytic.cwiseAbs().maxCoeff());
  }

  SUBCASE("batch evaluation equals the pointwise density") {
    const Vector y = obs.sample(Vector::Zero(3), rng);
    const Matrix states = oracle::random_matrix(3, 5000, gen, 0.5);
    const Vector batch = obs.log_density_batch(y, states);
    REQUIRE(batch.size() == 5000);
    for (Index j = 0; j < 5000; j += 97) {
      CHECK(batch[j] == doctest::Approx(obs.log_density(y, states.col(j))).epsilon(1e-12));
    }
    CHECK(batch[4999] == doctest::Approx(obs.log_density(y, states.col(4999))).epsilon(1e-12));
  }

  SUBCASE("sampled counts have the Poisson mean") {
    const Vector x = Vector::Constant(3, 0.1);
    Vector sum = Vector::Zero(40);
    const int n = 20000;
    for (int k = 0; k < n; ++k) sum += obs.sample(x, rng);
    for (Index i = 0; i < 40; ++i) {
      const double mu = std::exp(pop.alpha[i] + pop.beta.row(i).dot(x)) * pop.delta;
      CHECK(std::abs(sum[i] / n - mu) < 4.0 * std::sqrt(mu / n));
    }
  }

  SUBCASE("dimension checks") {
    CHECK_THROWS_AS(obs.log_density(Vector::Zero(39), Vector::Zero(3)), DimensionError);
    CHECK_THROWS_AS(obs.log_density(Vector::Zero(40), Vector::Zero(2)), DimensionError);
  }
}

TEST_CASE("poisson GLM fit") {
  const PoissonPopulation pop = sample_population(30, 3, 21);
  const PoissonObservation obs(pop);
  const Trajectory states = gaussian_states(5000, 3, 0.4, 22);
  const SpikeCounts counts = sample_counts(obs, states, 23);
  const GlmFit fit = fit_poisson_glm(counts, states, pop.delta);

  SUBCASE("recovers the simulated coefficients within 3 standard errors") {
    int good = 0;
    for (Index i = 0; i < 30; ++i) {
      bool ok = std::abs(fit.alpha[i] - pop.alpha[i]) < 3.0 * fit.alpha_se[i];
      for (Index k = 0; k < 3; ++k) ok = ok && std::abs(fit.beta(i, k) - pop.beta(i, k)) < 3.0 * fit.beta_se(i, k);
      good += ok;
    }
    CHECK(good >= 27);
    CHECK(fit.iterations.size() == 30);
  }

  SUBCASE("intercept solves its score equation in closed form") {
    for (Index i = 0; i < 30; ++i) {
      const Vector eta = states.states * fit.beta.row(i).transpose();
      const double ybar = counts.y.col(i).mean();
      const double closed = std::log(ybar / (pop.delta * eta.array().exp().mean()));
      CHECK(std::abs(fit.alpha[i] - closed) < 1e-8);
    }
  }

  SUBCASE("scaling the states scales beta inversely") {
    const double s = 2.5;
    const Trajectory scaled{states.states * s, states.dt};
    const GlmFit f2 = fit_poisson_glm(counts, scaled, pop.delta);
    CHECK((f2.beta * s - fit.beta).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((f2.alpha - fit.alpha).cwiseAbs().maxCoeff() < 1e-7);
  }

  SUBCASE("degenerate designs") {
    const Trajectory constant{Matrix::Zero(100, 3), 0.03};
    const SpikeCounts few{counts.y.topRows(100)};
    CHECK_THROWS_AS(fit_poisson_glm(few, constant, pop.delta), DimensionError);
    const Trajectory short_states{states.states.topRows(4), 0.03};
    CHECK_THROWS_AS(fit_poisson_glm(SpikeCounts{counts.y.topRows(4)}, short_states, pop.delta), DimensionError);
    CHECK_THROWS_AS(fit_poisson_glm(few, states, pop.delta), DimensionError);
    SpikeCounts silent{Matrix::Zero(100, 1)};
    CHECK_THROWS_AS(fit_poisson_glm(silent, Trajectory{states.states.topRows(100), 0.03}, pop.delta), ConvergenceError);
  }
}

TEST_CASE("velocity noise estimate") {
  SUBCASE("constant velocity") {
    Matrix s(10, 6);
    for (Index t = 0; t < 10; ++t) s.row(t) << 0.1 * t, 0.2 * t, 0.0, 0.1, 0.2, 0.0;
    CHECK(fit_sigma2(Trajectory{s, 1.0}, 1.0) == 0.0);
  }
  SUBCASE("single innovation") {
    Matrix s = Matrix::Zero(2, 6);
    s.row(1).tail(3) << 1.0, 1.0, 1.0;
    CHECK(fit_sigma2(Trajectory{s, 1.0}, 1.0) == doctest::Approx(1.0));
  }
  SUBCASE("simulated position-velocity data") {
    const double dt = 0.03;
    const LinearGaussianTransition trans = build_pv_transition(0.05, dt);
    const StateSpaceModel model{trans, std::make_shared<FlatObservation>(6), dt};
    const Simulation sim = simulate(model, 10000, Vector::Zero(6), 5);
    CHECK(fit_sigma2(sim.trajectory, dt) == doctest::Approx(0.05).epsilon(0.05));
  }
  SUBCASE("layout errors") {
    CHECK_THROWS_AS(fit_sigma2(Trajectory{Matrix::Zero(5, 4), 1.0}, 1.0), DimensionError);
    CHECK_THROWS_AS(fit_sigma2(Trajectory{Matrix::Zero(1, 6), 1.0}, 1.0), DimensionError);
  }
}

TEST_CASE("position-velocity transition") {
  const double dt = 0.05;
  const LinearGaussianTransition trans = build_pv_transition(0.3, dt);
  Vector x(6);
  x << 1.0, 2.0, 3.0, -1.0, 0.5, 2.0;
  Vector expect(6);
  expect << 1.0 - dt, 2.0 + 0.5 * dt, 3.0 + 2.0 * dt, -1.0, 0.5, 2.0;
  CHECK((trans.F() * x - expect).norm() < 1e-15);
  CHECK(Eigen::FullPivLU<Matrix>(trans.W()).rank() == 3);
  CHECK(trans.W().topLeftCorner(3, 3).isZero());
  CHECK(trans.W().bottomRightCorner(3, 3) == 0.3 * Matrix::Identity(3, 3));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianBelief b(Vector::Zero(6), oracle::random_spd(6, rng, 1e-3));
    b = predict(predict(b, trans), trans);
    CHECK(b.cov().llt().info() == Eigen::Success);
  }
  CHECK_THROWS(build_pv_transition(0.0, dt));
}

TEST_CASE("population vector decoding") {
  SUBCASE("baseline firing decodes to zero") {
    std::mt19937_64 rng(1);
    const PvaParams p{oracle::random_matrix(5, 2, rng).rowwise().normalized(), Vector::Constant(5, 20.0),
                      Vector::Constant(5, 10.0)};
    const SpikeCounts base{Matrix::Constant(3, 5, 20.0 * 0.1)};
    CHECK(pva_decode(base, p, 0.1).states.cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("unit modulation of one neuron returns its direction") {
    Matrix theta(1, 3);
    theta << 0.6, 0.0, 0.8;
    const PvaParams p{theta, Vector::Constant(1, 10.0), Vector::Constant(1, 30.0)};
    const SpikeCounts y{Matrix::Constant(1, 1, 10.0 * 0.1 + 30.0 * 0.1)};
    CHECK((pva_decode(y, p, 0.1).states.row(0) - theta.row(0)).norm() < 1e-12);
  }

  SUBCASE("affine in the counts") {
    std::mt19937_64 rng(3);
    const PoissonPopulation pop = sample_population(20, 3, 3);
    const PvaParams p = pva_params_from_population(pop);
    const Matrix a = oracle::random_matrix(4, 20, rng).cwiseAbs();
    const Matrix b = oracle::random_matrix(4, 20, rng).cwiseAbs();
    const auto dec = [&](const Matrix& y) { return pva_decode(SpikeCounts{y}, p, 0.03).states; };
    const Matrix lhs = dec(2.0 * a + 3.0 * b) - dec(Matrix::Zero(4, 20));
    const Matrix rhs = 2.0 * (dec(a) - dec(Matrix::Zero(4, 20))) + 3.0 * (dec(b) - dec(Matrix::Zero(4, 20)));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("parameters matched to the log-linear population") {
    const PoissonPopulation pop = sample_population(8, 3, 11);
    const PvaParams p = pva_params_from_population(pop);
    for (Index i = 0; i < 8; ++i) {
      CHECK(std::abs(p.theta.row(i).norm() - 1.0) < 1e-12);
      CHECK(p.r[i] == doctest::Approx(std::exp(pop.alpha[i])));
      CHECK(p.Lambda[i] == doctest::Approx(std::exp(pop.alpha[i]) * pop.beta.row(i).norm()));
    }
  }

  SUBCASE("uniform cosine-tuned population points along the true direction") {
    const Index N = 10000;
    std::mt19937_64 gen(17);
    Matrix theta = oracle::random_matrix(N, 3, gen).rowwise().normalized();
    const PvaParams p{theta, Vector::Constant(N, 60.0), Vector::Constant(N, 50.0)};
    Vector x(3);
    x << 0.3, -0.5, 0.7;
    x.normalize();
    const double dt = 0.1;
    Rng rng(18);
    SpikeCounts y{Matrix(1, N)};
    for (Index i = 0; i < N; ++i) {
      std::poisson_distribution<int> pois((60.0 + 50.0 * theta.row(i).dot(x)) * dt);
      y.y(0, i) = pois(rng);
    }
    const Vector est = pva_decode(y, p, dt).states.row(0).transpose();
    const double angle = std::acos(std::clamp(est.normalized().dot(x), -1.0, 1.0)) * 180.0 / std::numbers::pi;
    CHECK(angle < 2.0);
  }

  SUBCASE("errors") {
    const PvaParams p{Matrix::Identity(2, 2), Vector::Ones(2), Vector::Ones(2)};
    CHECK_THROWS_AS(pva_decode(SpikeCounts{Matrix::Zero(1, 3)}, p, 0.1), DimensionError);
    CHECK_THROWS(pva_decode(SpikeCounts{Matrix::Zero(1, 2)}, p, 0.0));
  }
}
