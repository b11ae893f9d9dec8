#include <cmath>
#include <limits>

#include "doctest.h"
#include "lgf/model.hpp"
#include "oracles.hpp"

using namespace lgf;

namespace {

StateSpaceModel ar_model(Index d, double f, double w, std::shared_ptr<const ObservationModel> obs) {
  const Matrix I = Matrix::Identity(d, d);
  return {LinearGaussianTransition(f * I, w * I), std::move(obs), 1.0};
}

}  // namespace

TEST_CASE("gaussian belief validates its covariance") {
  Matrix V(2, 2);
  V << 2.0, 0.5, 0.5, 1.0;
  const GaussianBelief b(Vector::Zero(2), V);
  CHECK(b.dim() == 2);
  CHECK((b.chol() * b.chol().transpose() - V).norm() < 1e-14);
  CHECK(b.log_normalizer() == doctest::Approx(2.0 * std::log(2.0 * M_PI) + std::log(V.determinant())));
  CHECK((b.precision() * V - Matrix::Identity(2, 2)).norm() < 1e-13);

  Matrix asym = V;
  asym(0, 1) += 1e-6;
  CHECK_THROWS_AS(GaussianBelief(Vector::Zero(2), asym), Error);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianBelief(Vector::Zero(2), indefinite), NotPositiveDefinite);
  CHECK_THROWS_AS(GaussianBelief(Vector::Zero(3), V), DimensionError);
  Vector bad = Vector::Zero(2);
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(GaussianBelief(bad, V), Error);
}

TEST_CASE("gaussian log density matches the closed form") {
  std::mt19937_64 rng(7);
  const Matrix V = oracle::random_spd(3, rng);
  const Vector m = oracle::random_matrix(3, 1, rng);
  const GaussianBelief b(m, V);
  const Vector x = oracle::random_matrix(3, 1, rng);
  const double expect = -0.5 * (3 * std::log(2 * M_PI) + std::log(V.determinant()) +
                                (x - m).dot(V.inverse() * (x - m)));
  CHECK(b.log_density(x) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("transition accepts singular noise and rejects bad input") {
  Matrix W = Matrix::Zero(2, 2);
  W(1, 1) = 0.5;
  const LinearGaussianTransition t(Matrix::Identity(2, 2), W);
  const Matrix S = t.noise_factor();
  CHECK((S * S.transpose() - W).norm() < 1e-14);

  Matrix negative = W;
  negative(0, 0) = -0.1;
  CHECK_THROWS_AS(LinearGaussianTransition(Matrix::Identity(2, 2), negative), Error);
  CHECK_THROWS_AS(LinearGaussianTransition(Matrix::Identity(2, 3), W), DimensionError);
  CHECK_THROWS_AS(LinearGaussianTransition(Matrix::Identity(3, 3), W), DimensionError);
}

TEST_CASE("predict") {
  SUBCASE("identity transition with zero noise is the identity map") {
    std::mt19937_64 rng(1);
    const Matrix V = oracle::random_spd(4, rng);
    const Vector m = oracle::random_matrix(4, 1, rng);
    const GaussianBelief out =
        predict(GaussianBelief(m, V), LinearGaussianTransition(Matrix::Identity(4, 4), Matrix::Zero(4, 4)));
    CHECK(out.mean() == m);
    CHECK((out.cov() - V).norm() < 1e-15);
  }

  SUBCASE("scaled AR transition") {
    const Matrix I = Matrix::Identity(6, 6);
    const GaussianBelief out =
        predict(GaussianBelief(Vector::Ones(6), I), LinearGaussianTransition(0.94 * I, 0.019 * I));
    CHECK((out.mean() - 0.94 * Vector::Ones(6)).norm() < 1e-15);
    CHECK((out.cov() - 0.9026 * I).norm() < 1e-14);
  }

  SUBCASE("matches Monte Carlo propagation") {
    std::mt19937_64 rng(11);
    const Index d = 3;
    const Matrix V = oracle::random_spd(d, rng);
    const Matrix F = oracle::random_matrix(d, d, rng, 0.5);
    const Matrix W = oracle::random_spd(d, rng, 0.2);
    const Vector m = oracle::random_matrix(d, 1, rng);
    const LinearGaussianTransition trans(F, W);
    const GaussianBelief out = predict(GaussianBelief(m, V), trans);

    const int n = 200000;
    const Matrix Lv = V.llt().matrixL();
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix xs(d, n);
    for (int k = 0; k < n; ++k) {
      Vector a(d), b(d);
      for (Index i = 0; i < d; ++i) a[i] = z(rng);
      for (Index i = 0; i < d; ++i) b[i] = z(rng);
      xs.col(k) = F * (m + Lv * a) + trans.noise_factor() * b;
    }
    const Vector mean = xs.rowwise().mean();
    const Matrix centered = xs.colwise() - mean;
    const Matrix cov = centered * centered.transpose() / (n - 1.0);
    const Matrix& P = out.cov();
    for (Index i = 0; i < d; ++i) {
      CHECK(std::abs(mean[i] - out.mean()[i]) < 4.0 * std::sqrt(P(i, i) / n));
      for (Index j = 0; j < d; ++j) {
        const double se = std::sqrt((P(i, i) * P(j, j) + P(i, j) * P(i, j)) / n);
        CHECK(std::abs(cov(i, j) - P(i, j)) < 4.0 * se);
      }
    }
  }

  SUBCASE("output stays symmetric positive definite") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const Index d = 1 + trial % 6;
      const GaussianBelief b(Vector::Zero(d), oracle::random_spd(d, rng, 1e-3));
      const LinearGaussianTransition t(oracle::random_matrix(d, d, rng), oracle::random_spd(d, rng, 1e-3));
      const GaussianBelief out = predict(b, t);
      CHECK((out.cov() - out.cov().transpose()).norm() == 0.0);
      CHECK(out.cov().llt().info() == Eigen::Success);
    }
  }

  SUBCASE("dimension mismatch") {
    const GaussianBelief b(Vector::Zero(2), Matrix::Identity(2, 2));
    CHECK_THROWS_AS(predict(b, LinearGaussianTransition(Matrix::Identity(3, 3), Matrix::Identity(3, 3))),
                    DimensionError);
  }

  SUBCASE("degenerate result is reported") {
    const GaussianBelief b(Vector::Zero(2), Matrix::Identity(2, 2));
    CHECK_THROWS_AS(predict(b, LinearGaussianTransition(Matrix::Zero(2, 2), Matrix::Zero(2, 2))),
                    NotPositiveDefinite);
  }
}

TEST_CASE("simulate") {
  SUBCASE("zero noise and identity transition keep the state constant") {
    Vector x0(2);
    x0 << 0.3, -1.2;
    const StateSpaceModel model{LinearGaussianTransition(Matrix::Identity(2, 2), Matrix::Zero(2, 2)),
                                std::make_shared<FlatObservation>(2), 1.0};
    const Simulation sim = simulate(model, 25, x0, 5);
    CHECK(sim.trajectory.steps() == 25);
    CHECK(sim.observations.size() == 25);
    for (Index t = 0; t < 25; ++t) CHECK(sim.trajectory.states.row(t).transpose() == x0);
  }

  SUBCASE("same seed gives identical output, different seed does not") {
    const auto obs = std::make_shared<LinearGaussianObservation>(Matrix::Identity(2, 2), 0.1 * Matrix::Identity(2, 2));
    const StateSpaceModel model = ar_model(2, 0.9, 0.05, obs);
    const Simulation a = simulate(model, 40, Vector::Zero(2), 99);
    const Simulation b = simulate(model, 40, Vector::Zero(2), 99);
    const Simulation c = simulate(model, 40, Vector::Zero(2), 100);
    CHECK(a.trajectory.states == b.trajectory.states);
    for (std::size_t t = 0; t < a.observations.size(); ++t) CHECK(a.observations[t] == b.observations[t]);
    CHECK(a.trajectory.states != c.trajectory.states);
  }

  SUBCASE("AR(1) marginal variance approaches W / (1 - F^2)") {
    const StateSpaceModel model = ar_model(1, 0.94, 0.019, std::make_shared<FlatObservation>(1));
    const double target = 0.019 / (1.0 - 0.94 * 0.94);
    double sum_sq = 0.0;
    Index count = 0;
    std::normal_distribution<double> z(0.0, std::sqrt(target));
    std::mt19937_64 rng(2024);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Vector x0(1);
      x0[0] = z(rng);
      const Simulation sim = simulate(model, 10000, x0, seed);
      sum_sq += sim.trajectory.states.squaredNorm();
      count += sim.trajectory.steps();
    }
    CHECK(sum_sq / static_cast<double>(count) == doctest::Approx(target).epsilon(0.05));
  }

  SUBCASE("bad arguments") {
    const StateSpaceModel model = ar_model(2, 0.9, 0.05, std::make_shared<FlatObservation>(2));
    CHECK_THROWS_AS(simulate(model, 10, Vector::Zero(3), 1), DimensionError);
    CHECK_THROWS(simulate(model, 0, Vector::Zero(2), 1));
  }
}

TEST_CASE("linear gaussian observation") {
  std::mt19937_64 rng(17);
  const Matrix H = oracle::random_matrix(3, 2, rng);
  const Matrix R = oracle::random_spd(3, rng);
  const LinearGaussianObservation obs(H, R);
  const Vector x = oracle::random_matrix(2, 1, rng);
  const Vector y = oracle::random_matrix(3, 1, rng);
  const GaussianBelief ref(H * x, R);
  CHECK(obs.log_density(y, x) == doctest::Approx(ref.log_density(y)).epsilon(1e-12));
  const Vector g = obs.gradient(y, x);
  const Vector g_fd = oracle::fd_gradient([&](const Vector& v) { return obs.log_density(y, v); }, x);
  CHECK((g - g_fd).norm() < 1e-6);
  CHECK((*obs.hessian(y, x) + H.transpose() * R.inverse() * H).norm() < 1e-12);

  Matrix states(2, 5);
  for (Index k = 0; k < 5; ++k) states.col(k) = oracle::random_matrix(2, 1, rng);
  const Vector batch = obs.log_density_batch(y, states);
  for (Index k = 0; k < 5; ++k) CHECK(batch[k] == doctest::Approx(obs.log_density(y, states.col(k))).epsilon(1e-12));
}

TEST_CASE("log posterior") {
  std::mt19937_64 rng(23);
  const Index d = 3;
  const Matrix H = oracle::random_matrix(2, d, rng);
  const Matrix R = oracle::random_spd(2, rng);
  const LinearGaussianObservation obs(H, R);
  const GaussianBelief pred(oracle::random_matrix(d, 1, rng), oracle::random_spd(d, rng));
  const Vector y = oracle::random_matrix(2, 1, rng);
  const LogPosterior post(obs, y, pred);

  SUBCASE("value is the sum of both log densities") {
    const Vector x = oracle::random_matrix(d, 1, rng);
    CHECK(post.value(x) == doctest::Approx(obs.log_density(y, x) + pred.log_density(x)).epsilon(1e-12));
  }

  SUBCASE("gradient vanishes at the conjugate posterior mode") {
    const Matrix P = pred.precision() + H.transpose() * R.inverse() * H;
    const Vector mode = P.ldlt().solve(pred.precision() * pred.mean() + H.transpose() * R.inverse() * y);
    CHECK(post.gradient(mode).norm() < 1e-10);
  }

  SUBCASE("gradient agrees with finite differences") {
    for (int k = 0; k < 10; ++k) {
      const Vector x = oracle::random_matrix(d, 1, rng);
      const Vector fd = oracle::fd_gradient([&](const Vector& v) { return post.value(v); }, x);
      CHECK((post.gradient(x) - fd).norm() < 1e-6 * (1.0 + fd.norm()));
    }
  }

  SUBCASE("strictly concave along random directions") {
    for (int k = 0; k < 100; ++k) {
      const Vector x = oracle::random_matrix(d, 1, rng);
      const Vector u = oracle::random_matrix(d, 1, rng);
      CHECK(u.dot(*post.hessian(x) * u) < 0.0);
    }
  }

  SUBCASE("no Hessian without an analytic observation Hessian") {
    struct NoHessian final : ObservationModel {
      Index obs_dim() const override { return 1; }
      Index state_dim() const override { return 3; }
      double log_density(const Vector&, const Vector& x) const override { return -x.squaredNorm(); }
      Vector gradient(const Vector&, const Vector& x) const override { return -2.0 * x; }
      Vector sample(const Vector&, Rng&) const override { return Vector::Zero(1); }
    } plain;
    const LogPosterior p2(plain, Vector::Zero(1), pred);
    CHECK_FALSE(p2.hessian(Vector::Zero(d)).has_value());
  }

  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(LogPosterior(obs, Vector::Zero(5), pred), DimensionError);
  }
}

TEST_CASE("trajectory validation") {
  Trajectory t{Matrix::Zero(4, 2), 0.1};
  CHECK_NOTHROW(t.validate());
  t.dt = 0.0;
  CHECK_THROWS(t.validate());
  t = Trajectory{Matrix::Zero(0, 2), 0.1};
  CHECK_THROWS(t.validate());
}

TEST_CASE("log posterior with a flat observation is the prior") {
  std::mt19937_64 rng(29);
  const GaussianBelief pred(oracle::random_matrix(4, 1, rng), oracle::random_spd(4, rng));
  const FlatObservation flat(4);
  const LogPosterior post(flat, Vector(), pred);
  CHECK(post.value(pred.mean()) == doctest::Approx(-0.5 * pred.log_normalizer()).epsilon(1e-14));
  CHECK(post.gradient(pred.mean()).norm() == 0.0);
  CHECK((*post.hessian(pred.mean()) + pred.precision()).norm() < 1e-14);
}
