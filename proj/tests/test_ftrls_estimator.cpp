#include <cmath>
#include <random>

#include "aeroarm/ftrls_estimator.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace aeroarm;
using test::StateSampler;

namespace {

Mat8x28 random_regressor(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat8x28 Y;
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 28; ++c) Y(r, c) = n(rng);
  return Y;
}

Vec28 random_params(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec28 h;
  for (int i = 0; i < 28; ++i) h(i) = n(rng);
  return h;
}

}  // namespace

TEST_CASE("the recursion solves the exponentially weighted least squares") {
  FtrlsConfig cfg;
  cfg.gamma_g = 0.0;  // forgetting factor pinned at 1
  const double dt = 1e-3;
  FtrlsEstimator est(cfg, dt);

  std::mt19937_64 rng(7);
  const Vec28 h_star = random_params(rng);

  // Independent oracle: solve the weighted, ridge-regularized normal
  // equations from scratch after every step. Sample k of N carries weight
  // (1 - eta dt)^(N-k); the prior (1/r0) I decays the same way and pulls
  // toward the zero initial estimate.
  std::vector<Mat8x28> Ys;
  std::vector<Vec8> taus;
  for (int k = 0; k < 40; ++k) {
    const Mat8x28 Y = random_regressor(rng);
    const Vec8 tau = Y * h_star;
    est.step(Y, tau);
    Ys.push_back(Y);
    taus.push_back(tau);

    const double lambda = 1.0 - dt;  // eta = 1 throughout
    Mat28 S = std::pow(lambda, k + 1) * (1.0 / cfg.r0) * Mat28::Identity();
    Vec28 b = Vec28::Zero();
    for (int j = 0; j <= k; ++j) {
      const double w = dt * std::pow(lambda, k - j);
      S += w * (Ys[j].transpose() * Ys[j]);
      b += w * (Ys[j].transpose() * taus[j]);
    }
    const Vec28 batch = S.ldlt().solve(b);
    CHECK((est.estimate() - batch).cwiseAbs().maxCoeff() < 1e-9);
  }
  // The decaying prior keeps a small bias after 40 rows; it shrinks as data
  // accumulates but the estimate is already in the right neighborhood.
  CHECK((est.estimate() - h_star).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("forgetting factor follows the quantized residual schedule") {
  FtrlsConfig cfg;  // eta_min 0.8, gamma_g 5
  FtrlsEstimator est(cfg, 1e-3);
  est.initialize(Vec28::Zero());

  Mat8x28 Y = Mat8x28::Zero();
  Y(0, 0) = 1.0;

  // |residual|^2 = 0.01 -> round(0.05) = 0 -> eta = 1.
  Vec8 tau = Vec8::Zero();
  tau(0) = 0.1;
  CHECK(est.step(Y, tau).forgetting == doctest::Approx(1.0));

  // |residual|^2 ~ 0.14 -> round(0.7) = 1 -> eta = 0.9.
  est.initialize(Vec28::Zero());
  tau(0) = std::sqrt(0.14);
  CHECK(est.step(Y, tau).forgetting == doctest::Approx(0.9).epsilon(1e-12));

  // Large residual -> eta floors at eta_min.
  est.initialize(Vec28::Zero());
  tau(0) = 100.0;
  CHECK(est.step(Y, tau).forgetting == doctest::Approx(0.8));
}

TEST_CASE("one forgetting step updates the information matrix as documented") {
  FtrlsConfig cfg;
  const double dt = 1e-3;
  FtrlsEstimator est(cfg, dt);
  est.initialize(Vec28::Ones());

  std::mt19937_64 rng(9);
  const Mat8x28 Y = random_regressor(rng);
  Vec8 tau = Y * Vec28::Ones();
  tau(0) += 50.0;  // force eta = eta_min

  const Mat28 Rinv_before = est.information();
  const auto info = est.step(Y, tau);
  CHECK(info.forgetting == doctest::Approx(0.8));
  const Mat28 expected =
      (1.0 - 0.8 * dt) * Rinv_before + dt * (Y.transpose() * Y);
  CHECK((est.information() - expected).cwiseAbs().maxCoeff() < 1e-12);

  const Vec28 dh = dt * expected.ldlt().solve(Y.transpose() * info.residual);
  CHECK((est.estimate() - (Vec28::Ones() + dh)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a null regressor leaves the estimate and decays the information") {
  FtrlsConfig cfg;
  const double dt = 1e-3;
  FtrlsEstimator est(cfg, dt);
  std::mt19937_64 rng(11);
  const Vec28 h0 = random_params(rng);
  est.initialize(h0);

  const Mat28 before = est.information();
  const auto info = est.step(Mat8x28::Zero(), Vec8::Zero());
  CHECK(info.forgetting == doctest::Approx(1.0));  // zero residual
  CHECK((est.estimate() - h0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((est.information() - (1.0 - dt) * before).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("adaptive forgetting reconverges faster after a parameter jump") {
  // Baseline: the same recursion with the forgetting rate pinned at the
  // floor. During quiet stretches the adaptive law runs at eta = 1, keeping
  // the information matrix leaner and the gain hotter, so it needs fewer
  // samples to re-identify an abrupt change.
  const double dt = 1e-3;
  const double jump_scale = -2.0;

  auto samples_to_reconverge = [&](bool adaptive) {
    FtrlsConfig cfg;
    FtrlsEstimator est(cfg, dt);

    Mat28 Rinv_fixed = (1.0 / cfg.r0) * Mat28::Identity();
    Vec28 h_fixed = Vec28::Zero();
    auto fixed_step = [&](const Mat8x28& Y, const Vec8& tau) {
      Rinv_fixed =
          (1.0 - dt * cfg.eta_min) * Rinv_fixed + dt * (Y.transpose() * Y);
      h_fixed += dt * Rinv_fixed.ldlt().solve(
                          Y.transpose() * (tau - Y * h_fixed));
    };
    auto estimate = [&]() { return adaptive ? est.estimate() : h_fixed; };
    auto run_step = [&](const Mat8x28& Y, const Vec8& tau) {
      if (adaptive)
        est.step(Y, tau);
      else
        fixed_step(Y, tau);
    };

    std::mt19937_64 rng(21);
    Vec28 h_star = random_params(rng);
    for (int k = 0; k < 3000; ++k) {
      const Mat8x28 Y = random_regressor(rng);
      run_step(Y, Y * h_star);
    }
    h_star *= jump_scale;  // abrupt change
    const double target = 0.05 * h_star.norm();
    for (int k = 0; k < 20000; ++k) {
      const Mat8x28 Y = random_regressor(rng);
      run_step(Y, Y * h_star);
      if ((estimate() - h_star).norm() < target) return k + 1;
    }
    return 20000;
  };

  // Same data stream (seeded identically); only the forgetting law differs.
  const int adaptive_samples = samples_to_reconverge(true);
  const int fixed_samples = samples_to_reconverge(false);
  CHECK(adaptive_samples < fixed_samples);
}

TEST_CASE("estimation-error energy decreases on noise-free data") {
  FtrlsConfig cfg;
  FtrlsEstimator est(cfg, 1e-3);
  std::mt19937_64 rng(17);
  const Vec28 h_star = random_params(rng);

  double v_prev = (h_star - est.estimate())
                      .dot(est.information() * (h_star - est.estimate()));
  for (int k = 0; k < 2000; ++k) {
    const Mat8x28 Y = random_regressor(rng);
    est.step(Y, Y * h_star);
    const Vec28 err = h_star - est.estimate();
    const double v = err.dot(est.information() * err);
    // Forward Euler admits O(dt^2) per-step slack around the continuous-time
    // decrease; the trend ceiling catches any systematic growth.
    CHECK(v <= v_prev * (1.0 + 1e-3) + 1e-12);
    v_prev = v;
  }
  const Vec28 err0 = h_star;  // initial estimate is zero
  const double v0 = err0.dot((1.0 / cfg.r0) * err0);
  CHECK(v_prev < 1e-3 * v0);
}

TEST_CASE("information matrix resets on condition blowup and keeps the estimate") {
  FtrlsConfig cfg;
  cfg.cond_check_period = 10;
  cfg.cond_max = 1e6;
  FtrlsEstimator est(cfg, 1e-3);

  // Persistently exciting in one direction only: information accumulates
  // there while every other direction decays, so the condition number climbs
  // until the reset trips. The inconsistent target keeps the residual (and
  // thus forgetting) saturated.
  Mat8x28 Y = Mat8x28::Zero();
  for (int r = 0; r < 8; ++r) Y(r, 0) = 10.0;
  Vec8 tau;
  bool saw_reset = false;
  for (int k = 0; k < 6000; ++k) {
    tau = Vec8::Constant(k % 2 ? 40.0 : -40.0);
    const auto info = est.step(Y, tau);
    saw_reset = saw_reset || info.reset;
    CHECK(est.estimate().allFinite());
  }
  CHECK(saw_reset);
  CHECK(est.reset_count() > 0);

  // Information matrix is fresh after a reset: well conditioned again.
  const Eigen::SelfAdjointEigenSolver<Mat28> es(est.information(),
                                                Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("contact force reconstruction reads the contact block") {
  FtrlsConfig cfg;
  FtrlsEstimator est(cfg, 1e-3);
  Vec28 h = Vec28::Zero();
  for (int i = 0; i < 6; ++i) {
    h(12 + i) = 0.1 * (i + 1);   // stiffness
    h(18 + i) = 0.01 * (i + 1);  // damping
  }
  est.initialize(h);
  Vec6 chi, dchi;
  chi << 1, 2, 3, 4, 5, 6;
  dchi << -1, 1, -1, 1, -1, 1;
  const Vec6 F = est.contact_force(chi, dchi);
  for (int i = 0; i < 6; ++i)
    CHECK(F(i) == doctest::Approx(0.1 * (i + 1) * chi(i) +
                                  0.01 * (i + 1) * dchi(i)));
}

TEST_CASE("stacked regressor and true parameters reproduce the applied force") {
  const DynamicsModel model{RobotParams{}};
  ContactParams contact;
  WindParams wind;
  const Vec28 h_true = stacked_true_params(model, contact, wind);

  StateSampler s(55);
  for (int trial = 0; trial < 6; ++trial) {
    const Vec8 q = s.position();
    const Vec8 qd = s.velocity();
    const Vec8 qdd = s.velocity(3.0);
    const Mat6x8 J = task_jacobian(q, model.params());
    const Vec6 chi = forward_kinematics(q, model.params()).vec();
    const Vec6 dchi = task_rates(q, qd, model.params());

    const DynamicsTerms t = model.dynamics_terms(q, qd);
    const Vec8 tau = t.M * qdd + t.C * qd + t.G +
                     wind_generalized(wind_coefficients(wind), q(kZ), q(kTheta),
                                      q(kPhi)) +
                     contact_generalized(J, contact_force(contact, chi, dchi));

    const Mat8x28 Y = build_regressor(model, q, qd, qdd, J, chi, dchi);
    CHECK((Y * h_true - tau).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("estimator seeded at the truth stays at the truth") {
  const DynamicsModel model{RobotParams{}};
  ContactParams contact;
  WindParams wind;
  const Vec28 h_true = stacked_true_params(model, contact, wind);

  FtrlsConfig cfg;
  FtrlsEstimator est(cfg, 1e-3);
  est.initialize(h_true);

  StateSampler s(56);
  for (int k = 0; k < 300; ++k) {
    const Vec8 q = s.position_narrow();
    const Vec8 qd = s.velocity();
    const Vec8 qdd = s.velocity(3.0);
    const Mat6x8 J = task_jacobian(q, model.params());
    const Vec6 chi = forward_kinematics(q, model.params()).vec();
    const Vec6 dchi = task_rates(q, qd, model.params());
    const Mat8x28 Y = build_regressor(model, q, qd, qdd, J, chi, dchi);
    const auto info = est.step(Y, Y * h_true);
    CHECK(info.residual.cwiseAbs().maxCoeff() < 1e-7);
  }
  CHECK((est.estimate() - h_true).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("identical input streams give bitwise identical estimates") {
  FtrlsConfig cfg;
  FtrlsEstimator a(cfg, 1e-3), b(cfg, 1e-3);
  std::mt19937_64 rng_a(33), rng_b(33);
  for (int k = 0; k < 100; ++k) {
    const Mat8x28 Ya = random_regressor(rng_a);
    const Mat8x28 Yb = random_regressor(rng_b);
    const Vec28 ha = random_params(rng_a);
    const Vec28 hb = random_params(rng_b);
    a.step(Ya, Ya * ha);
    b.step(Yb, Yb * hb);
  }
  CHECK((a.estimate() - b.estimate()).cwiseAbs().maxCoeff() == 0.0);
}
