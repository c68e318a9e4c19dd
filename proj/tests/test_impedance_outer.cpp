#include "aeroarm/impedance_outer.hpp"

#include <cmath>

#include "aeroarm/dynamics.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace aeroarm;

namespace {

// One RK4 step of the actuated plant under a zero-order-hold input.
void rk4_actuated(const DynamicsModel& model, Vec8& q, Vec8& qd, const Vec6& u,
                  double h) {
  const Vec8 zero = Vec8::Zero();
  const auto accel = [&](const Vec8& qk, const Vec8& qdk) {
    return model.forward_dynamics(qk, qdk, u, zero, zero);
  };
  const Vec8 k1q = qd, k1v = accel(q, qd);
  const Vec8 k2q = qd + 0.5 * h * k1v, k2v = accel(q + 0.5 * h * k1q, k2q);
  const Vec8 k3q = qd + 0.5 * h * k2v, k3v = accel(q + 0.5 * h * k2q, k3q);
  const Vec8 k4q = qd + h * k3v, k4v = accel(q + h * k3q, k4q);
  q += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  qd += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
}

// Gravity-compensating trim at a level, at-rest configuration.
Vec8 hover_trim(const DynamicsModel& model, const Vec8& q0) {
  return model.gravity(q0);
}

}  // namespace

TEST_CASE("impedance error poles match the per-axis quadratics") {
  const ImpedanceConfig config;
  const auto poles = impedance_error_poles(config);

  for (int i = 0; i < 12; ++i) CHECK(poles(i).real() < 0.0);

  // Every axis contributes the two roots of s^2 + d s + k.
  for (int axis = 0; axis < 6; ++axis) {
    const double d = config.damping(axis);
    const double k = config.stiffness(axis);
    const std::complex<double> disc =
        std::sqrt(std::complex<double>(d * d - 4.0 * k, 0.0));
    for (const auto root : {(-d + disc) / 2.0, (-d - disc) / 2.0}) {
      double best = 1e100;
      for (int i = 0; i < 12; ++i) best = std::min(best, std::abs(poles(i) - root));
      CHECK(best < 1e-9);
    }
  }

  // Slowest mode overall belongs to the heavily damped yaw axis
  // (s^2 + 100 s + 50); the slowest lateral mode is s^2 + 15 s + 20.
  double slowest = -1e100;
  for (int i = 0; i < 12; ++i) slowest = std::max(slowest, poles(i).real());
  CHECK(slowest == doctest::Approx((-100.0 + std::sqrt(9800.0)) / 2.0).epsilon(1e-12));
  CHECK(slowest == doctest::Approx(-0.5025253169).epsilon(1e-9));
}

TEST_CASE("impedance configs with non-decaying modes are rejected") {
  ImpedanceConfig bad;
  bad.stiffness(2) = -5.0;  // pushes one pole into the right half plane
  CHECK_THROWS_AS(require_stable_impedance(bad), UnstableImpedanceConfig);
  CHECK_THROWS_AS(bad.validate(), ConfigError);  // positivity screen fires first

  ImpedanceConfig nonpositive;
  nonpositive.damping(4) = 0.0;
  CHECK_THROWS_AS(nonpositive.validate(), ConfigError);

  ImpedanceConfig tilt;
  tilt.tilt_limit = 2.0;
  CHECK_THROWS_AS(tilt.validate(), ConfigError);

  const ImpedanceConfig good;
  CHECK_NOTHROW(good.validate());
}

TEST_CASE("impedance acceleration follows the target error dynamics") {
  const ImpedanceConfig config;
  TaskRef ref;
  ref.chi << 0.4, -0.2, 1.1, 0.3, 0.1, -0.2;
  ref.dchi << 0.1, 0.0, -0.05, 0.2, 0.0, 0.1;
  ref.ddchi << 0.5, -0.1, 0.0, 0.0, 0.3, 0.0;

  // Perfect tracking and no contact: pure feedforward.
  CHECK((impedance_accel(config, ref, ref.chi, ref.dchi, Vec6::Zero()) - ref.ddchi)
            .norm() == doctest::Approx(0.0));

  // Component-wise law with error and estimated force.
  Vec6 chi = ref.chi, dchi = ref.dchi, Fe = Vec6::Zero();
  chi(0) -= 0.02;
  dchi(3) += 0.1;
  Fe(2) = 0.25;
  const Vec6 a = impedance_accel(config, ref, chi, dchi, Fe);
  CHECK(a(0) == doctest::Approx(ref.ddchi(0) + 20.0 * 0.02).epsilon(1e-12));
  CHECK(a(3) == doctest::Approx(ref.ddchi(3) - 50.0 * 0.0 - 100.0 * 0.1).epsilon(1e-12));
  CHECK(a(2) == doctest::Approx(ref.ddchi(2) - 0.25).epsilon(1e-12));
}

TEST_CASE("task system solve is exact away from singularity and damped near it") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  Mat6 J;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) J(r, c) = unif(rng);
  J += 3.0 * Mat6::Identity();  // comfortably well conditioned
  Vec6 rhs;
  for (int i = 0; i < 6; ++i) rhs(i) = unif(rng);

  bool dls = true;
  const Vec6 x = solve_task_system(J, rhs, 1e-3, 1e-2, &dls);
  CHECK_FALSE(dls);
  CHECK((J * x - rhs).norm() < 1e-10);

  // Rebuild J with one singular value collapsed below the threshold; the
  // solution must match the explicit damped normal equations.
  Eigen::JacobiSVD<Mat6> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec6 s = svd.singularValues();
  s(5) = 1e-5;
  const Mat6 Jsing =
      svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  const double lambda = 1e-2;
  const Vec6 xd = solve_task_system(Jsing, rhs, 1e-3, lambda, &dls);
  CHECK(dls);
  const Mat6 normal = Jsing.transpose() * Jsing + lambda * lambda * Mat6::Identity();
  const Vec6 x_ref = normal.ldlt().solve(Jsing.transpose() * rhs);
  CHECK((xd - x_ref).norm() < 1e-10);
}

TEST_CASE("tilt setpoints realize the commanded lateral force direction") {
  const ImpedanceConfig config;

  // Yaw zero: +x force pitches forward, +y force rolls negative.
  auto sp = attitude_setpoint(Vec3(1.0, 0.0, 10.0), 0.0, Vec2::Zero(), config);
  CHECK_FALSE(sp.guarded);
  CHECK(sp.angles(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(sp.angles(1) == doctest::Approx(0.0).scale(1.0));
  sp = attitude_setpoint(Vec3(0.0, 1.0, 10.0), 0.0, Vec2::Zero(), config);
  CHECK(sp.angles(0) == doctest::Approx(0.0).scale(1.0));
  CHECK(sp.angles(1) == doctest::Approx(-0.1).epsilon(1e-12));

  // Generic yaw: the thrust direction produced by the returned tilt matches
  // the commanded lateral-to-vertical force ratios to second order.
  const Vec3 tau(1.0, 0.5, 12.0);
  const double psi = 0.7;
  sp = attitude_setpoint(tau, psi, Vec2::Zero(), config);
  const Mat3 R = rotation_from_euler({psi, sp.angles(0), sp.angles(1)});
  const Vec3 dir = R.col(2);
  CHECK(dir(0) / dir(2) == doctest::Approx(tau(0) / tau(2)).epsilon(2e-3));
  CHECK(dir(1) / dir(2) == doctest::Approx(tau(1) / tau(2)).epsilon(2e-3));

  // Vanishing vertical command: hold the previous setpoint and flag it.
  const Vec2 prev(0.07, -0.04);
  sp = attitude_setpoint(Vec3(1.0, 1.0, 0.5), 0.0, prev, config);
  CHECK(sp.guarded);
  CHECK((sp.angles - prev).norm() == doctest::Approx(0.0));

  // Oversized commands clamp to the tilt limit.
  sp = attitude_setpoint(Vec3(20.0, 0.0, 10.0), 0.0, Vec2::Zero(), config);
  CHECK(sp.angles(0) == doctest::Approx(config.tilt_limit));
}

TEST_CASE("allocation inverts the force map and saturates at the limits") {
  const RobotParams params;
  Vec8 q = Vec8::Zero();
  q(kZ) = 1.0;
  q(kTheta) = 0.1;
  q(kPhi) = -0.15;
  q(kJoint1) = 0.3;
  const ControlMatrices cm = control_matrices(q, params);

  Vec6 tau;
  tau << 11.0, 0.02, 0.05, -0.03, 0.1, -0.05;
  const ActuatorInput in = allocate(cm.B6, tau);
  CHECK_FALSE(in.saturated());
  CHECK((cm.B6 * in.u - tau).norm() < 1e-10);
  for (int i = 0; i < 4; ++i) CHECK(in.u(i) > 0.0);

  Vec6 huge = tau;
  huge(0) = 80.0;  // beyond 4 * kMaxRotorThrust
  const ActuatorInput sat = allocate(cm.B6, huge);
  CHECK(sat.thrust_saturated);
  for (int i = 0; i < 4; ++i) CHECK(sat.u(i) <= kMaxRotorThrust + 1e-12);

  Vec6 neg = tau;
  neg(0) = -5.0;
  const ActuatorInput down = allocate(cm.B6, neg);
  CHECK(down.thrust_saturated);
  for (int i = 0; i < 4; ++i) CHECK(down.u(i) >= 0.0);

  Vec6 joint = tau;
  joint(4) = 3.0;
  joint(5) = -3.0;
  const ActuatorInput jt = allocate(cm.B6, joint);
  CHECK(jt.joint_saturated);
  CHECK(jt.u(4) == doctest::Approx(kMaxJointTorque[0]));
  CHECK(jt.u(5) == doctest::Approx(-kMaxJointTorque[1]));

  Mat6 singular = cm.B6;
  singular.row(1).setZero();
  CHECK_THROWS_AS((void)allocate(singular, tau), AllocationSingular);
}

TEST_CASE("controller holds a hover trim as an exact fixed point") {
  const RobotParams params;
  const DynamicsModel model(params);
  const double dt = 1e-3;
  OuterLoopController ctrl{cascade_impedance_config(), cascade_dob_config(), params, dt};

  Vec8 q0 = Vec8::Zero();
  q0(kX) = 0.5;
  q0(kZ) = 1.185;
  const Vec8 tau0 = hover_trim(model, q0);
  CHECK(tau0(kZ) == doctest::Approx(params.total_mass() * kGravity).epsilon(1e-12));
  CHECK(tau0.head<2>().norm() == doctest::Approx(0.0));

  TaskRef ref;
  ref.chi = forward_kinematics(q0, params).vec();
  ctrl.initialize_trims(Vec8::Zero(), tau0, Vec2::Zero());

  Vec8 q = q0, qd = Vec8::Zero();
  for (int k = 0; k < 200; ++k) {
    const ControlCommand cmd = ctrl.step(ref, q, qd, qd, Vec6::Zero());
    CHECK_FALSE(cmd.input.saturated());
    CHECK_FALSE(cmd.dls_active);
    for (int s = 0; s < 4; ++s) rk4_actuated(model, q, qd, cmd.input.u, dt / 4.0);
  }
  CHECK((q - q0).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(qd.lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("contact compliance backs the vertical command away from the force") {
  const RobotParams params;
  const DynamicsModel model(params);
  OuterLoopController ctrl{cascade_impedance_config(), cascade_dob_config(), params, 1e-3};

  Vec8 q0 = Vec8::Zero();
  q0(kZ) = 1.185;
  TaskRef ref;
  ref.chi = forward_kinematics(q0, params).vec();
  ctrl.initialize_trims(Vec8::Zero(), hover_trim(model, q0), Vec2::Zero());

  Vec6 Fe = Vec6::Zero();
  Fe(2) = 0.1;  // upward measured contact force
  const ControlCommand cmd = ctrl.step(ref, q0, Vec8::Zero(), Vec8::Zero(), Fe);
  CHECK(cmd.accel_des(kZ) == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("saturated ticks feed back the realized wrench on every channel") {
  const RobotParams params;
  const DynamicsModel model(params);
  OuterLoopController ctrl{cascade_impedance_config(), cascade_dob_config(), params, 1e-3};

  Vec8 q0 = Vec8::Zero();
  q0(kZ) = 1.185;
  TaskRef ref;
  ref.chi = forward_kinematics(q0, params).vec();
  ref.chi(2) += 10.0;  // absurd climb demand to force thrust saturation
  ctrl.initialize_trims(Vec8::Zero(), hover_trim(model, q0), Vec2::Zero());

  const ControlCommand cmd = ctrl.step(ref, q0, Vec8::Zero(), Vec8::Zero(), Vec6::Zero());
  CHECK(cmd.input.thrust_saturated);
  const ControlMatrices cm = control_matrices(q0, params);
  const Vec8 realized = cm.B * cmd.input.u;
  CHECK((cmd.tau_next - realized).norm() == doctest::Approx(0.0));
  CHECK(cmd.tau_next(kZ) < cmd.tau_cmd(kZ));
  // At level attitude the thrusts have no lateral component, so the realized
  // lateral force is zero no matter what was commanded.
  CHECK(cmd.tau_next(kX) == doctest::Approx(0.0));
  CHECK(cmd.tau_next(kY) == doctest::Approx(0.0));
}

TEST_CASE("closed loop recovers a lateral step through the tilt cascade") {
  const RobotParams params;
  const DynamicsModel model(params);
  const double dt = 1e-3;
  OuterLoopController ctrl{cascade_impedance_config(), cascade_dob_config(), params, dt};

  Vec8 q0 = Vec8::Zero();
  q0(kZ) = 1.185;
  const Vec6 chi0 = forward_kinematics(q0, params).vec();
  TaskRef ref;
  ref.chi = chi0;
  ref.chi(0) += 0.02;  // 2 cm step in x
  ctrl.initialize_trims(Vec8::Zero(), hover_trim(model, q0), Vec2::Zero());

  // Rates reach the impedance loop through the same low-pass the deployed
  // loop uses; the observers take the raw measurement.
  LowPassBank<8> rate_filter(cascade_dob_config().gv, dt);

  Vec8 q = q0, qd = Vec8::Zero();
  double err_mid = 0.0;
  const int ticks = 2500;
  for (int k = 0; k < ticks; ++k) {
    const Vec8 qd_f = rate_filter.step(qd);
    const ControlCommand cmd = ctrl.step(ref, q, qd, qd_f, Vec6::Zero());
    for (int s = 0; s < 4; ++s) rk4_actuated(model, q, qd, cmd.input.u, dt / 4.0);
    REQUIRE(q.lpNorm<Eigen::Infinity>() < 10.0);
    if (k == 499) err_mid = std::abs(forward_kinematics(q, params).vec()(0) - ref.chi(0));
  }
  const Vec6 chi_end = forward_kinematics(q, params).vec();
  CHECK(std::abs(chi_end(0) - ref.chi(0)) < 2e-3);
  CHECK(std::abs(chi_end(0) - ref.chi(0)) < 0.5 * err_mid + 1e-6);
  // The other task coordinates stay close to the reference throughout.
  CHECK(std::abs(chi_end(1) - ref.chi(1)) < 2e-3);
  CHECK(std::abs(chi_end(2) - ref.chi(2)) < 2e-3);
  CHECK(std::abs(chi_end(3) - ref.chi(3)) < 2e-2);
  CHECK(qd.lpNorm<Eigen::Infinity>() < 0.05);
}
