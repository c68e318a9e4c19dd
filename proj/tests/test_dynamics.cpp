#include <cmath>

#include "aeroarm/dynamics.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace aeroarm;
using test::StateSampler;

namespace {

RobotParams nominal() { return RobotParams{}; }

// World position of a material point: body 0 = mount rod, 1/2 = arm links,
// each parametrized by arclength fraction s in [0, 1] from its pivot.
Vec3 material_point(const Vec8& q, const RobotParams& p, int body, double s) {
  const Mat3 R_b = rotation_from_euler(EulerZYX{q(kPsi), q(kTheta), q(kPhi)});
  const ArmChain arm = arm_chain(Vec2(q(kJoint1), q(kJoint2)), p);
  Vec3 local;
  switch (body) {
    case 0: local = Vec3(0, 0, -p.L0 * s); break;
    case 1: local = arm.joint1_origin + arm.R1 * Vec3(0, 0, -p.L1 * s); break;
    default: local = arm.joint2_origin + arm.R2 * Vec3(0, 0, -p.L2 * s); break;
  }
  return q.head<3>() + R_b * local;
}

// Kinetic energy of a uniform rod by Simpson quadrature over finite-difference
// point velocities; exact for this velocity field up to the FD error.
double rod_kinetic_energy(const Vec8& q, const Vec8& qd, const RobotParams& p,
                          int body, double mass) {
  const double eps = 1e-6;
  auto speed2 = [&](double s) {
    const Vec3 vp = material_point(q + eps * qd, p, body, s);
    const Vec3 vm = material_point(q - eps * qd, p, body, s);
    return ((vp - vm) / (2.0 * eps)).squaredNorm();
  };
  const int n = 20;
  const double h = 1.0 / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * speed2(i * h);
  }
  return 0.5 * mass * sum * h / 3.0;
}

double oracle_kinetic_energy(const Vec8& q, const Vec8& qd, const RobotParams& p) {
  const double eps = 1e-6;
  double ke = 0.5 * p.m * qd.head<3>().squaredNorm();

  const Vec3 omega = test::numeric_body_rate([&](double t) {
    const Vec8 qt = q + t * qd;
    return rotation_from_euler(EulerZYX{qt(kPsi), qt(kTheta), qt(kPhi)});
  }, eps);
  const Mat3 R_b = rotation_from_euler(EulerZYX{q(kPsi), q(kTheta), q(kPhi)});
  const Mat3 I_body = Vec3(p.Ix, p.Iy, p.Iz).asDiagonal();
  ke += 0.5 * omega.dot(R_b * I_body * R_b.transpose() * omega);

  ke += rod_kinetic_energy(q, qd, p, 0, p.m0);
  ke += rod_kinetic_energy(q, qd, p, 1, p.m1);
  ke += rod_kinetic_energy(q, qd, p, 2, p.m2);
  return ke;
}

double oracle_potential_energy(const Vec8& q, const RobotParams& p) {
  double v = p.m * q(kZ);
  v += p.m0 * material_point(q, p, 0, 0.5).z();
  v += p.m1 * material_point(q, p, 1, 0.5).z();
  v += p.m2 * material_point(q, p, 2, 0.5).z();
  return kGravity * v;
}

// Classic RK4 over the combined (q, qd, work) state under given rotor input.
struct SimPoint {
  Vec8 q, qd;
  double work = 0.0;
};

SimPoint rk4_free_step(const DynamicsModel& model, const SimPoint& x,
                       const Vec6& u, double dt) {
  auto accel = [&](const Vec8& q, const Vec8& qd) {
    return model.forward_dynamics(q, qd, u, Vec8::Zero(), Vec8::Zero());
  };
  auto power = [&](const Vec8& q, const Vec8& qd) {
    return qd.dot(control_matrices(q, model.params()).B * u);
  };

  const Vec8 k1q = x.qd, k1v = accel(x.q, x.qd);
  const double k1w = power(x.q, x.qd);
  const Vec8 k2q = x.qd + 0.5 * dt * k1v,
             k2v = accel(x.q + 0.5 * dt * k1q, x.qd + 0.5 * dt * k1v);
  const double k2w = power(x.q + 0.5 * dt * k1q, x.qd + 0.5 * dt * k1v);
  const Vec8 k3q = x.qd + 0.5 * dt * k2v,
             k3v = accel(x.q + 0.5 * dt * k2q, x.qd + 0.5 * dt * k2v);
  const double k3w = power(x.q + 0.5 * dt * k2q, x.qd + 0.5 * dt * k2v);
  const Vec8 k4q = x.qd + dt * k3v,
             k4v = accel(x.q + dt * k3q, x.qd + dt * k3v);
  const double k4w = power(x.q + dt * k3q, x.qd + dt * k3v);

  SimPoint out;
  out.q = x.q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  out.qd = x.qd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  out.work = x.work + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
  return out;
}

}  // namespace

TEST_CASE("mass matrix reproduces integrated rod kinetic energy") {
  const RobotParams p = nominal();
  const DynamicsModel model(p);
  StateSampler s(31);
  for (int trial = 0; trial < 8; ++trial) {
    const Vec8 q = s.position();
    const Vec8 qd = s.velocity();
    const double ke_model = model.kinetic_energy(q, qd);
    const double ke_oracle = oracle_kinetic_energy(q, qd, p);
    CHECK(ke_model ==
          doctest::Approx(ke_oracle).epsilon(1e-6).scale(std::max(1.0, ke_oracle)));
  }
}

TEST_CASE("potential energy matches center-of-mass heights") {
  const RobotParams p = nominal();
  const DynamicsModel model(p);
  StateSampler s(32);
  for (int trial = 0; trial < 8; ++trial) {
    const Vec8 q = s.position();
    CHECK(model.potential_energy(q) ==
          doctest::Approx(oracle_potential_energy(q, p)).epsilon(1e-10));
  }
}

TEST_CASE("gravity vector is the potential gradient") {
  const RobotParams p = nominal();
  const DynamicsModel model(p);
  StateSampler s(33);
  for (int trial = 0; trial < 8; ++trial) {
    const Vec8 q = s.position();
    const Vec8 G = model.gravity(q);
    const double eps = 1e-6;
    for (int i = 0; i < 8; ++i) {
      Vec8 qp = q, qm = q;
      qp(i) += eps;
      qm(i) -= eps;
      const double fd =
          (model.potential_energy(qp) - model.potential_energy(qm)) / (2.0 * eps);
      CHECK(G(i) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("gravity at rest pose is the total weight on the vertical axis") {
  const DynamicsModel model(nominal());
  const Vec8 G = model.gravity(Vec8::Zero());
  CHECK(G(kZ) == doctest::Approx(1.197 * kGravity).epsilon(1e-12));
  for (int i = 0; i < 8; ++i)
    if (i != kZ) CHECK(std::abs(G(i)) < 1e-12);
}

TEST_CASE("mass matrix is symmetric positive definite and translation invariant") {
  const DynamicsModel model(nominal());
  StateSampler s(34);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec8 q = s.position();
    const Mat8 M = model.mass_matrix(q);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::SelfAdjointEigenSolver<Mat8> eig(M);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);

    Vec8 shifted = q;
    shifted.head<3>() += Vec3(3.1, -2.2, 5.0);
    CHECK((model.mass_matrix(shifted) - M).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("coriolis matrix leaves mass-rate skew symmetric") {
  const DynamicsModel model(nominal());
  StateSampler s(35);
  for (int trial = 0; trial < 6; ++trial) {
    const Vec8 q = s.position();
    const Vec8 qd = s.velocity();
    const DynamicsTerms t = model.dynamics_terms(q, qd);

    const double eps = 1e-5;
    const Mat8 Mdot =
        (model.mass_matrix(q + eps * qd) - model.mass_matrix(q - eps * qd)) /
        (2.0 * eps);
    const Mat8 N = Mdot - 2.0 * t.C;
    CHECK((N + N.transpose()).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("free motion conserves total energy") {
  const DynamicsModel model(nominal());
  Vec8 q = Vec8::Zero();
  q(kZ) = 2.0;
  q(kTheta) = 0.2;
  q(kPhi) = -0.15;
  q(kJoint1) = 0.5;
  q(kJoint2) = -0.8;
  Vec8 qd;
  qd << 0.2, -0.1, 0.05, 0.3, 0.1, -0.2, 0.4, -0.3;

  SimPoint x{q, qd, 0.0};
  const double e0 = model.total_energy(x.q, x.qd);
  for (int i = 0; i < 1000; ++i)
    x = rk4_free_step(model, x, Vec6::Zero(), 1e-4);
  const double e1 = model.total_energy(x.q, x.qd);
  CHECK(std::abs(e1 - e0) < 1e-6);
}

TEST_CASE("actuated motion books energy equal to injected work") {
  const DynamicsModel model(nominal());
  Vec8 q = Vec8::Zero();
  q(kZ) = 1.0;
  Vec8 qd = Vec8::Zero();
  Vec6 u;
  u << 3.2, 2.9, 3.1, 2.8, 0.05, -0.03;

  SimPoint x{q, qd, 0.0};
  const double e0 = model.total_energy(x.q, x.qd);
  for (int i = 0; i < 1000; ++i)
    x = rk4_free_step(model, x, u, 1e-4);
  const double e1 = model.total_energy(x.q, x.qd);
  CHECK(e1 - e0 == doctest::Approx(x.work).epsilon(1e-6).scale(1.0));
}

TEST_CASE("regressor reproduces the assembled dynamics for any parameters") {
  const DynamicsModel model(nominal());
  StateSampler s(36);
  for (int trial = 0; trial < 6; ++trial) {
    const Vec8 q = s.position();
    const Vec8 qd = s.velocity();
    const Vec8 qdd = s.velocity(3.0);
    const Mat8x12 Y = model.inertial_regressor(q, qd, qdd);

    const Vec12 h_true = model.true_inertial_params();
    const DynamicsTerms t = model.dynamics_terms(q, qd);
    const Vec8 tau = t.M * qdd + t.C * qd + t.G;
    CHECK((Y * h_true - tau).cwiseAbs().maxCoeff() < 1e-8);

    Vec12 h_alt;
    h_alt << 0.8, 0.01, 0.02, 0.015, 0.03, 0.002, 0.03, 0.004, 2e-4, 0.2, 0.01,
        6e-4;
    const DynamicsTerms ta = model.dynamics_terms(q, qd, h_alt);
    const Vec8 tau_alt = ta.M * qdd + ta.C * qd + ta.G;
    CHECK((Y * h_alt - tau_alt).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("regressor columns are linearly independent across states") {
  const DynamicsModel model(nominal());
  StateSampler s(37);
  Eigen::Matrix<double, Eigen::Dynamic, 12> stack(8 * 6, 12);
  for (int trial = 0; trial < 6; ++trial) {
    const Vec8 q = s.position();
    const Vec8 qd = s.velocity();
    const Vec8 qdd = s.velocity(3.0);
    stack.middleRows<8>(8 * trial) = model.inertial_regressor(q, qd, qdd);
  }
  for (int c = 0; c < 12; ++c) stack.col(c) /= stack.col(c).norm();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
  CHECK(svd.singularValues().minCoeff() > 1e-4);
}

TEST_CASE("rotor wrench follows the quadratic speed law") {
  const RobotParams p = nominal();
  const Vec4 omega(400.0, 500.0, 450.0, 350.0);
  const RotorWrench w = rotor_wrench(omega, p);
  for (int j = 0; j < 4; ++j) {
    CHECK(w.thrust(j) == doctest::Approx(p.Kf[j] * omega(j) * omega(j)));
    CHECK(w.drag(j) == doctest::Approx(p.Km[j] * omega(j) * omega(j)));
  }
  CHECK_THROWS_AS((void)rotor_wrench(Vec4(1, -2, 3, 4), p), NegativeSpeed);
}

TEST_CASE("force map agrees with mechanical power delivered by the rotors") {
  const RobotParams p = nominal();
  StateSampler s(38);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec8 q = s.position();
    const Vec8 qd = s.velocity();
    Vec6 u;
    for (int i = 0; i < 6; ++i) u(i) = s.uniform(-1.0, 4.0);

    const ControlMatrices cm = control_matrices(q, p);
    const double lhs = qd.dot(cm.B * u);

    const EulerZYX att{q(kPsi), q(kTheta), q(kPhi)};
    const Mat3 R = rotation_from_euler(att);
    const Vec3 omega_world = euler_rate_matrix(att) * qd.segment<3>(kPsi);
    Eigen::RowVector4d gamma;
    for (int j = 0; j < 4; ++j)
      gamma(j) = (j % 2 ? -1.0 : 1.0) * p.Km[j] / p.Kf[j];
    const Vec4 F = u.head<4>();
    Vec3 m_body(-p.d * u(1) + p.d * u(3),   // roll
                -p.d * u(0) + p.d * u(2),   // pitch
                gamma.dot(F));              // yaw
    const double rhs = F.sum() * R.col(2).dot(qd.head<3>()) +
                       m_body.dot(R.transpose() * omega_world) +
                       u(4) * qd(kJoint1) + u(5) * qd(kJoint2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("balanced thrust hovers and zero thrust free-falls") {
  const RobotParams p = nominal();
  const DynamicsModel model(p);
  Vec8 q = Vec8::Zero();
  q(kZ) = 1.185;

  const double g13 = p.Km[0] / p.Kf[0] + p.Km[2] / p.Kf[2];
  const double g24 = p.Km[1] / p.Kf[1] + p.Km[3] / p.Kf[3];
  const double weight = p.total_mass() * kGravity;
  const double a = weight / (2.0 * (1.0 + g13 / g24));
  const double b = a * g13 / g24;
  Vec6 u;
  u << a, b, a, b, 0.0, 0.0;
  const Vec8 qdd_hover =
      model.forward_dynamics(q, Vec8::Zero(), u, Vec8::Zero(), Vec8::Zero());
  CHECK(qdd_hover.cwiseAbs().maxCoeff() < 1e-9);

  const Vec8 qdd_fall = model.forward_dynamics(q, Vec8::Zero(), Vec6::Zero(),
                                               Vec8::Zero(), Vec8::Zero());
  Vec8 expected = Vec8::Zero();
  expected(kZ) = -kGravity;
  CHECK((qdd_fall - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("plant scale knobs act on inertia and actuation only") {
  const DynamicsModel model(nominal());
  StateSampler s(39);
  const Vec8 q = s.position();
  const Vec8 qd = s.velocity();
  Vec6 u;
  for (int i = 0; i < 6; ++i) u(i) = s.uniform(0.0, 4.0);

  const Vec8 base =
      model.forward_dynamics(q, qd, u, Vec8::Zero(), Vec8::Zero());
  const Vec8 heavy =
      model.forward_dynamics(q, qd, u, Vec8::Zero(), Vec8::Zero(), 1.1, 1.0);
  CHECK((heavy - base / 1.1).cwiseAbs().maxCoeff() < 1e-9);

  const DynamicsTerms t = model.dynamics_terms(q, qd);
  const ControlMatrices cm = control_matrices(q, model.params());
  const Vec8 weak =
      model.forward_dynamics(q, qd, u, Vec8::Zero(), Vec8::Zero(), 1.0, 0.9);
  const Vec8 expected = base - 0.1 * t.M.ldlt().solve(cm.B * u);
  CHECK((weak - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("inertia diagonal bounds pin the constant channels") {
  const RobotParams p = nominal();
  const DynamicsModel model(p);
  const DynamicsModel::DiagBounds b = model.diag_inertia_bounds();
  for (int i : {kX, kY, kZ}) {
    CHECK(b.min(i) == doctest::Approx(p.total_mass()).epsilon(1e-12));
    CHECK(b.max(i) == doctest::Approx(p.total_mass()).epsilon(1e-12));
  }
  const double J2 = p.m2 * p.L2 * p.L2 / 3.0;
  CHECK(b.min(kJoint2) == doctest::Approx(J2).epsilon(1e-9));
  CHECK(b.max(kJoint2) == doctest::Approx(J2).epsilon(1e-9));
  CHECK(b.min(kTheta) > 0.0);
  CHECK((b.max.array() >= b.min.array()).all());
}
