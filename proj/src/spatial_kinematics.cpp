#include "aeroarm/spatial_kinematics.hpp"

#include <cmath>

namespace aeroarm {

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v(2), v(1),
       v(2), 0.0, -v(0),
      -v(1), v(0), 0.0;
  return S;
}

Mat3 rotation_from_euler(const EulerZYX& ang) {
  const double cpsi = std::cos(ang.psi), spsi = std::sin(ang.psi);
  const double cth = std::cos(ang.theta), sth = std::sin(ang.theta);
  const double cphi = std::cos(ang.phi), sphi = std::sin(ang.phi);
  Mat3 R;
  R << cpsi * cth, sphi * sth * cpsi - spsi * cphi, spsi * sphi + cpsi * sth * cphi,
       spsi * cth, cpsi * cphi + spsi * sth * sphi, spsi * sth * cphi - cpsi * sphi,
       -sth,       cth * sphi,                      cth * cphi;
  return R;
}

Mat3 euler_rate_matrix(const EulerZYX& ang) {
  const double cpsi = std::cos(ang.psi), spsi = std::sin(ang.psi);
  const double cth = std::cos(ang.theta), sth = std::sin(ang.theta);
  Mat3 T;
  T << 0.0, -spsi, cpsi * cth,
       0.0, cpsi,  spsi * cth,
       1.0, 0.0,   -sth;
  return T;
}

void require_pitch_in_range(double theta, const char* who) {
  if (std::abs(theta) > M_PI / 2.0 - kGimbalMargin)
    throw GimbalSingularity(std::string(who) + ": pitch within the singular band");
}

EulerZYX euler_from_rotation(const Mat3& R) {
  const double sth = -R(2, 0);
  // sin(theta) at the margin rather than theta keeps the check cheap and monotone.
  if (std::abs(sth) > std::sin(M_PI / 2.0 - kGimbalMargin))
    throw GimbalSingularity("euler_from_rotation: pitch within the singular band");
  EulerZYX ang;
  ang.theta = std::asin(sth);
  ang.psi = std::atan2(R(1, 0), R(0, 0));
  ang.phi = std::atan2(R(2, 1), R(2, 2));
  return ang;
}

ArmChain arm_chain(const Vec2& joints, const RobotParams& params) {
  ArmChain arm;
  const double c1 = std::cos(joints(0)), s1 = std::sin(joints(0));
  const double c2 = std::cos(joints(1)), s2 = std::sin(joints(1));

  arm.joint1_origin = Vec3(0.0, 0.0, -params.L0);
  arm.R1 << 1.0, 0.0, 0.0,
            0.0, c1, -s1,
            0.0, s1, c1;
  Mat3 Ry2;
  Ry2 << c2, 0.0, s2,
         0.0, 1.0, 0.0,
        -s2, 0.0, c2;
  arm.R2 = arm.R1 * Ry2;

  arm.joint2_origin = arm.joint1_origin + arm.R1 * Vec3(0.0, 0.0, -params.L1);
  arm.p_eb = arm.joint2_origin + arm.R2 * Vec3(0.0, 0.0, -params.L2);
  arm.axis1 = Vec3::UnitX();
  arm.axis2 = arm.R1 * Vec3::UnitY();
  return arm;
}

Mat6x2 arm_jacobian(const ArmChain& arm) {
  Mat6x2 J;
  J.col(0).head<3>() = arm.axis1.cross(arm.p_eb - arm.joint1_origin);
  J.col(0).tail<3>() = arm.axis1;
  J.col(1).head<3>() = arm.axis2.cross(arm.p_eb - arm.joint2_origin);
  J.col(1).tail<3>() = arm.axis2;
  return J;
}

TaskPose forward_kinematics(const Vec8& q, const RobotParams& params) {
  require_pitch_in_range(q(kTheta), "forward_kinematics");
  const EulerZYX att{q(kPsi), q(kTheta), q(kPhi)};
  const Mat3 R_b = rotation_from_euler(att);
  const ArmChain arm = arm_chain({q(kJoint1), q(kJoint2)}, params);

  TaskPose pose;
  pose.p = q.head<3>() + R_b * arm.p_eb;
  pose.ang = euler_from_rotation(R_b * arm.R2);
  return pose;
}

JacobianSet jacobians(const Vec8& q, const RobotParams& params) {
  require_pitch_in_range(q(kTheta), "jacobians");
  const EulerZYX att{q(kPsi), q(kTheta), q(kPhi)};
  const Mat3 R_b = rotation_from_euler(att);
  const ArmChain arm = arm_chain({q(kJoint1), q(kJoint2)}, params);

  JacobianSet out;
  out.T_b = euler_rate_matrix(att);
  out.J_beb = arm_jacobian(arm);

  out.J_eb.topRows<3>() = R_b * out.J_beb.topRows<3>();
  out.J_eb.bottomRows<3>() = R_b * out.J_beb.bottomRows<3>();

  out.J_b.setIdentity();
  out.J_b.topRightCorner<3, 3>() = -skew(R_b * arm.p_eb);

  out.Q_b.setZero();
  out.Q_b.topLeftCorner<3, 3>().setIdentity();
  out.Q_b.bottomRightCorner<3, 3>() = out.T_b;

  const Mat6 JbQb = out.J_b * out.Q_b;
  out.J_eta = JbQb.leftCols<4>();
  out.J_sigma = JbQb.rightCols<2>();
  out.J_zeta.leftCols<4>() = out.J_eta;
  out.J_zeta.rightCols<2>() = out.J_eb;

  out.pose.p = q.head<3>() + R_b * arm.p_eb;
  out.pose.ang = euler_from_rotation(R_b * arm.R2);
  out.Q_e.setZero();
  out.Q_e.topLeftCorner<3, 3>().setIdentity();
  out.Q_e.bottomRightCorner<3, 3>() = euler_rate_matrix(out.pose.ang);
  return out;
}

Mat6x8 task_jacobian(const JacobianSet& jac) {
  // End-effector twist per unit generalized rate, columns in native q order.
  Mat6x8 Jv;
  Jv.leftCols<3>() = (jac.J_b * jac.Q_b).leftCols<3>();
  Jv.col(kPsi) = jac.J_eta.col(3);
  Jv.col(kTheta) = jac.J_sigma.col(0);
  Jv.col(kPhi) = jac.J_sigma.col(1);
  Jv.col(kJoint1) = jac.J_eb.col(0);
  Jv.col(kJoint2) = jac.J_eb.col(1);

  // Convert the angular-velocity block to Euler rates of the end-effector.
  Mat6x8 J = Jv;
  const Mat3 Te = jac.Q_e.bottomRightCorner<3, 3>();
  J.bottomRows<3>() = Te.partialPivLu().solve(Jv.bottomRows<3>());
  return J;
}

Mat6x8 task_jacobian(const Vec8& q, const RobotParams& params) {
  return task_jacobian(jacobians(q, params));
}

Vec6 task_rates(const JacobianSet& jac, const Vec8& qd) {
  return task_jacobian(jac) * qd;
}

Vec6 task_rates(const Vec8& q, const Vec8& qd, const RobotParams& params) {
  return task_rates(jacobians(q, params), qd);
}

Vec6 zeta_of(const Vec8& v) {
  Vec6 z;
  for (int i = 0; i < 6; ++i) z(i) = v(kZetaIndex[i]);
  return z;
}

Vec2 sigma_of(const Vec8& v) {
  return {v(kSigmaIndex[0]), v(kSigmaIndex[1])};
}

Vec8 assemble_q_order(const Vec6& zeta, const Vec2& sigma) {
  Vec8 v;
  for (int i = 0; i < 6; ++i) v(kZetaIndex[i]) = zeta(i);
  v(kSigmaIndex[0]) = sigma(0);
  v(kSigmaIndex[1]) = sigma(1);
  return v;
}

}  // namespace aeroarm
