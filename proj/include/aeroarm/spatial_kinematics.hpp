#pragma once

#include "aeroarm/types.hpp"

namespace aeroarm {

// ============================================================================
// Rotations and Euler-angle kinematics
// ============================================================================

[[nodiscard]] Mat3 skew(const Vec3& v);

// World-from-body rotation for ZYX angles: Rz(psi) * Ry(theta) * Rx(phi).
[[nodiscard]] Mat3 rotation_from_euler(const EulerZYX& ang);

// Maps ZYX Euler rates to the world-frame angular velocity: w = T * (dpsi, dtheta, dphi).
// Singular at |theta| = pi/2 (det = -cos(theta)).
[[nodiscard]] Mat3 euler_rate_matrix(const EulerZYX& ang);

// Extracts ZYX angles with |theta| < pi/2 - kGimbalMargin; throws GimbalSingularity
// outside that band. R is assumed orthonormal.
[[nodiscard]] EulerZYX euler_from_rotation(const Mat3& R);

// Throws GimbalSingularity when the pitch angle is within kGimbalMargin of +-pi/2.
void require_pitch_in_range(double theta, const char* who);

// ============================================================================
// Arm chain (two revolute joints below the vehicle)
// ============================================================================
//
// Joint 1 sits L0 below the body origin and rotates about x_b; joint 2 sits L1
// further along the first link and rotates about the link-1 y axis. With both
// angles zero the arm points straight down: p_e^b = (0, 0, -(L0+L1+L2)).

struct ArmChain {
  // All quantities expressed in the body frame.
  Vec3 joint1_origin;  // (0, 0, -L0)
  Vec3 joint2_origin;
  Vec3 p_eb;           // end-effector position
  Mat3 R1;             // body-from-link1
  Mat3 R2;             // body-from-link2 (= end-effector orientation in body frame)
  Vec3 axis1;          // joint-1 axis (x_b)
  Vec3 axis2;          // joint-2 axis (R1 * y)
};

[[nodiscard]] ArmChain arm_chain(const Vec2& joints, const RobotParams& params);

// Geometric Jacobian of the end-effector in the body frame, 6x2 (linear; angular).
[[nodiscard]] Mat6x2 arm_jacobian(const ArmChain& arm);

// ============================================================================
// Whole-vehicle kinematics
// ============================================================================

// World pose of the end-effector. Throws GimbalSingularity if the vehicle pitch
// or the extracted end-effector pitch is inside the exclusion band.
[[nodiscard]] TaskPose forward_kinematics(const Vec8& q, const RobotParams& params);

struct JacobianSet {
  Mat6x2 J_beb;   // arm Jacobian in the body frame
  Mat6x2 J_eb;    // arm Jacobian rotated to the world frame
  Mat6 J_b;       // base twist transport to the end-effector point
  Mat6 Q_b;       // diag(I3, T_b(Phi_b))
  Mat6 Q_e;       // diag(I3, T_b(Phi_e))
  Mat6x4 J_eta;   // columns of J_b*Q_b for (x, y, z, psi)
  Mat6x2 J_sigma; // columns of J_b*Q_b for (theta, phi)
  Mat6 J_zeta;    // [J_eta | J_eb]
  Mat3 T_b;       // Euler-rate matrix at the vehicle attitude
  TaskPose pose;  // end-effector pose used to build Q_e
};

[[nodiscard]] JacobianSet jacobians(const Vec8& q, const RobotParams& params);

// Analytic task Jacobian, 6x8: d(chi_e)/dt = J * qd with q in its native order.
[[nodiscard]] Mat6x8 task_jacobian(const JacobianSet& jac);
[[nodiscard]] Mat6x8 task_jacobian(const Vec8& q, const RobotParams& params);

// End-effector pose rates (dp_e, dPhi_e) for the given generalized rates.
[[nodiscard]] Vec6 task_rates(const JacobianSet& jac, const Vec8& qd);
[[nodiscard]] Vec6 task_rates(const Vec8& q, const Vec8& qd, const RobotParams& params);

// Gathers (zeta, sigma) views of an 8-vector in q order.
[[nodiscard]] Vec6 zeta_of(const Vec8& v);
[[nodiscard]] Vec2 sigma_of(const Vec8& v);
// Scatters (zeta, sigma) back into q order.
[[nodiscard]] Vec8 assemble_q_order(const Vec6& zeta, const Vec2& sigma);

}  // namespace aeroarm
