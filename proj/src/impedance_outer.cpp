#include "aeroarm/impedance_outer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace aeroarm {

void ImpedanceConfig::validate() const {
  for (int i = 0; i < 6; ++i) {
    if (!(stiffness(i) > 0.0) || !(damping(i) > 0.0))
      throw ConfigError("ImpedanceConfig: stiffness and damping must be positive");
  }
  for (int i = 0; i < 2; ++i) {
    if (!(att_kp(i) > 0.0) || !(att_kd(i) > 0.0))
      throw ConfigError("ImpedanceConfig: attitude gains must be positive");
  }
  if (!(min_thrust_for_tilt > 0.0))
    throw ConfigError("ImpedanceConfig: min_thrust_for_tilt must be positive");
  if (!(tilt_limit > 0.0) ||
      tilt_limit > std::numbers::pi / 2.0 - kGimbalMargin)
    throw ConfigError("ImpedanceConfig: tilt_limit out of range");
  if (!(dls_sigma_min > 0.0) || !(dls_lambda > 0.0))
    throw ConfigError("ImpedanceConfig: DLS parameters must be positive");
  if (!(sigma_ff_cutoff > 0.0))
    throw ConfigError("ImpedanceConfig: sigma_ff_cutoff must be positive");
  if (!(lever_cutoff > 0.0))
    throw ConfigError("ImpedanceConfig: lever_cutoff must be positive");
  require_stable_impedance(*this);
}

ImpedanceConfig cascade_impedance_config() {
  ImpedanceConfig config;
  config.att_kp = Vec2::Constant(625.0);
  config.att_kd = Vec2::Constant(50.0);
  return config;
}

Eigen::Matrix<std::complex<double>, 12, 1> impedance_error_poles(
    const ImpedanceConfig& config) {
  Eigen::Matrix<double, 12, 12> A = Eigen::Matrix<double, 12, 12>::Zero();
  A.block<6, 6>(0, 6).setIdentity();
  A.block<6, 6>(6, 0) = (-config.stiffness).asDiagonal();
  A.block<6, 6>(6, 6) = (-config.damping).asDiagonal();
  return Eigen::EigenSolver<Eigen::Matrix<double, 12, 12>>(A).eigenvalues();
}

void require_stable_impedance(const ImpedanceConfig& config) {
  const auto poles = impedance_error_poles(config);
  for (int i = 0; i < 12; ++i) {
    if (poles(i).real() >= 0.0)
      throw UnstableImpedanceConfig(
          "impedance error dynamics have a non-decaying mode");
  }
}

Vec6 impedance_accel(const ImpedanceConfig& config, const TaskRef& ref,
                     const Vec6& chi, const Vec6& dchi, const Vec6& Fe_hat) {
  return ref.ddchi + config.stiffness.cwiseProduct(ref.chi - chi) +
         config.damping.cwiseProduct(ref.dchi - dchi) - Fe_hat;
}

Vec6 solve_task_system(const Mat6& J, const Vec6& rhs, double sigma_min,
                       double lambda, bool* dls_used) {
  Eigen::JacobiSVD<Mat6> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const bool dls = svd.singularValues().minCoeff() < sigma_min;
  if (dls_used != nullptr) *dls_used = dls;
  if (!dls) return svd.solve(rhs);
  // Damped least squares (J^T J + lambda^2 I)^{-1} J^T rhs through the SVD.
  const Vec6& s = svd.singularValues();
  Vec6 w = svd.matrixU().transpose() * rhs;
  for (int i = 0; i < 6; ++i) w(i) *= s(i) / (s(i) * s(i) + lambda * lambda);
  return svd.matrixV() * w;
}

namespace {

// Damped-least-squares solve of the orientation block of the task system,
// same fallback policy as solve_task_system.
Vec3 solve_orientation_block(const Eigen::Matrix3d& W, const Vec3& rhs,
                             double sigma_min, double lambda, bool* dls_used) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      W, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const bool dls = svd.singularValues().minCoeff() < sigma_min;
  if (dls_used != nullptr) *dls_used = dls;
  if (!dls) return svd.solve(rhs);
  const Vec3& s = svd.singularValues();
  Vec3 w = svd.matrixU().transpose() * rhs;
  for (int i = 0; i < 3; ++i) w(i) *= s(i) / (s(i) * s(i) + lambda * lambda);
  return svd.matrixV() * w;
}

}  // namespace

AttitudeSetpoint attitude_setpoint(const Vec3& tau_lin, double psi,
                                   const Vec2& previous,
                                   const ImpedanceConfig& config) {
  AttitudeSetpoint out;
  if (std::abs(tau_lin(2)) < config.min_thrust_for_tilt) {
    out.angles = previous;
    out.guarded = true;
    return out;
  }
  const double cp = std::cos(psi);
  const double sp = std::sin(psi);
  const double theta_r = (cp * tau_lin(0) + sp * tau_lin(1)) / tau_lin(2);
  const double phi_r = (sp * tau_lin(0) - cp * tau_lin(1)) / tau_lin(2);
  out.angles(0) = std::clamp(theta_r, -config.tilt_limit, config.tilt_limit);
  out.angles(1) = std::clamp(phi_r, -config.tilt_limit, config.tilt_limit);
  return out;
}

ActuatorInput allocate(const Mat6& B6, const Vec6& tau_alloc) {
  const Eigen::FullPivLU<Mat6> lu(B6);
  if (!lu.isInvertible())
    throw AllocationSingular("thrust/torque map is singular");
  ActuatorInput out;
  out.u = lu.solve(tau_alloc);
  if (!out.u.allFinite())
    throw AllocationSingular("allocation produced a non-finite input");
  for (int i = 0; i < 4; ++i) {
    const double f = std::clamp(out.u(i), kMinRotorThrust, kMaxRotorThrust);
    if (f != out.u(i)) out.thrust_saturated = true;
    out.u(i) = f;
  }
  for (int i = 0; i < 2; ++i) {
    const double limit = kMaxJointTorque[static_cast<size_t>(i)];
    const double t = std::clamp(out.u(4 + i), -limit, limit);
    if (t != out.u(4 + i)) out.joint_saturated = true;
    out.u(4 + i) = t;
  }
  return out;
}

OuterLoopController::OuterLoopController(const ImpedanceConfig& impedance,
                                         const DObConfig& dob,
                                         const RobotParams& params, double dt)
    : imp_(impedance), params_(params), dob_(dob, dt), dt_(dt) {
  if (!(dt > 0.0)) throw ConfigError("OuterLoopController: dt must be positive");
  imp_.validate();
  params_.validate();
  sigma_ff_.configure(Vec2::Constant(imp_.sigma_ff_cutoff), dt);
  lever_lp_.configure(Vec3::Constant(imp_.lever_cutoff), dt);
}

void OuterLoopController::initialize_trims(const Vec8& rates,
                                           const Vec8& tau_steady,
                                           const Vec2& att_setpoint) {
  dob_.initialize(rates, tau_steady);
  tau_prev_ = tau_steady;
  att_prev_ = att_setpoint;
  dsigma_prev_ = sigma_of(rates);
  sigma_ff_.reset(Vec2::Zero());
  lever_lp_.reset(Vec3::Zero());
  has_prev_ = false;
}

ControlCommand OuterLoopController::step(const TaskRef& ref, const Vec8& q_meas,
                                         const Vec8& qd_raw, const Vec8& qd_f,
                                         const Vec6& Fe_hat) {
  ControlCommand out;

  const JacobianSet jac = jacobians(q_meas, params_);
  const Vec6 chi = jac.pose.vec();
  const Vec6 dchi = task_rates(jac, qd_f);

  // The x/y damping acts on the rate content of the directly controlled
  // coordinates. The tilt swing moves the end effector opposite to the tilt
  // (it hangs below the rotor plane), so lateral damping on the raw task rate
  // feeds the swing back into the tilt setpoints with a gain that grows with
  // frequency; the tilt loop itself already damps that motion.
  Vec8 qd_no_tilt = qd_f;
  qd_no_tilt(kTheta) = 0.0;
  qd_no_tilt(kPhi) = 0.0;
  const Vec6 dchi_no_tilt = task_rates(jac, qd_no_tilt);
  Vec6 dchi_damp = dchi;
  dchi_damp.head<2>() = dchi_no_tilt.head<2>();

  const Vec6 a_task = impedance_accel(imp_, ref, chi, dchi_damp, Fe_hat);

  // Map the task acceleration to zeta accelerations by differentiating the
  // twist identity J_zeta dzeta + J_sigma dsigma = Q_e dchi. The Jacobian
  // rates come from one-step backward differences (zero on the first tick)
  // and the tilt acceleration is measured -- a differenced filtered rate,
  // smoothed so only its maneuver-band content feeds the map.
  const Vec6 dzeta = zeta_of(qd_f);
  const Vec2 dsigma = sigma_of(qd_f);
  Mat6 Qe_dot = Mat6::Zero();
  Mat6 Jz_dot = Mat6::Zero();
  Mat6x2 Js_dot = Mat6x2::Zero();
  Vec2 sigma_dd_b = Vec2::Zero();
  if (has_prev_) {
    Qe_dot = (jac.Q_e - Q_e_prev_) / dt_;
    Jz_dot = (jac.J_zeta - J_zeta_prev_) / dt_;
    Js_dot = (jac.J_sigma - J_sigma_prev_) / dt_;
    sigma_dd_b = sigma_ff_.step((dsigma - dsigma_prev_) / dt_);
  } else {
    sigma_ff_.step(Vec2::Zero());
  }
  dsigma_prev_ = dsigma;
  const Vec6 rhs = jac.Q_e * a_task + Qe_dot * ref.dchi - Jz_dot * dzeta -
                   jac.J_sigma * sigma_dd_b - Js_dot * dsigma;
  // The task system is block triangular: base translation moves the end
  // effector one for one, and the orientation rows do not involve translation
  // at all. Solve the orientation block exactly for the yaw/joint
  // accelerations, then subtract the arm-lever cross-feed -- the base
  // translation that keeps the end effector pinned while the arm accelerates
  // -- from the translational rows. That cross-feed is low-passed: lateral
  // thrust only tracks below the tilt loop's bandwidth, so chasing the arm's
  // full damping bandwidth through the tilt cascade is unrealizable, and the
  // attempt turns the tilt torque's reaction on the far lighter arm into
  // positive feedback around the tilt setpoint.
  const Eigen::Matrix3d W = jac.J_zeta.block<3, 3>(3, 3);
  const Eigen::Matrix3d P = jac.J_zeta.block<3, 3>(0, 3);
  const Vec3 joint_dd = solve_orientation_block(
      W, rhs.tail<3>(), imp_.dls_sigma_min, imp_.dls_lambda, &out.dls_active);
  const Vec3 lever = lever_lp_.step(P * joint_dd);
  Vec6 zeta_dd;
  zeta_dd.head<3>() = rhs.head<3>() - lever;
  zeta_dd.tail<3>() = joint_dd;

  // Inner loop on the translational, yaw and joint channels.
  Vec8 accel_des = assemble_q_order(zeta_dd, Vec2::Zero());
  Vec8 tau_cmd = Vec8::Zero();
  for (int zi = 0; zi < 6; ++zi) {
    const int i = kZetaIndex[static_cast<size_t>(zi)];
    tau_cmd(i) = dob_.command_channel(i, accel_des(i), qd_raw(i), tau_prev_(i));
  }

  // Tilt setpoints realizing the lateral force commands, then the attitude PD
  // and the inner loop on the tilt channels.
  const Vec3 tau_lin(tau_cmd(kX), tau_cmd(kY), tau_cmd(kZ));
  const AttitudeSetpoint sp =
      attitude_setpoint(tau_lin, q_meas(kPsi), att_prev_, imp_);
  out.tilt_guard_active = sp.guarded;
  att_prev_ = sp.angles;

  const Vec2 sigma(q_meas(kTheta), q_meas(kPhi));
  const Vec2 sigma_dd_des = imp_.att_kp.cwiseProduct(sp.angles - sigma) -
                            imp_.att_kd.cwiseProduct(dsigma);
  accel_des(kTheta) = sigma_dd_des(0);
  accel_des(kPhi) = sigma_dd_des(1);
  for (int si = 0; si < 2; ++si) {
    const int i = kSigmaIndex[static_cast<size_t>(si)];
    tau_cmd(i) = dob_.command_channel(i, accel_des(i), qd_raw(i), tau_prev_(i));
  }

  // Allocate onto the actuated channels and saturate.
  const ControlMatrices cm = control_matrices(q_meas, params_);
  Vec6 tau_alloc;
  tau_alloc << tau_cmd(kZ), tau_cmd(kPsi), tau_cmd(kTheta), tau_cmd(kPhi),
      tau_cmd(kJoint1), tau_cmd(kJoint2);
  out.input = allocate(cm.B6, tau_alloc);

  // Torque feedback for the next tick: the generalized forces the saturated
  // input actually produces, on every channel. The lateral entries are the
  // thrust components the current tilt really delivers, so a commanded force
  // the attitude has not yet realized never accumulates in the observers.
  const Vec8 tau_next = cm.B * out.input.u;
  tau_prev_ = tau_next;

  Q_e_prev_ = jac.Q_e;
  J_zeta_prev_ = jac.J_zeta;
  J_sigma_prev_ = jac.J_sigma;
  has_prev_ = true;

  out.tau_cmd = tau_cmd;
  out.tau_next = tau_next;
  out.accel_des = accel_des;
  out.tau_dis = dob_.disturbance_estimate();
  out.att_setpoint = sp.angles;
  return out;
}

}  // namespace aeroarm
