#pragma once

#include <complex>

#include "aeroarm/dob_control.hpp"
#include "aeroarm/dynamics.hpp"
#include "aeroarm/filters.hpp"
#include "aeroarm/spatial_kinematics.hpp"

namespace aeroarm {

// Task-space reference sample: pose, rate and acceleration of chi.
struct TaskRef {
  Vec6 chi = Vec6::Zero();
  Vec6 dchi = Vec6::Zero();
  Vec6 ddchi = Vec6::Zero();
};

struct ImpedanceConfig {
  // Diagonal target impedance of the tracking error (unit apparent inertia).
  Vec6 stiffness = (Vec6() << 20, 20, 30, 50, 100, 500).finished();
  Vec6 damping = (Vec6() << 15, 15, 25, 100, 100, 100).finished();
  // Attitude PD that tracks the tilt setpoints extracted from the lateral
  // force commands.
  Vec2 att_kp = Vec2::Constant(20.0);
  Vec2 att_kd = Vec2::Constant(20.0);
  // Guard against dividing by a vanishing collective thrust when extracting
  // tilt setpoints, and a hard clamp on those setpoints.
  double min_thrust_for_tilt = 1.0;  // N
  double tilt_limit = 0.5;           // rad
  // Near-singular task solve fallback.
  double dls_sigma_min = 1e-3;
  double dls_lambda = 1e-2;
  // Cutoff [rad/s] of the low-pass applied to the measured tilt acceleration
  // before it enters the task-to-coordinate map. The tilt acceleration is
  // mostly the response to the lateral force commands themselves, so an
  // unfiltered feed closes a positive high-frequency loop through the tilt
  // setpoints (gain ~ att_kp * arm drop * Mn_lateral / collective thrust);
  // the filter keeps the maneuver-band compensation and discards the rest.
  double sigma_ff_cutoff = 1.2;  // rad/s
  // Cutoff [rad/s] of the low-pass applied to the arm-lever cross-feed: the
  // base translation that would keep the end effector pinned while the arm
  // accelerates. Lateral force tracks tilt only below the attitude loop's
  // bandwidth, so chasing the arm's full damping bandwidth through the tilt
  // cascade cannot work; worse, the resulting tilt torque reacts back on the
  // far lighter arm with the opposite inertia coupling, which closes a
  // positive feedback loop around the tilt setpoint. The filter keeps the
  // maneuver-band compensation and drops the rest.
  double lever_cutoff = 1.5;  // rad/s

  void validate() const;
};

// Impedance table for the sampled cascade. The legacy attitude PD above has
// closed poles at -1.06 and -18.9 rad/s -- as slow as the position loop whose
// lateral force commands it must realize, which leaves the translation axes
// with a growing low-frequency oscillation. This keeps every task-space gain
// and raises only the tilt PD to a critically damped 25 rad/s (Kp = 625,
// Kd = 50), restoring the fast-inner/slow-outer separation the cascade needs.
[[nodiscard]] ImpedanceConfig cascade_impedance_config();

// Eigenvalues of the task-space tracking-error dynamics [[0, I], [-S, -D]].
[[nodiscard]] Eigen::Matrix<std::complex<double>, 12, 1> impedance_error_poles(
    const ImpedanceConfig& config);

// Throws UnstableImpedanceConfig unless every pole is strictly in the left
// half plane.
void require_stable_impedance(const ImpedanceConfig& config);

// Desired task acceleration: reference feedforward, impedance feedback, and
// compliance to the estimated contact force.
[[nodiscard]] Vec6 impedance_accel(const ImpedanceConfig& config,
                                   const TaskRef& ref, const Vec6& chi,
                                   const Vec6& dchi, const Vec6& Fe_hat);

// Solve J x = rhs; falls back to damped least squares when the smallest
// singular value drops below sigma_min.
[[nodiscard]] Vec6 solve_task_system(const Mat6& J, const Vec6& rhs,
                                     double sigma_min, double lambda,
                                     bool* dls_used = nullptr);

// Tilt setpoints (theta_r, phi_r) realizing planar force commands with the
// collective thrust: the rotation by the current yaw maps (tau_x, tau_y) into
// the tilt plane, scaled by the vertical force command. Falls back to the
// previous setpoint (guarded = true) when the vertical command is too small.
struct AttitudeSetpoint {
  Vec2 angles = Vec2::Zero();
  bool guarded = false;
};
[[nodiscard]] AttitudeSetpoint attitude_setpoint(const Vec3& tau_lin, double psi,
                                                 const Vec2& previous,
                                                 const ImpedanceConfig& config);

// Invert the square force map and clamp to actuator limits.
[[nodiscard]] ActuatorInput allocate(const Mat6& B6, const Vec6& tau_alloc);

// Everything the harness needs to log about one control tick.
struct ControlCommand {
  ActuatorInput input;
  Vec8 tau_cmd = Vec8::Zero();    // observer outputs, coordinate order
  Vec8 tau_next = Vec8::Zero();   // torque feedback for the next tick
  Vec8 accel_des = Vec8::Zero();  // commanded accelerations, coordinate order
  Vec8 tau_dis = Vec8::Zero();    // disturbance estimates
  Vec2 att_setpoint = Vec2::Zero();
  bool dls_active = false;
  bool tilt_guard_active = false;
};

// Full cascade: task-space impedance -> coordinate accelerations -> per-channel
// disturbance-observer torque commands -> tilt setpoint extraction and attitude
// PD -> thrust/torque allocation with saturation.
class OuterLoopController {
 public:
  OuterLoopController(const ImpedanceConfig& impedance, const DObConfig& dob,
                      const RobotParams& params, double dt);

  // Seed all internal filters with a steady operating point.
  void initialize_trims(const Vec8& rates, const Vec8& tau_steady,
                        const Vec2& att_setpoint);

  // q_meas: measured coordinates; qd_raw: measured rates (observer input);
  // qd_f: low-pass-filtered rates (impedance and kinematics input).
  ControlCommand step(const TaskRef& ref, const Vec8& q_meas, const Vec8& qd_raw,
                      const Vec8& qd_f, const Vec6& Fe_hat);

  [[nodiscard]] const ImpedanceConfig& impedance_config() const { return imp_; }
  [[nodiscard]] const DObConfig& dob_config() const { return dob_.config(); }

 private:
  ImpedanceConfig imp_;
  RobotParams params_;
  DObBank dob_;
  double dt_;

  bool has_prev_ = false;
  Mat6 J_zeta_prev_ = Mat6::Zero();
  Mat6 Q_e_prev_ = Mat6::Zero();
  Mat6x2 J_sigma_prev_ = Mat6x2::Zero();
  Vec2 dsigma_prev_ = Vec2::Zero();
  LowPassBank<2> sigma_ff_;
  LowPassBank<3> lever_lp_;
  Vec2 att_prev_ = Vec2::Zero();
  Vec8 tau_prev_ = Vec8::Zero();
};

}  // namespace aeroarm
