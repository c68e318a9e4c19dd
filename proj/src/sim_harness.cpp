#include "aeroarm/sim_harness.hpp"

#include <algorithm>
#include <cmath>

namespace aeroarm {

// ============================================================================
// Reference trajectory
// ============================================================================

void TrajectorySpec::validate() const {
  if (helix_radius < 0.0 || helix_angular_rate < 0.0)
    throw ConfigError("TrajectorySpec: helix radius and rate must be >= 0");
  if (orientation.empty())
    throw ConfigError("TrajectorySpec: at least one orientation waypoint");
  for (size_t i = 1; i < orientation.size(); ++i)
    if (!(orientation[i].time > orientation[i - 1].time))
      throw ConfigError("TrajectorySpec: waypoint times must strictly increase");
}

namespace {

// Fifth-order interpolant with zero velocity and acceleration at both ends:
// s(0) = 0, s(1) = 1, s' = s'' = 0 at the boundaries.
struct QuinticBlend {
  double s, ds, dds;
};

QuinticBlend quintic_blend(double tau) {
  const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
  return {10.0 * t3 - 15.0 * t4 + 6.0 * t5,
          30.0 * t2 - 60.0 * t3 + 30.0 * t4,
          60.0 * tau - 180.0 * t2 + 120.0 * t3};
}

// Orientation sample between waypoints; constant outside the program.
void orientation_reference(const std::vector<OrientationWaypoint>& wp, double t,
                           Vec3* ang, Vec3* dang, Vec3* ddang) {
  dang->setZero();
  ddang->setZero();
  if (t <= wp.front().time) {
    *ang = wp.front().angles;
    return;
  }
  if (t >= wp.back().time) {
    *ang = wp.back().angles;
    return;
  }
  size_t i = 0;
  while (t >= wp[i + 1].time) ++i;
  const double T = wp[i + 1].time - wp[i].time;
  const QuinticBlend b = quintic_blend((t - wp[i].time) / T);
  const Vec3 span = wp[i + 1].angles - wp[i].angles;
  *ang = wp[i].angles + b.s * span;
  *dang = span * (b.ds / T);
  *ddang = span * (b.dds / (T * T));
}

}  // namespace

TaskRef generate_reference(const TrajectorySpec& spec, double t) {
  TaskRef ref;
  if (spec.mode == TrajectorySpec::Mode::kHold) {
    ref.chi = spec.hold_pose;
    return ref;
  }

  const double w = spec.helix_angular_rate;
  const double r = spec.helix_radius;
  const double c = std::cos(w * t), s = std::sin(w * t);
  ref.chi.head<3>() = spec.helix_center + Vec3(r * c, r * s, spec.helix_climb_rate * t);
  ref.dchi.head<3>() = Vec3(-r * w * s, r * w * c, spec.helix_climb_rate);
  ref.ddchi.head<3>() = Vec3(-r * w * w * c, -r * w * w * s, 0.0);

  Vec3 ang, dang, ddang;
  orientation_reference(spec.orientation, t, &ang, &dang, &ddang);
  ref.chi.tail<3>() = ang;
  ref.dchi.tail<3>() = dang;
  ref.ddchi.tail<3>() = ddang;
  return ref;
}

// ============================================================================
// Measurement model
// ============================================================================

double GaussianNoise::uniform01() {
  // 53 uniformly distributed mantissa bits; shifted into (0, 1] so the
  // logarithm below is always finite.
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return u > 0.0 ? u : 0x1.0p-53;
}

double GaussianNoise::sample(double mean, double std) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + std * spare_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return mean + std * (radius * std::cos(angle));
}

Measurement measure(const Vec8& q, const Vec8& qd, GaussianNoise& rng,
                    const NoiseParams& noise) {
  Measurement m;
  m.q = q;
  m.base_rates = qd.head<6>();
  if (!noise.enabled) return m;
  for (int i = 0; i < 8; ++i) m.q(i) += rng.sample(noise.mean, noise.std);
  return m;
}

// ============================================================================
// Scenario configuration
// ============================================================================

PlantScales apply_uncertainty(const UncertaintySpec& spec, double t) {
  PlantScales s;
  if (spec.enabled && t >= spec.time) {
    s.mass = spec.mass_scale;
    s.actuator = spec.actuator_scale;
  }
  return s;
}

ScenarioConfig::ScenarioConfig()
    : impedance(cascade_impedance_config()), dob(cascade_dob_config()) {}

void ScenarioConfig::validate() const {
  if (!(duration > 0.0) || !(control_dt > 0.0))
    throw ConfigError("ScenarioConfig: duration and control_dt must be positive");
  if (physics_substeps < 1)
    throw ConfigError("ScenarioConfig: physics_substeps must be >= 1");
  if (!(divergence_norm > 0.0))
    throw ConfigError("ScenarioConfig: divergence_norm must be positive");
  trajectory.validate();
  noise.validate();
  uncertainty.validate();
  contact.validate();
  wind.validate();
  robot.validate();
  impedance.validate();
  dob.validate();
  ftrls.validate();
}

// ============================================================================
// Simulation log
// ============================================================================

SimLog::SimLog(std::vector<std::string> columns, double dt)
    : columns_(std::move(columns)), dt_(dt) {}

void SimLog::add_row(const std::vector<double>& row) {
  if (row.size() != columns_.size())
    throw ConfigError("SimLog: row width does not match the column schema");
  data_.insert(data_.end(), row.begin(), row.end());
}

int SimLog::column_index(const std::string& name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end())
    throw ConfigError("SimLog: no column named '" + name + "'");
  return static_cast<int>(it - columns_.begin());
}

std::vector<std::string> simlog_columns() {
  std::vector<std::string> c;
  c.reserve(99);
  const char* coord[8] = {"x", "y", "z", "psi", "theta", "phi", "j1", "j2"};
  const char* coord_unit[8] = {"m", "m", "m", "rad", "rad", "rad", "rad", "rad"};
  const char* rate_unit[8] = {"m_s", "m_s", "m_s", "rad_s",
                              "rad_s", "rad_s", "rad_s", "rad_s"};
  const char* force_unit[8] = {"N", "N", "N", "Nm", "Nm", "Nm", "Nm", "Nm"};
  const char* task[6] = {"x", "y", "z", "psi", "theta", "phi"};
  const char* task_unit[6] = {"m", "m", "m", "rad", "rad", "rad"};
  const char* task_force_unit[6] = {"N", "N", "N", "Nm", "Nm", "Nm"};

  c.emplace_back("t_s");
  for (int i = 0; i < 8; ++i)
    c.emplace_back(std::string("q_") + coord[i] + "_" + coord_unit[i]);
  for (int i = 0; i < 8; ++i)
    c.emplace_back(std::string("qd_") + coord[i] + "_" + rate_unit[i]);
  for (int i = 0; i < 6; ++i)
    c.emplace_back(std::string("chi_") + task[i] + "_" + task_unit[i]);
  for (int i = 0; i < 6; ++i)
    c.emplace_back(std::string("ref_") + task[i] + "_" + task_unit[i]);
  c.emplace_back("u_f1_N");
  c.emplace_back("u_f2_N");
  c.emplace_back("u_f3_N");
  c.emplace_back("u_f4_N");
  c.emplace_back("u_j1_Nm");
  c.emplace_back("u_j2_Nm");
  for (int i = 0; i < 8; ++i)
    c.emplace_back(std::string("tau_cmd_") + coord[i] + "_" + force_unit[i]);
  for (int i = 0; i < 8; ++i)
    c.emplace_back(std::string("tau_dis_") + coord[i] + "_" + force_unit[i]);
  for (int i = 0; i < 6; ++i)
    c.emplace_back(std::string("fe_hat_") + task[i] + "_" + task_force_unit[i]);
  for (int i = 0; i < 6; ++i)
    c.emplace_back(std::string("fe_true_") + task[i] + "_" + task_force_unit[i]);
  for (int i = 0; i < 12; ++i)
    c.emplace_back("h_in_" + std::to_string(i));
  for (int i = 0; i < 6; ++i) c.emplace_back(std::string("h_sc_") + task[i]);
  for (int i = 0; i < 6; ++i) c.emplace_back(std::string("h_dc_") + task[i]);
  for (int i = 0; i < 4; ++i) c.emplace_back("h_w_" + std::to_string(i));
  c.emplace_back("eta_forgetting");
  c.emplace_back("att_sp_theta_rad");
  c.emplace_back("att_sp_phi_rad");
  c.emplace_back("flag_thrust_sat");
  c.emplace_back("flag_joint_sat");
  c.emplace_back("flag_dls");
  c.emplace_back("flag_tilt_guard");
  c.emplace_back("flag_est_reset");
  return c;
}

// ============================================================================
// Plant integration
// ============================================================================

namespace {

Vec8 plant_accel(const DynamicsModel& model, const Vec8& q, const Vec8& qd,
                 const Vec6& u, const WindParams* wind,
                 const ContactParams* contact, const PlantScales& scales) {
  Vec8 tau_w = Vec8::Zero();
  if (wind != nullptr)
    tau_w = wind_generalized(wind_coefficients(*wind), q(kZ), q(kTheta), q(kPhi));
  Vec8 tau_l = Vec8::Zero();
  if (contact != nullptr) {
    const Mat6x8 J = task_jacobian(q, model.params());
    const Vec6 chi = forward_kinematics(q, model.params()).vec();
    const Vec6 dchi = J * qd;
    tau_l = contact_generalized(J, contact_force(*contact, chi, dchi));
  }
  return model.forward_dynamics(q, qd, u, tau_w, tau_l, scales.mass,
                                scales.actuator);
}

}  // namespace

void rk4_plant_step(const DynamicsModel& model, Vec8& q, Vec8& qd, const Vec6& u,
                    const WindParams* wind, const ContactParams* contact,
                    double h, const PlantScales& scales) {
  const auto accel = [&](const Vec8& qk, const Vec8& qdk) {
    return plant_accel(model, qk, qdk, u, wind, contact, scales);
  };
  const Vec8 k1q = qd, k1v = accel(q, qd);
  const Vec8 k2q = qd + 0.5 * h * k1v, k2v = accel(q + 0.5 * h * k1q, k2q);
  const Vec8 k3q = qd + 0.5 * h * k2v, k3v = accel(q + 0.5 * h * k2q, k3q);
  const Vec8 k4q = qd + h * k3v, k4v = accel(q + h * k3q, k4q);
  q += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  qd += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
}

// ============================================================================
// Scenario orchestration
// ============================================================================

SimLog run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  validate_dob_robustness(cfg.dob);
  require_stable_impedance(cfg.impedance);

  const double dt = cfg.control_dt;
  const int ticks = static_cast<int>(std::llround(cfg.duration / dt));

  const DynamicsModel model(cfg.robot);
  OuterLoopController ctrl(cfg.impedance, cfg.dob, cfg.robot, dt);
  FtrlsEstimator estimator(cfg.ftrls, dt);

  Vec28 h0 = Vec28::Zero();
  if (cfg.estimator_seed == EstimatorSeed::kNominal)
    h0.head<12>() = model.true_inertial_params();
  estimator.initialize(h0);

  GaussianNoise rng(cfg.rng_seed);
  const WindParams* wind = cfg.wind_enabled ? &cfg.wind : nullptr;
  const ContactParams* contact = cfg.contact_enabled ? &cfg.contact : nullptr;

  // Rate estimation: every channel is smoothed by the observer-bandwidth
  // low-pass; the joint channels enter as finite differences of the measured
  // joint angles because only positions are sensed there.
  LowPassBank<8> rate_bank(cfg.dob.gv, dt);
  LowPassBank<8> accel_bank(cfg.ftrls.diff_cutoff_rad_s, dt);

  SimLog log(simlog_columns(), dt);
  log.reserve_rows(ticks);
  std::vector<double> row(static_cast<size_t>(log.cols()), 0.0);

  Vec8 q = cfg.q0;
  Vec8 qd = Vec8::Zero();

  Vec2 joints_meas_prev = Vec2::Zero();
  Vec8 qd_f_prev = Vec8::Zero();
  Mat8x28 Y_prev = Mat8x28::Zero();
  Vec8 tau_applied_prev = Vec8::Zero();
  bool has_prev_tick = false;

  for (int k = 0; k < ticks; ++k) {
    const double t = k * dt;
    try {
      // --- measure -----------------------------------------------------
      const Measurement meas = measure(q, qd, rng, cfg.noise);
      const Vec2 joints_meas(meas.q(kJoint1), meas.q(kJoint2));
      Vec8 qd_raw;
      qd_raw.head<6>() = meas.base_rates;
      if (has_prev_tick) {
        qd_raw(kJoint1) = (joints_meas(0) - joints_meas_prev(0)) / dt;
        qd_raw(kJoint2) = (joints_meas(1) - joints_meas_prev(1)) / dt;
      } else {
        qd_raw(kJoint1) = 0.0;
        qd_raw(kJoint2) = 0.0;
      }
      joints_meas_prev = joints_meas;

      if (!has_prev_tick) rate_bank.reset(qd_raw);
      const Vec8 qd_f = rate_bank.step(qd_raw);
      const Vec8 qdd_est =
          accel_bank.step(has_prev_tick ? Vec8((qd_f - qd_f_prev) / dt)
                                        : Vec8(Vec8::Zero()));
      qd_f_prev = qd_f;

      // --- identify ------------------------------------------------------
      // The identifier always digests the previous tick's regressor together
      // with the wrench that actually reached the plant during that tick
      // (rotor thrust and joint torque telemetry, not the commanded values).
      FtrlsEstimator::StepInfo est_info;
      if (has_prev_tick) est_info = estimator.step(Y_prev, tau_applied_prev);

      const JacobianSet jac_meas = jacobians(meas.q, cfg.robot);
      const Mat6x8 J_meas = task_jacobian(jac_meas);
      const Vec6 chi_meas = jac_meas.pose.vec();
      const Vec6 dchi_meas = J_meas * qd_f;
      Y_prev = build_regressor(model, meas.q, qd_f, qdd_est, J_meas, chi_meas,
                               dchi_meas);

      const Vec6 Fe_hat = estimator.contact_force(chi_meas, dchi_meas);

      // --- control -------------------------------------------------------
      if (!has_prev_tick) {
        const Vec8 tau_trim = model.gravity(meas.q);
        ctrl.initialize_trims(qd_raw, tau_trim,
                              Vec2(meas.q(kTheta), meas.q(kPhi)));
      }
      const TaskRef ref = generate_reference(cfg.trajectory, t);
      const ControlCommand cmd = ctrl.step(ref, meas.q, qd_raw, qd_f, Fe_hat);

      // --- true-plant bookkeeping for the log and the identifier ----------
      const PlantScales scales = apply_uncertainty(cfg.uncertainty, t);
      const Mat6x8 J_true = task_jacobian(q, cfg.robot);
      const Vec6 chi_true = forward_kinematics(q, cfg.robot).vec();
      const Vec6 dchi_true = J_true * qd;
      const Vec6 fe_true =
          contact != nullptr ? contact_force(*contact, chi_true, dchi_true)
                             : Vec6(Vec6::Zero());
      tau_applied_prev =
          control_matrices(q, cfg.robot).B * cmd.input.u * scales.actuator;
      has_prev_tick = true;

      // --- log -------------------------------------------------------------
      {
        int c = 0;
        row[c++] = t;
        for (int i = 0; i < 8; ++i) row[c++] = q(i);
        for (int i = 0; i < 8; ++i) row[c++] = qd(i);
        for (int i = 0; i < 6; ++i) row[c++] = chi_true(i);
        for (int i = 0; i < 6; ++i) row[c++] = ref.chi(i);
        for (int i = 0; i < 6; ++i) row[c++] = cmd.input.u(i);
        for (int i = 0; i < 8; ++i) row[c++] = cmd.tau_cmd(i);
        for (int i = 0; i < 8; ++i) row[c++] = cmd.tau_dis(i);
        for (int i = 0; i < 6; ++i) row[c++] = Fe_hat(i);
        for (int i = 0; i < 6; ++i) row[c++] = fe_true(i);
        for (int i = 0; i < 28; ++i) row[c++] = estimator.estimate()(i);
        row[c++] = est_info.forgetting;
        row[c++] = cmd.att_setpoint(0);
        row[c++] = cmd.att_setpoint(1);
        row[c++] = cmd.input.thrust_saturated ? 1.0 : 0.0;
        row[c++] = cmd.input.joint_saturated ? 1.0 : 0.0;
        row[c++] = cmd.dls_active ? 1.0 : 0.0;
        row[c++] = cmd.tilt_guard_active ? 1.0 : 0.0;
        row[c++] = est_info.reset ? 1.0 : 0.0;
        log.add_row(row);
      }
      log.events.thrust_saturation_ticks += cmd.input.thrust_saturated ? 1 : 0;
      log.events.joint_saturation_ticks += cmd.input.joint_saturated ? 1 : 0;
      log.events.dls_ticks += cmd.dls_active ? 1 : 0;
      log.events.tilt_guard_ticks += cmd.tilt_guard_active ? 1 : 0;
      log.events.estimator_resets += est_info.reset ? 1 : 0;

      // --- integrate -------------------------------------------------------
      const double h = dt / cfg.physics_substeps;
      for (int s = 0; s < cfg.physics_substeps; ++s)
        rk4_plant_step(model, q, qd, cmd.input.u, wind, contact, h, scales);

      if (!q.allFinite() || !qd.allFinite() || q.norm() > cfg.divergence_norm ||
          qd.norm() > cfg.divergence_norm) {
        log.events.diverged = true;
        log.events.divergence_time = t;
        log.events.divergence_reason = "state norm exceeded the divergence bound";
        break;
      }
    } catch (const GimbalSingularity& e) {
      log.events.diverged = true;
      log.events.divergence_time = t;
      log.events.divergence_reason = std::string("gimbal singularity: ") + e.what();
      break;
    } catch (const AllocationSingular& e) {
      log.events.diverged = true;
      log.events.divergence_time = t;
      log.events.divergence_reason = std::string("allocation singular: ") + e.what();
      break;
    }
  }

  return log;
}

}  // namespace aeroarm
