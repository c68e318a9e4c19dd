#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aeroarm/environment.hpp"
#include "aeroarm/ftrls_estimator.hpp"
#include "aeroarm/impedance_outer.hpp"

namespace aeroarm {

// ============================================================================
// Reference trajectory
// ============================================================================

// One orientation waypoint of the end effector: (psi_e, theta_e, phi_e) held
// together with the time at which the pose should be reached.
struct OrientationWaypoint {
  Vec3 angles = Vec3::Zero();
  double time = 0.0;  // s
};

struct TrajectorySpec {
  enum class Mode { kHold, kHelix };

  Mode mode = Mode::kHelix;

  // Circular helix for the translational reference.
  double helix_radius = 0.5;       // m
  double helix_angular_rate = 0.4; // rad/s
  double helix_climb_rate = 0.05;  // m/s
  Vec3 helix_center = Vec3(0.0, 0.0, 1.0);

  // Smooth orientation program: fifth-order segments between waypoints with
  // zero velocity and acceleration at both ends of every segment.
  std::vector<OrientationWaypoint> orientation = {
      {Vec3(0.0, 0.0, 0.0), 0.0},
      {Vec3(0.25, 0.15, -0.12), 12.0},
      {Vec3(0.05, -0.10, 0.10), 24.0},
  };

  // Full task pose held (with zero rates) when mode == kHold.
  Vec6 hold_pose = (Vec6() << 0.5, 0.0, 1.0, 0.0, 0.0, 0.0).finished();

  void validate() const;
};

// Task-space reference sample with analytic first and second derivatives.
[[nodiscard]] TaskRef generate_reference(const TrajectorySpec& spec, double t);

// ============================================================================
// Measurement model
// ============================================================================

struct NoiseParams {
  bool enabled = true;
  double mean = 1e-3;
  double std = 5e-3;

  void validate() const {
    if (std < 0.0) throw ConfigError("NoiseParams: std must be >= 0");
  }
};

// Deterministic Gaussian sampler: a 64-bit Mersenne Twister feeding a
// Box-Muller transform. Implemented directly (rather than through
// std::normal_distribution) so identical seeds give identical streams on any
// standard library.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : rng_(seed) {}

  double sample(double mean, double std);

 private:
  double uniform01();  // in (0, 1]

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Sensor readout for one control tick. The measured channels are the eight
// generalized positions (vehicle pose and joint angles); measurement noise is
// added there. The vehicle rate signals come from the onboard state estimator
// and are passed through unperturbed -- every consumer still low-passes them
// at the observer rate bandwidth. The joint encoders provide only positions,
// so joint rates are left to the harness, which differentiates the measured
// joint angles and low-passes the result alongside the other rate channels.
struct Measurement {
  Vec8 q = Vec8::Zero();
  Eigen::Matrix<double, 6, 1> base_rates = Eigen::Matrix<double, 6, 1>::Zero();
};

[[nodiscard]] Measurement measure(const Vec8& q, const Vec8& qd,
                                  GaussianNoise& rng, const NoiseParams& noise);

// ============================================================================
// Scenario configuration
// ============================================================================

// Step change in the plant applied mid-run: the plant inertia is scaled by
// mass_scale and the realized actuator wrench by actuator_scale, while every
// controller-side nominal stays untouched.
struct UncertaintySpec {
  bool enabled = true;
  double time = 15.0;          // s
  double mass_scale = 1.10;
  double actuator_scale = 0.90;

  void validate() const {
    if (time < 0.0) throw ConfigError("UncertaintySpec: time must be >= 0");
    if (mass_scale <= 0.0 || actuator_scale < 0.0)
      throw ConfigError("UncertaintySpec: scales must be positive");
  }
};

struct PlantScales {
  double mass = 1.0;
  double actuator = 1.0;
};

[[nodiscard]] PlantScales apply_uncertainty(const UncertaintySpec& spec, double t);

// Initial parameter estimate handed to the online identifier.
enum class EstimatorSeed {
  kNominal,  // nominal inertial parameters, zero environment/wind
  kZero,     // all parameters zero
};

struct ScenarioConfig {
  double duration = 30.0;      // s
  double control_dt = 1e-3;    // s
  int physics_substeps = 4;
  std::uint64_t rng_seed = 1;
  double divergence_norm = 1e6;

  Vec8 q0 = (Vec8() << 0.5, 0.0, 1.185, 0.0, 0.0, 0.0, 0.0, 0.0).finished();

  TrajectorySpec trajectory;
  NoiseParams noise;
  UncertaintySpec uncertainty;

  bool contact_enabled = true;
  ContactParams contact;
  bool wind_enabled = true;
  WindParams wind;

  RobotParams robot;
  ImpedanceConfig impedance;
  DObConfig dob;
  FtrlsConfig ftrls;
  EstimatorSeed estimator_seed = EstimatorSeed::kNominal;

  ScenarioConfig();

  void validate() const;
};

// ============================================================================
// Simulation log
// ============================================================================

struct SimEvents {
  int thrust_saturation_ticks = 0;
  int joint_saturation_ticks = 0;
  int dls_ticks = 0;
  int tilt_guard_ticks = 0;
  int estimator_resets = 0;
  bool diverged = false;
  double divergence_time = -1.0;  // s, -1 when the run completed
  std::string divergence_reason;
};

// Uniformly sampled run record: one row per control tick, columns named with
// units. Stored dense row-major.
class SimLog {
 public:
  SimLog() = default;
  SimLog(std::vector<std::string> columns, double dt);

  [[nodiscard]] const std::vector<std::string>& columns() const { return columns_; }
  [[nodiscard]] int cols() const { return static_cast<int>(columns_.size()); }
  [[nodiscard]] int rows() const {
    return columns_.empty() ? 0 : static_cast<int>(data_.size() / columns_.size());
  }
  [[nodiscard]] double dt() const { return dt_; }

  void reserve_rows(int n) { data_.reserve(static_cast<size_t>(n) * columns_.size()); }
  void add_row(const std::vector<double>& row);

  [[nodiscard]] double value(int row, int col) const {
    return data_[static_cast<size_t>(row) * columns_.size() + static_cast<size_t>(col)];
  }
  // Column lookup by exact header name; throws ConfigError when absent.
  [[nodiscard]] int column_index(const std::string& name) const;

  [[nodiscard]] const std::vector<double>& data() const { return data_; }

  SimEvents events;

 private:
  std::vector<std::string> columns_;
  std::vector<double> data_;
  double dt_ = 0.0;
};

// Column schema used by run_scenario (and by the CSV round trip).
[[nodiscard]] std::vector<std::string> simlog_columns();

// ============================================================================
// Plant integration and scenario orchestration
// ============================================================================

// One RK4 step of the plant under a zero-order-hold actuator input. Wind and
// contact wrenches are re-evaluated from the true state at every stage; pass
// null to disable either.
void rk4_plant_step(const DynamicsModel& model, Vec8& q, Vec8& qd, const Vec6& u,
                    const WindParams* wind, const ContactParams* contact,
                    double h, const PlantScales& scales);

// Closed-loop run: per control tick the plant state is measured (with noise),
// the online identifier absorbs the previous tick's regressor/wrench pair, the
// identified contact force feeds the impedance cascade, and the resulting
// actuator input is held while the plant integrates physics_substeps RK4
// steps. A state-norm blowup, a kinematic singularity, or an allocation
// failure ends the run early with the partial log flagged in events.
[[nodiscard]] SimLog run_scenario(const ScenarioConfig& config);

}  // namespace aeroarm
