#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aeroarm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using MatX = Eigen::MatrixXd;
using Mat3x8 = Eigen::Matrix<double, 3, 8>;
using Mat6x2 = Eigen::Matrix<double, 6, 2>;
using Mat6x4 = Eigen::Matrix<double, 6, 4>;
using Mat8x4 = Eigen::Matrix<double, 8, 4>;
using Mat6x8 = Eigen::Matrix<double, 6, 8>;
using Mat8x6 = Eigen::Matrix<double, 8, 6>;
using Mat8x12 = Eigen::Matrix<double, 8, 12>;

inline constexpr double kGravity = 9.81;  // m/s^2

// Exclusion band (rad) kept around the |pitch| = pi/2 representation singularity,
// applied both to the vehicle attitude and to the extracted end-effector angles.
inline constexpr double kGimbalMargin = 0.05;

// Actuator limits: rotor thrusts in N, joint torques in N*m.
inline constexpr double kMinRotorThrust = 0.0;
inline constexpr double kMaxRotorThrust = 6.0;
inline constexpr std::array<double, 2> kMaxJointTorque = {0.7, 0.4};

// Generalized-coordinate layout, q in R^8.
enum CoordIndex : int { kX = 0, kY, kZ, kPsi, kTheta, kPhi, kJoint1, kJoint2 };

// Indices of q that the controller groups as zeta = (x, y, z, psi, theta1, theta2)
// and sigma = (theta, phi).
inline constexpr std::array<int, 6> kZetaIndex = {kX, kY, kZ, kPsi, kJoint1, kJoint2};
inline constexpr std::array<int, 2> kSigmaIndex = {kTheta, kPhi};

struct GimbalSingularity : std::domain_error {
  using std::domain_error::domain_error;
};
struct NegativeSpeed : std::domain_error {
  using std::domain_error::domain_error;
};
struct SolveFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConstraintViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CovarianceBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllocationSingular : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnstableImpedanceConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceDetected : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IOFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ZYX (yaw-pitch-roll) Euler angles.
struct EulerZYX {
  double psi = 0.0;    // yaw, about world z
  double theta = 0.0;  // pitch, about intermediate y
  double phi = 0.0;    // roll, about body x

  [[nodiscard]] Vec3 vec() const { return {psi, theta, phi}; }
  static EulerZYX from_vec(const Vec3& v) { return {v(0), v(1), v(2)}; }
};

struct GeneralizedState {
  Vec8 q = Vec8::Zero();
  Vec8 qd = Vec8::Zero();

  [[nodiscard]] EulerZYX attitude() const { return {q(kPsi), q(kTheta), q(kPhi)}; }
  [[nodiscard]] Vec3 position() const { return q.head<3>(); }
  [[nodiscard]] Vec2 joints() const { return {q(kJoint1), q(kJoint2)}; }
};

// End-effector pose; chi = (p, psi, theta, phi) stacked as a 6-vector.
struct TaskPose {
  Vec3 p = Vec3::Zero();
  EulerZYX ang;

  [[nodiscard]] Vec6 vec() const {
    Vec6 chi;
    chi << p, ang.psi, ang.theta, ang.phi;
    return chi;
  }
  static TaskPose from_vec(const Vec6& chi) {
    TaskPose out;
    out.p = chi.head<3>();
    out.ang = EulerZYX::from_vec(chi.tail<3>());
    return out;
  }
};

// Physical constants of the vehicle and arm. Defaults are the reference platform.
struct RobotParams {
  double m = 1.0;    // quadrotor mass, kg
  double m0 = 0.030; // arm mount mass, kg
  double m1 = 0.055; // link-1 mass, kg
  double m2 = 0.112; // link-2 mass, kg

  double Ix = 13.2e-3;  // body inertia about x_b, N*m*s^2
  double Iy = 12.5e-3;  // body inertia about y_b
  double Iz = 23.5e-3;  // body inertia about z_b
  double Ir = 33.2e-6;  // rotor inertia (recorded; rotor gyroscopics not modeled)

  double d = 0.223;   // rotor arm, m
  double L0 = 0.030;  // mount length, m
  double L1 = 0.070;  // link-1 length, m
  double L2 = 0.085;  // link-2 length, m

  std::array<double, 4> Kf = {1.6e-5, 1.2e-5, 1.7e-5, 1.5e-5};  // thrust coeff, N*s^2
  std::array<double, 4> Km = {3.9e-7, 2.8e-7, 4.4e-7, 3.1e-7};  // drag coeff, N*m*s^2

  [[nodiscard]] double total_mass() const { return m + m0 + m1 + m2; }

  void validate() const {
    if (m <= 0 || m0 <= 0 || m1 <= 0 || m2 <= 0)
      throw ConfigError("robot masses must be positive");
    if (Ix <= 0 || Iy <= 0 || Iz <= 0)
      throw ConfigError("body inertias must be positive");
    if (d <= 0 || L0 <= 0 || L1 <= 0 || L2 <= 0)
      throw ConfigError("geometry lengths must be positive");
    for (int j = 0; j < 4; ++j)
      if (Kf[j] <= 0 || Km[j] <= 0)
        throw ConfigError("rotor coefficients must be positive");
  }
};

// Rotor thrusts (N) and joint torques (N*m) after clamping, with saturation flags.
struct ActuatorInput {
  Vec6 u = Vec6::Zero();  // (F1, F2, F3, F4, tau_m1, tau_m2)
  bool thrust_saturated = false;
  bool joint_saturated = false;

  [[nodiscard]] bool saturated() const { return thrust_saturated || joint_saturated; }
};

}  // namespace aeroarm
