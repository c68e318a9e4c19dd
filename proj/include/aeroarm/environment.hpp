#pragma once

#include "aeroarm/spatial_kinematics.hpp"
#include "aeroarm/types.hpp"

namespace aeroarm {

// Compliant planar environment the tool interacts with: a diagonal
// spring-damper anchored at a fixed task-space pose. The returned force is the
// one the robot exerts on the environment; it enters the equations of motion
// on the left-hand side through the task-jacobian transpose.
struct ContactParams {
  Vec6 stiffness = Vec6::Constant(0.1);
  Vec6 damping = Vec6::Constant(0.01);
  Vec6 anchor = Vec6::Zero();

  void validate() const {
    if ((stiffness.array() < 0.0).any() || (damping.array() < 0.0).any())
      throw ConfigError("ContactParams: stiffness and damping must be >= 0");
  }
};

[[nodiscard]] inline Vec6 contact_force(const ContactParams& p, const Vec6& chi,
                                        const Vec6& dchi) {
  return p.stiffness.asDiagonal() * (chi - p.anchor) + p.damping.asDiagonal() * dchi;
}

[[nodiscard]] inline Vec8 contact_generalized(const Mat6x8& J_task,
                                              const Vec6& force) {
  return J_task.transpose() * force;
}

// Regressor for the diagonal contact model, measured from a zero anchor:
// columns scale the six stiffness then six damping coefficients.
[[nodiscard]] inline Eigen::Matrix<double, 8, 12> contact_regressor(
    const Mat6x8& J_task, const Vec6& chi, const Vec6& dchi) {
  Eigen::Matrix<double, 6, 12> basis = Eigen::Matrix<double, 6, 12>::Zero();
  basis.leftCols<6>() = chi.asDiagonal();
  basis.rightCols<6>() = dchi.asDiagonal();
  return J_task.transpose() * basis;
}

// Height-dependent horizontal gusts on the airframe. The planar force grows
// with altitude squared and couples to the tilt angles:
//   F_wx = f_wx1 z^2 sin(theta) + f_wx2 z^2 cos(theta)
//   F_wy = f_wy1 z^2 sin(phi)   + f_wy2 z^2 cos(phi)
// with coefficients set by the drag areas, the reference shear (V/z0)^2 and
// the wind heading.
struct WindParams {
  double Ae1 = 0.16;          // m^2, tilt-aligned drag area
  double Ae2 = 0.032;         // m^2, transverse drag area
  double z0 = 1.0;            // m, reference altitude
  double Vwz0 = 3.0;          // m/s, wind speed at z0
  double heading_rad = M_PI / 6.0;

  void validate() const {
    if (Ae1 < 0.0 || Ae2 < 0.0 || z0 <= 0.0 || Vwz0 < 0.0)
      throw ConfigError("WindParams: areas/speeds must be >= 0 and z0 > 0");
  }
};

// (f_wx1, f_wx2, f_wy1, f_wy2).
[[nodiscard]] inline Vec4 wind_coefficients(const WindParams& p) {
  const double shear = 0.61 * (p.Vwz0 / p.z0) * (p.Vwz0 / p.z0);
  Vec4 c;
  c << shear * p.Ae1 * std::cos(p.heading_rad),
      shear * p.Ae2 * std::cos(p.heading_rad),
      shear * p.Ae1 * std::sin(p.heading_rad),
      shear * p.Ae2 * std::sin(p.heading_rad);
  return c;
}

// Columns scale the four wind coefficients; only the x and y rows are nonzero.
[[nodiscard]] inline Mat8x4 wind_regressor(double z, double theta, double phi) {
  Mat8x4 Y = Mat8x4::Zero();
  const double z2 = z * z;
  Y(kX, 0) = z2 * std::sin(theta);
  Y(kX, 1) = z2 * std::cos(theta);
  Y(kY, 2) = z2 * std::sin(phi);
  Y(kY, 3) = z2 * std::cos(phi);
  return Y;
}

[[nodiscard]] inline Vec8 wind_generalized(const Vec4& coeffs, double z,
                                           double theta, double phi) {
  return wind_regressor(z, theta, phi) * coeffs;
}

}  // namespace aeroarm
