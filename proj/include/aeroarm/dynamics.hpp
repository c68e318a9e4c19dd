#pragma once

#include "aeroarm/spatial_kinematics.hpp"

#include <vector>

namespace aeroarm {

struct DynamicsTerms {
  Mat8 M = Mat8::Zero();
  Mat8 C = Mat8::Zero();
  Vec8 G = Vec8::Zero();
};

// Thrusts and drag torques produced by the four rotors at the given speeds.
struct RotorWrench {
  Vec4 thrust;  // N
  Vec4 drag;    // N*m
};

// Maps rotor speeds (rad/s) to per-rotor thrust and drag. Throws NegativeSpeed.
[[nodiscard]] RotorWrench rotor_wrench(const Vec4& omega, const RobotParams& params);

struct ControlMatrices {
  // Mixer with moment rows in generalized-coordinate order (yaw, pitch, roll).
  Mat8x6 N = Mat8x6::Zero();
  // Generalized-force map: tau = B * u, u = (F1..F4, tau_m1, tau_m2).
  Mat8x6 B = Mat8x6::Zero();
  // Rows of B for (z, psi, theta, phi, theta1, theta2); square and invertible
  // away from the pitch singularity.
  Mat6 B6 = Mat6::Zero();
};

[[nodiscard]] ControlMatrices control_matrices(const Vec8& q, const RobotParams& params);

// Lagrangian dynamics of the vehicle-plus-arm system,
//   M(q) qdd + C(q, qd) qd + G(q) + tau_w + tau_l = B(q) u.
//
// Every body is expressed as a weighted sum of primitive inertial contributions
// (mass at a frame origin, first moment along an axis, rotary inertia), which
// makes the interaction torque exactly linear in a 12-entry parameter vector.
// Point masses at chain-frame origins are reducible to parent-frame primitives
// (parallel-axis identities), so the naive per-body parametrization is rank
// deficient; the basis below is the regrouped, fully identifiable one:
//   h = (mB, fBx, fBy, Ix, Iy, Iz, Ixy, mJ1, f1, J1, f2, J2)
// where mB is mass carried at the vehicle origin, fB* are vehicle first
// moments in the body xy-plane (zero for the symmetric platform), I* are body
// inertia entries less the mount-rod regrouping, mJ1 is mass carried at the
// shoulder, and f*/J* are link first/second moments about their joints with
// the outboard point masses folded in.
class DynamicsModel {
 public:
  static constexpr int kNumInertialParams = 12;

  explicit DynamicsModel(RobotParams params);

  [[nodiscard]] const RobotParams& params() const { return params_; }

  // Inertial parameter vector consistent with params().
  [[nodiscard]] Vec12 true_inertial_params() const;

  [[nodiscard]] Mat8 mass_matrix(const Vec8& q) const;
  [[nodiscard]] Mat8 mass_matrix(const Vec8& q, const Vec12& h) const;

  // M, C, G with C built from Christoffel symbols of M (central differences,
  // step 1e-6; M does not depend on x, y, z so only five directions are probed).
  [[nodiscard]] DynamicsTerms dynamics_terms(const Vec8& q, const Vec8& qd) const;
  [[nodiscard]] DynamicsTerms dynamics_terms(const Vec8& q, const Vec8& qd,
                                             const Vec12& h) const;

  [[nodiscard]] Vec8 gravity(const Vec8& q) const;
  [[nodiscard]] double kinetic_energy(const Vec8& q, const Vec8& qd) const;
  [[nodiscard]] double potential_energy(const Vec8& q) const;
  [[nodiscard]] double total_energy(const Vec8& q, const Vec8& qd) const;

  // Columns are d(M qdd + C qd + G)/dh_k; exact by construction.
  [[nodiscard]] Mat8x12 inertial_regressor(const Vec8& q, const Vec8& qd,
                                           const Vec8& qdd) const;

  // Solves M qdd = B u * actuator_scale - C qd - G - tau_w - tau_l with the
  // mass matrix scaled by mass_scale (robustness-step hooks; both default 1).
  [[nodiscard]] Vec8 forward_dynamics(const Vec8& q, const Vec8& qd, const Vec6& u,
                                      const Vec8& tau_w, const Vec8& tau_l,
                                      double mass_scale = 1.0,
                                      double actuator_scale = 1.0) const;

  struct DiagBounds {
    Vec8 min = Vec8::Zero();
    Vec8 max = Vec8::Zero();
  };
  // Extremes of the diagonal inertia entries over a sampled operating box
  // (|theta|, |phi| <= 0.6 rad, |joints| <= 2.35 rad). Used to validate
  // inner-loop gain choices against the worst-case plant inertia.
  [[nodiscard]] DiagBounds diag_inertia_bounds() const;

 private:
  enum Frame : int { kBase = 0, kLink1 = 1, kLink2 = 2 };
  enum class PrimKind { kMassAtOrigin, kFirstMoment, kRotary };

  struct Primitive {
    PrimKind kind;
    Frame frame;
    double weight;  // scale applied on top of the basis parameter
    Vec3 axis = Vec3::Zero();
    Mat3 I_local = Mat3::Zero();
  };

  struct FramePass {
    Mat3 R[3];
    Mat3x8 Jv[3];
    Mat3x8 Jw[3];
    double z_origin[3];
  };

  [[nodiscard]] FramePass frame_pass(const Vec8& q) const;
  void accumulate(const FramePass& f, const Primitive& prim, double h, Mat8* M,
                  Vec8* G, double* V) const;
  [[nodiscard]] Mat8 assemble_mass(const FramePass& f, const Vec12& h) const;
  void assemble_all(const FramePass& f, const Vec12& h, Mat8* M, Vec8* G,
                    double* V) const;
  // dM/dq_k for k in {psi, theta, phi, theta1, theta2}, central differences.
  void mass_matrix_gradient(const Vec8& q, const Vec12& h, Mat8 dM[5]) const;
  [[nodiscard]] static Mat8 christoffel(const Mat8 dM[5], const Vec8& qd);

  RobotParams params_;
  std::vector<std::vector<Primitive>> basis_;  // one primitive list per h entry
};

}  // namespace aeroarm
