#include "aeroarm/dynamics.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace aeroarm {
namespace {

constexpr double kFdStep = 1e-6;  // central-difference step for dM/dq

// M(q) depends on attitude and joint angles only; the first gradient direction
// worth probing is psi.
constexpr int kFirstShapeCoord = kPsi;
constexpr int kNumShapeCoords = 5;

}  // namespace

RotorWrench rotor_wrench(const Vec4& omega, const RobotParams& params) {
  RotorWrench out;
  for (int j = 0; j < 4; ++j) {
    if (omega(j) < 0.0)
      throw NegativeSpeed("rotor_wrench: negative rotor speed");
    const double w2 = omega(j) * omega(j);
    out.thrust(j) = params.Kf[j] * w2;
    out.drag(j) = params.Km[j] * w2;
  }
  return out;
}

ControlMatrices control_matrices(const Vec8& q, const RobotParams& params) {
  require_pitch_in_range(q(kTheta), "control_matrices");
  const EulerZYX att{q(kPsi), q(kTheta), q(kPhi)};
  const Mat3 R_b = rotation_from_euler(att);
  const Mat3 T_b = euler_rate_matrix(att);

  Eigen::RowVector4d yaw_row, pitch_row, roll_row;
  yaw_row << params.Km[0] / params.Kf[0], -params.Km[1] / params.Kf[1],
      params.Km[2] / params.Kf[2], -params.Km[3] / params.Kf[3];
  pitch_row << -params.d, 0.0, params.d, 0.0;
  roll_row << 0.0, -params.d, 0.0, params.d;

  ControlMatrices out;
  out.N.row(2).head<4>().setOnes();
  out.N.row(3).head<4>() = yaw_row;
  out.N.row(4).head<4>() = pitch_row;
  out.N.row(5).head<4>() = roll_row;
  out.N(6, 4) = 1.0;
  out.N(7, 5) = 1.0;

  // Body moments per unit thrust in (x, y, z) axis order; generalized torques on
  // the Euler coordinates follow from tau_Phi = T_b^T * m_world.
  Eigen::Matrix<double, 3, 4> moment_xyz;
  moment_xyz.row(0) = roll_row;
  moment_xyz.row(1) = pitch_row;
  moment_xyz.row(2) = yaw_row;

  out.B.block<3, 4>(0, 0) = R_b.col(2) * Eigen::RowVector4d::Ones();
  out.B.block<3, 4>(3, 0) = T_b.transpose() * R_b * moment_xyz;
  out.B(6, 4) = 1.0;
  out.B(7, 5) = 1.0;

  out.B6 = out.B.block<6, 6>(2, 0);
  return out;
}

DynamicsModel::DynamicsModel(RobotParams params) : params_(params) {
  params_.validate();
  const Vec3 down(0.0, 0.0, -1.0);
  const Mat3 rod_perp = Vec3(1.0, 1.0, 0.0).asDiagonal();
  Mat3 xy_product = Mat3::Zero();
  xy_product(0, 1) = xy_product(1, 0) = 1.0;

  basis_.resize(kNumInertialParams);
  // 0: mass carried at the vehicle origin.
  basis_[0] = {{PrimKind::kMassAtOrigin, kBase, 1.0}};
  // 1-2: vehicle first moments in the body xy-plane.
  basis_[1] = {{PrimKind::kFirstMoment, kBase, 1.0, Vec3::UnitX()}};
  basis_[2] = {{PrimKind::kFirstMoment, kBase, 1.0, Vec3::UnitY()}};
  // 3-6: body inertia entries.
  basis_[3] = {{PrimKind::kRotary, kBase, 1.0, Vec3::Zero(), Vec3(1, 0, 0).asDiagonal()}};
  basis_[4] = {{PrimKind::kRotary, kBase, 1.0, Vec3::Zero(), Vec3(0, 1, 0).asDiagonal()}};
  basis_[5] = {{PrimKind::kRotary, kBase, 1.0, Vec3::Zero(), Vec3(0, 0, 1).asDiagonal()}};
  basis_[6] = {{PrimKind::kRotary, kBase, 1.0, Vec3::Zero(), xy_product}};
  // 7-9: mass carried at the shoulder, link-1 first/second moments about it.
  basis_[7] = {{PrimKind::kMassAtOrigin, kLink1, 1.0}};
  basis_[8] = {{PrimKind::kFirstMoment, kLink1, 1.0, down}};
  basis_[9] = {{PrimKind::kRotary, kLink1, 1.0, Vec3::Zero(), rod_perp}};
  // 10-11: link-2 first/second moments about the elbow.
  basis_[10] = {{PrimKind::kFirstMoment, kLink2, 1.0, down}};
  basis_[11] = {{PrimKind::kRotary, kLink2, 1.0, Vec3::Zero(), rod_perp}};
}

Vec12 DynamicsModel::true_inertial_params() const {
  // Parallel-axis regrouping: a point mass at a chain-frame origin equals the
  // same mass at the parent origin plus first- and second-moment terms, so the
  // mount rod folds into (mB, mJ1, Ix, Iy) and the mass hanging at the elbow
  // folds into (mJ1, f1, J1).
  const RobotParams& p = params_;
  const double rod_regroup = p.m0 * p.L0 * p.L0 / 6.0;
  Vec12 h;
  h << p.m + p.m0 / 2.0,                      // mB
      0.0, 0.0,                               // fBx, fBy
      p.Ix - rod_regroup, p.Iy - rod_regroup, p.Iz,  // Ix, Iy, Iz
      0.0,                                    // Ixy
      p.m0 / 2.0 + p.m1 + p.m2,               // mJ1
      p.m1 * p.L1 / 2.0 + p.m2 * p.L1,        // f1
      p.m1 * p.L1 * p.L1 / 3.0 + p.m2 * p.L1 * p.L1,  // J1
      p.m2 * p.L2 / 2.0,                      // f2
      p.m2 * p.L2 * p.L2 / 3.0;               // J2
  return h;
}

DynamicsModel::FramePass DynamicsModel::frame_pass(const Vec8& q) const {
  const EulerZYX att{q(kPsi), q(kTheta), q(kPhi)};
  const Mat3 R_b = rotation_from_euler(att);
  const Mat3 T_b = euler_rate_matrix(att);
  const ArmChain arm = arm_chain({q(kJoint1), q(kJoint2)}, params_);

  FramePass f;
  f.R[kBase] = R_b;
  f.R[kLink1] = R_b * arm.R1;
  f.R[kLink2] = R_b * arm.R2;

  const Vec3 r1 = R_b * arm.joint1_origin;
  const Vec3 r2 = R_b * arm.joint2_origin;
  const Vec3 axis1_w = R_b * arm.axis1;
  const Vec3 axis2_w = R_b * arm.axis2;

  for (int i = 0; i < 3; ++i) {
    f.Jv[i].setZero();
    f.Jw[i].setZero();
    f.Jv[i].block<3, 3>(0, 0).setIdentity();
    f.Jw[i].block<3, 3>(0, kPsi) = T_b;
  }
  f.Jv[kLink1].block<3, 3>(0, kPsi) = -skew(r1) * T_b;
  f.Jw[kLink1].col(kJoint1) = axis1_w;

  f.Jv[kLink2].block<3, 3>(0, kPsi) = -skew(r2) * T_b;
  f.Jv[kLink2].col(kJoint1) =
      R_b * arm.axis1.cross(arm.joint2_origin - arm.joint1_origin);
  f.Jw[kLink2].col(kJoint1) = axis1_w;
  f.Jw[kLink2].col(kJoint2) = axis2_w;

  f.z_origin[kBase] = q(kZ);
  f.z_origin[kLink1] = q(kZ) + r1(2);
  f.z_origin[kLink2] = q(kZ) + r2(2);
  return f;
}

void DynamicsModel::accumulate(const FramePass& f, const Primitive& prim, double h,
                               Mat8* M, Vec8* G, double* V) const {
  const double w = h * prim.weight;
  if (w == 0.0) return;
  const int fr = prim.frame;
  switch (prim.kind) {
    case PrimKind::kMassAtOrigin: {
      if (M) M->noalias() += w * (f.Jv[fr].transpose() * f.Jv[fr]);
      if (G) G->noalias() += (w * kGravity) * f.Jv[fr].row(2).transpose();
      if (V) *V += w * kGravity * f.z_origin[fr];
      break;
    }
    case PrimKind::kFirstMoment: {
      const Vec3 a_w = f.R[fr] * prim.axis;
      const Mat3 S = skew(a_w);
      if (M) {
        const Mat8 A = f.Jv[fr].transpose() * (S * f.Jw[fr]);
        M->noalias() -= w * (A + A.transpose());
      }
      if (G) G->noalias() -= (w * kGravity) * (S * f.Jw[fr]).row(2).transpose();
      if (V) *V += w * kGravity * a_w(2);
      break;
    }
    case PrimKind::kRotary: {
      const Mat3 I_w = f.R[fr] * prim.I_local * f.R[fr].transpose();
      if (M) M->noalias() += w * (f.Jw[fr].transpose() * (I_w * f.Jw[fr]));
      break;
    }
  }
}

void DynamicsModel::assemble_all(const FramePass& f, const Vec12& h, Mat8* M,
                                 Vec8* G, double* V) const {
  if (M) M->setZero();
  if (G) G->setZero();
  if (V) *V = 0.0;
  for (int k = 0; k < kNumInertialParams; ++k)
    for (const Primitive& prim : basis_[k])
      accumulate(f, prim, h(k), M, G, V);
}

Mat8 DynamicsModel::assemble_mass(const FramePass& f, const Vec12& h) const {
  Mat8 M;
  assemble_all(f, h, &M, nullptr, nullptr);
  return M;
}

Mat8 DynamicsModel::mass_matrix(const Vec8& q) const {
  return mass_matrix(q, true_inertial_params());
}

Mat8 DynamicsModel::mass_matrix(const Vec8& q, const Vec12& h) const {
  return assemble_mass(frame_pass(q), h);
}

void DynamicsModel::mass_matrix_gradient(const Vec8& q, const Vec12& h,
                                         Mat8 dM[5]) const {
  for (int a = 0; a < kNumShapeCoords; ++a) {
    Vec8 qp = q, qm = q;
    qp(kFirstShapeCoord + a) += kFdStep;
    qm(kFirstShapeCoord + a) -= kFdStep;
    dM[a] = (assemble_mass(frame_pass(qp), h) - assemble_mass(frame_pass(qm), h)) /
            (2.0 * kFdStep);
  }
}

Mat8 DynamicsModel::christoffel(const Mat8 dM[5], const Vec8& qd) {
  // c_ijk = 0.5 * (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i); C_ij = sum_k c_ijk qd_k.
  auto dm = [&dM](int dir, int r, int c) -> double {
    return dir < kFirstShapeCoord ? 0.0 : dM[dir - kFirstShapeCoord](r, c);
  };
  Mat8 C;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double sum = 0.0;
      for (int k = 0; k < 8; ++k) {
        const double qdk = qd(k);
        if (qdk == 0.0) continue;
        sum += qdk * (dm(k, i, j) + dm(j, i, k) - dm(i, j, k));
      }
      C(i, j) = 0.5 * sum;
    }
  }
  return C;
}

DynamicsTerms DynamicsModel::dynamics_terms(const Vec8& q, const Vec8& qd) const {
  return dynamics_terms(q, qd, true_inertial_params());
}

DynamicsTerms DynamicsModel::dynamics_terms(const Vec8& q, const Vec8& qd,
                                            const Vec12& h) const {
  DynamicsTerms out;
  assemble_all(frame_pass(q), h, &out.M, &out.G, nullptr);
  Mat8 dM[5];
  mass_matrix_gradient(q, h, dM);
  out.C = christoffel(dM, qd);
  return out;
}

Vec8 DynamicsModel::gravity(const Vec8& q) const {
  Vec8 G;
  assemble_all(frame_pass(q), true_inertial_params(), nullptr, &G, nullptr);
  return G;
}

double DynamicsModel::kinetic_energy(const Vec8& q, const Vec8& qd) const {
  return 0.5 * qd.dot(mass_matrix(q) * qd);
}

double DynamicsModel::potential_energy(const Vec8& q) const {
  double V = 0.0;
  assemble_all(frame_pass(q), true_inertial_params(), nullptr, nullptr, &V);
  return V;
}

double DynamicsModel::total_energy(const Vec8& q, const Vec8& qd) const {
  return kinetic_energy(q, qd) + potential_energy(q);
}

Mat8x12 DynamicsModel::inertial_regressor(const Vec8& q, const Vec8& qd,
                                          const Vec8& qdd) const {
  std::array<Mat8, kNumInertialParams> Mk;
  std::array<Vec8, kNumInertialParams> Gk;
  {
    const FramePass f = frame_pass(q);
    for (int k = 0; k < kNumInertialParams; ++k) {
      Mk[k].setZero();
      Gk[k].setZero();
      for (const Primitive& prim : basis_[k])
        accumulate(f, prim, 1.0, &Mk[k], &Gk[k], nullptr);
    }
  }

  // Per-basis mass-matrix gradients share the perturbed frame passes.
  std::array<std::array<Mat8, 5>, kNumInertialParams> dMk;
  for (int a = 0; a < kNumShapeCoords; ++a) {
    Vec8 qp = q, qm = q;
    qp(kFirstShapeCoord + a) += kFdStep;
    qm(kFirstShapeCoord + a) -= kFdStep;
    const FramePass fp = frame_pass(qp);
    const FramePass fm = frame_pass(qm);
    for (int k = 0; k < kNumInertialParams; ++k) {
      Mat8 Mp = Mat8::Zero(), Mm = Mat8::Zero();
      for (const Primitive& prim : basis_[k]) {
        accumulate(fp, prim, 1.0, &Mp, nullptr, nullptr);
        accumulate(fm, prim, 1.0, &Mm, nullptr, nullptr);
      }
      dMk[k][a] = (Mp - Mm) / (2.0 * kFdStep);
    }
  }

  Mat8x12 Y;
  for (int k = 0; k < kNumInertialParams; ++k) {
    const Mat8 Ck = christoffel(dMk[k].data(), qd);
    Y.col(k) = Mk[k] * qdd + Ck * qd + Gk[k];
  }
  return Y;
}

Vec8 DynamicsModel::forward_dynamics(const Vec8& q, const Vec8& qd, const Vec6& u,
                                     const Vec8& tau_w, const Vec8& tau_l,
                                     double mass_scale, double actuator_scale) const {
  const DynamicsTerms t = dynamics_terms(q, qd);
  const ControlMatrices cm = control_matrices(q, params_);
  const Vec8 rhs =
      actuator_scale * (cm.B * u) - t.C * qd - t.G - tau_w - tau_l;
  const Mat8 M = mass_scale * t.M;
  Eigen::LDLT<Mat8> ldlt(M);
  if (ldlt.info() != Eigen::Success)
    throw SolveFailure("forward_dynamics: mass matrix factorization failed");
  const Vec8 qdd = ldlt.solve(rhs);
  if (!qdd.allFinite())
    throw SolveFailure("forward_dynamics: non-finite acceleration");
  return qdd;
}

DynamicsModel::DiagBounds DynamicsModel::diag_inertia_bounds() const {
  DiagBounds out;
  out.min = Vec8::Constant(std::numeric_limits<double>::infinity());
  out.max = Vec8::Constant(-std::numeric_limits<double>::infinity());

  const std::array<double, 3> psis = {0.0, 0.8, 2.2};
  const std::array<double, 5> tilts = {-0.6, -0.3, 0.0, 0.3, 0.6};
  const std::array<double, 7> joints = {-2.35, -1.57, -0.78, 0.0, 0.78, 1.57, 2.35};

  Vec8 q = Vec8::Zero();
  for (double psi : psis)
    for (double th : tilts)
      for (double ph : tilts)
        for (double j1 : joints)
          for (double j2 : joints) {
            q(kPsi) = psi;
            q(kTheta) = th;
            q(kPhi) = ph;
            q(kJoint1) = j1;
            q(kJoint2) = j2;
            const Mat8 M = mass_matrix(q);
            out.min = out.min.cwiseMin(M.diagonal());
            out.max = out.max.cwiseMax(M.diagonal());
          }
  return out;
}

}  // namespace aeroarm
