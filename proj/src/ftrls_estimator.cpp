#include "aeroarm/ftrls_estimator.hpp"

#include <cmath>

namespace aeroarm {

FtrlsEstimator::FtrlsEstimator(const FtrlsConfig& config, double dt)
    : config_(config), dt_(dt) {
  config_.validate();
  if (dt <= 0.0) throw ConfigError("FtrlsEstimator: dt must be positive");
  Rinv_ = (1.0 / config_.r0) * Mat28::Identity();
}

void FtrlsEstimator::initialize(const Vec28& h0) {
  h_ = h0;
  Rinv_ = (1.0 / config_.r0) * Mat28::Identity();
  steps_ = 0;
  resets_ = 0;
}

FtrlsEstimator::StepInfo FtrlsEstimator::step(const Mat8x28& Y,
                                              const Vec8& tau_applied) {
  StepInfo info;
  info.residual = tau_applied - Y * h_;

  const double level = config_.gamma_g * info.residual.squaredNorm();
  const double quant =
      level < 4096.0 ? std::exp2(-static_cast<double>(std::llround(level))) : 0.0;
  info.forgetting = config_.eta_min + (1.0 - config_.eta_min) * quant;

  Rinv_ = (1.0 - dt_ * info.forgetting) * Rinv_ + dt_ * (Y.transpose() * Y);
  Rinv_ = 0.5 * (Rinv_ + Rinv_.transpose()).eval();

  Eigen::LDLT<Mat28> ldlt(Rinv_);
  bool breakdown =
      ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0;
  if (!breakdown && (steps_ + 1) % config_.cond_check_period == 0) {
    const Eigen::SelfAdjointEigenSolver<Mat28> es(Rinv_,
                                                  Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    breakdown = lo <= 0.0 || hi > config_.cond_max * lo;
  }
  if (breakdown) {
    Rinv_ = (1.0 / config_.r0) * Mat28::Identity() + dt_ * (Y.transpose() * Y);
    Rinv_ = 0.5 * (Rinv_ + Rinv_.transpose()).eval();
    ldlt.compute(Rinv_);
    info.reset = true;
    ++resets_;
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
      throw CovarianceBreakdown(
          "FtrlsEstimator: information matrix not positive definite after reset");
  }

  h_ += dt_ * ldlt.solve(Y.transpose() * info.residual);
  if (!h_.allFinite())
    throw CovarianceBreakdown("FtrlsEstimator: non-finite parameter estimate");
  ++steps_;
  return info;
}

Vec6 FtrlsEstimator::contact_force(const Vec6& chi, const Vec6& dchi) const {
  const auto sc = h_.segment<6>(12);
  const auto dc = h_.segment<6>(18);
  return sc.cwiseProduct(chi) + dc.cwiseProduct(dchi);
}

Mat8x28 build_regressor(const DynamicsModel& model, const Vec8& q, const Vec8& qd,
                        const Vec8& qdd, const Mat6x8& J_task, const Vec6& chi,
                        const Vec6& dchi) {
  Mat8x28 Y;
  Y.block<8, 12>(0, 0) = model.inertial_regressor(q, qd, qdd);
  Y.block<8, 12>(0, 12) = contact_regressor(J_task, chi, dchi);
  Y.block<8, 4>(0, 24) = wind_regressor(q(kZ), q(kTheta), q(kPhi));
  return Y;
}

Vec28 stacked_true_params(const DynamicsModel& model, const ContactParams& contact,
                          const WindParams& wind) {
  Vec28 h;
  h.segment<12>(0) = model.true_inertial_params();
  h.segment<6>(12) = contact.stiffness;
  h.segment<6>(18) = contact.damping;
  h.segment<4>(24) = wind_coefficients(wind);
  return h;
}

}  // namespace aeroarm
