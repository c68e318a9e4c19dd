#pragma once

#include "aeroarm/dynamics.hpp"
#include "aeroarm/environment.hpp"

namespace aeroarm {

using Vec28 = Eigen::Matrix<double, 28, 1>;
using Mat28 = Eigen::Matrix<double, 28, 28>;
using Mat8x28 = Eigen::Matrix<double, 8, 28>;

struct FtrlsConfig {
  double eta_min = 0.8;        // floor of the adaptive forgetting factor
  double gamma_g = 5.0;        // residual sensitivity of the forgetting factor
  double r0 = 100.0;           // initial/reset gain: R(0) = r0 I
  double cond_max = 1e10;      // information-matrix condition ceiling
  int cond_check_period = 250; // steps between full condition checks

  // Bandwidth (rad/s) of the low-pass applied to differentiated rates when
  // building the acceleration estimate the regressor consumes. Encoder noise
  // passes through two numerical derivatives before reaching this filter, so
  // the cutoff sits far below the rate-filter bandwidth: the reference motions
  // keep their acceleration content under ~1 rad/s, while every doubling of
  // this cutoff doubles the noise power injected into the residual.
  double diff_cutoff_rad_s = 2.0;

  void validate() const {
    if (eta_min <= 0.0 || eta_min > 1.0)
      throw ConfigError("FtrlsConfig: eta_min must lie in (0, 1]");
    if (gamma_g < 0.0 || r0 <= 0.0 || cond_max <= 1.0 || cond_check_period < 1)
      throw ConfigError("FtrlsConfig: invalid gains or condition limits");
    if (diff_cutoff_rad_s <= 0.0)
      throw ConfigError("FtrlsConfig: diff_cutoff_rad_s must be positive");
  }
};

// Fast-tracking recursive least squares over the stacked parameter vector
// h = (12 inertial, 12 contact, 4 wind), fit to the applied generalized force.
// Forward-Euler discretization of the continuous-time information-form laws
//   residual = tau - Y h
//   eta      = eta_min + (1 - eta_min) * 2^-round(gamma_g |residual|^2)
//   R^-1    <- (1 - eta dt) R^-1 + dt Y^T Y
//   h       <- h + dt R Y^T residual,
// so eta is the per-second decay rate of accumulated information. At small
// residuals eta sits at 1: the information matrix stays lean and the gain R
// stays responsive. Large residuals drop eta toward eta_min, holding on to
// more data while the fit re-converges. The information matrix is kept
// symmetric positive definite: any factorization breakdown or
// condition-number blowup resets it to (1/r0) I while preserving the
// parameter estimate.
class FtrlsEstimator {
 public:
  static constexpr int kNumParams = 28;

  FtrlsEstimator(const FtrlsConfig& config, double dt);

  void initialize(const Vec28& h0);

  struct StepInfo {
    double forgetting = 1.0;
    bool reset = false;
    Vec8 residual = Vec8::Zero();
  };
  StepInfo step(const Mat8x28& Y, const Vec8& tau_applied);

  [[nodiscard]] const Vec28& estimate() const { return h_; }
  [[nodiscard]] const Mat28& information() const { return Rinv_; }
  [[nodiscard]] int reset_count() const { return resets_; }

  // Contact force reconstructed from the contact block of the estimate.
  [[nodiscard]] Vec6 contact_force(const Vec6& chi, const Vec6& dchi) const;

 private:
  FtrlsConfig config_;
  double dt_;
  Mat28 Rinv_;
  Vec28 h_ = Vec28::Zero();
  long steps_ = 0;
  int resets_ = 0;
};

// Stacked regressor [inertial | contact | wind] for one tick of signals.
[[nodiscard]] Mat8x28 build_regressor(const DynamicsModel& model, const Vec8& q,
                                      const Vec8& qd, const Vec8& qdd,
                                      const Mat6x8& J_task, const Vec6& chi,
                                      const Vec6& dchi);

// Parameter vector that reproduces the simulated plant exactly.
[[nodiscard]] Vec28 stacked_true_params(const DynamicsModel& model,
                                        const ContactParams& contact,
                                        const WindParams& wind);

}  // namespace aeroarm
