#pragma once

#include <complex>

#include "aeroarm/filters.hpp"
#include "aeroarm/types.hpp"

namespace aeroarm {

// Disturbance-observer inner loop, one scalar channel per generalized
// coordinate. Each channel commands
//   tau = Mn * accel_des + tau_dis_hat
// where the disturbance estimate is reconstructed from the previously applied
// torque and the low-pass-filtered rate:
//   rate_f  = LP_gv(rate)
//   tau_dis_hat = LP_g(tau_prev + g * Mn * rate_f) - g * Mn * rate_f.
// Linearized against a rigid channel of inertia M the loop has characteristic
// polynomial s^2 + gv s + alpha g gv with alpha = Mn / M, so the design
// constraint alpha * g <= gv / 2 keeps damping at or above 1/sqrt(2) for
// every plausible inertia.
struct DObConfig {
  Vec8 Mn = (Vec8() << 0.02, 0.02, 2.0, 0.05, 0.05, 0.05, 0.01, 0.01).finished();
  Vec8 g = (Vec8() << 40.0, 40.0, 24.0, 12.0, 10.0, 9.0, 1.2, 1.0).finished();
  Vec8 gv = Vec8::Constant(100.0);
  // Workspace lower bounds on the effective per-channel inertia 1/(M^-1)_ii
  // (what a torque on channel i actually accelerates, couplings included),
  // used to bound alpha from above when validating the damping constraint.
  Vec8 M_lower =
      (Vec8() << 1.07, 1.04, 1.04, 1.25e-2, 1.25e-2, 9.9e-3, 2.55e-4, 2.2e-4)
          .finished();

  void validate() const;
};

// Gain table for running the observers inside the sampled cascade. The legacy
// nominal inertias above mismatch the plant in both directions: the small
// channels (joints, tilt) are overstated by up to ~45x, which erases the outer
// damping loop's phase margin once the loop closes through 1 kHz sampling and
// the one-tick torque delay; the lateral channels are understated by ~50x,
// which turns the observer-normalized plant Mn (s + g) / (M s + g Mn) into a
// wide lag (pole g Mn / M << zero g) that destabilizes the task impedance
// loop around 2 rad/s. Matching Mn to the effective-inertia lower bound on
// every channel (alpha <= 1) keeps the normalization flat, so the outer loops
// see the accelerations they commanded and every channel keeps its margin.
[[nodiscard]] DObConfig cascade_dob_config();

class DObChannel {
 public:
  DObChannel() = default;
  DObChannel(double Mn, double g, double gv, double dt);

  // Seed the filters with a steady operating point (rate, applied torque).
  void initialize(double rate, double tau);

  // One control tick; tau_prev is the torque actually applied last tick.
  double command(double accel_des, double rate_meas, double tau_prev);

  [[nodiscard]] double disturbance_estimate() const { return tau_dis_hat_; }
  [[nodiscard]] double filtered_rate() const { return lp_rate_.value(); }

 private:
  double Mn_ = 1.0;
  double g_ = 1.0;
  LowPass lp_rate_;
  LowPass lp_dist_;
  double tau_dis_hat_ = 0.0;
};

class DObBank {
 public:
  DObBank(const DObConfig& config, double dt);

  void initialize(const Vec8& rates, const Vec8& tau);

  // Returns the commanded generalized forces for all eight coordinates.
  Vec8 command(const Vec8& accel_des, const Vec8& rates_meas, const Vec8& tau_prev);

  // Steps a single coordinate's channel. The cascade uses this to command the
  // translational/joint channels before the attitude channels within one tick;
  // each channel must still be stepped exactly once per tick.
  double command_channel(int i, double accel_des, double rate_meas,
                         double tau_prev);

  [[nodiscard]] Vec8 disturbance_estimate() const;
  [[nodiscard]] const DObConfig& config() const { return config_; }

 private:
  DObConfig config_;
  DObChannel ch_[8];
};

// Throws ConstraintViolation if any channel breaks alpha * g <= gv / 2 with
// alpha evaluated at the lower inertia bound, or has non-positive gains.
void validate_dob_robustness(const DObConfig& config);

// Eigenvalues of the exact six-state discrete closed loop of one channel
// (Euler-integrated rigid plant of inertia M_plant, both filters, and the
// one-tick torque feedback delay). Used to confirm the implementation realizes
// the intended characteristic polynomial.
[[nodiscard]] Eigen::Matrix<std::complex<double>, 6, 1> dob_linearized_poles(
    double Mn, double M_plant, double g, double gv, double dt);

}  // namespace aeroarm
