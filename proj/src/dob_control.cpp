#include "aeroarm/dob_control.hpp"

#include <string>

namespace aeroarm {

void DObConfig::validate() const {
  for (int i = 0; i < 8; ++i) {
    if (Mn(i) <= 0.0 || g(i) <= 0.0 || gv(i) <= 0.0 || M_lower(i) <= 0.0)
      throw ConfigError("DObConfig: gains and inertias must be positive");
  }
  validate_dob_robustness(*this);
}

void validate_dob_robustness(const DObConfig& config) {
  for (int i = 0; i < 8; ++i) {
    const double alpha = config.Mn(i) / config.M_lower(i);
    if (alpha * config.g(i) > config.gv(i) / 2.0 + 1e-12)
      throw ConstraintViolation(
          "disturbance observer channel " + std::to_string(i) +
          " violates alpha*g <= gv/2 (alpha*g = " +
          std::to_string(alpha * config.g(i)) + ", gv = " +
          std::to_string(config.gv(i)) + ")");
  }
}

DObConfig cascade_dob_config() {
  DObConfig config;
  config.Mn = (Vec8() << 1.07, 1.04, 2.0, 1.25e-2, 1.25e-2, 9.9e-3, 2.55e-4,
               2.2e-4)
                  .finished();
  config.g = (Vec8() << 40.0, 40.0, 24.0, 40.0, 40.0, 40.0, 40.0, 40.0).finished();
  return config;
}

DObChannel::DObChannel(double Mn, double g, double gv, double dt)
    : Mn_(Mn), g_(g), lp_rate_(gv, dt), lp_dist_(g, dt) {}

void DObChannel::initialize(double rate, double tau) {
  lp_rate_.reset(rate);
  lp_dist_.reset(tau + g_ * Mn_ * rate);
  tau_dis_hat_ = tau;
}

double DObChannel::command(double accel_des, double rate_meas, double tau_prev) {
  const double rate_f = lp_rate_.step(rate_meas);
  const double bias = g_ * Mn_ * rate_f;
  tau_dis_hat_ = lp_dist_.step(tau_prev + bias) - bias;
  return Mn_ * accel_des + tau_dis_hat_;
}

DObBank::DObBank(const DObConfig& config, double dt) : config_(config) {
  config_.validate();
  for (int i = 0; i < 8; ++i)
    ch_[i] = DObChannel(config_.Mn(i), config_.g(i), config_.gv(i), dt);
}

void DObBank::initialize(const Vec8& rates, const Vec8& tau) {
  for (int i = 0; i < 8; ++i) ch_[i].initialize(rates(i), tau(i));
}

Vec8 DObBank::command(const Vec8& accel_des, const Vec8& rates_meas,
                      const Vec8& tau_prev) {
  Vec8 tau;
  for (int i = 0; i < 8; ++i)
    tau(i) = ch_[i].command(accel_des(i), rates_meas(i), tau_prev(i));
  return tau;
}

double DObBank::command_channel(int i, double accel_des, double rate_meas,
                                double tau_prev) {
  return ch_[i].command(accel_des, rate_meas, tau_prev);
}

Vec8 DObBank::disturbance_estimate() const {
  Vec8 d;
  for (int i = 0; i < 8; ++i) d(i) = ch_[i].disturbance_estimate();
  return d;
}

Eigen::Matrix<std::complex<double>, 6, 1> dob_linearized_poles(
    double Mn, double M_plant, double g, double gv, double dt) {
  const LowPass lp_rate(gv, dt);
  const LowPass lp_dist(g, dt);
  const double bv = lp_rate.b_coeff(), av = lp_rate.a_coeff();
  const double bd = lp_dist.b_coeff(), ad = lp_dist.a_coeff();
  const double k = g * Mn;

  // State: (v, rate-filter x/y, dist-filter x/y, tau_prev). One tick applies
  //   rate_f = bv (v + xv) + av yv
  //   inner  = tau_prev + k rate_f
  //   dist_f = bd (inner + xd) + ad yd
  //   tau    = dist_f - k rate_f
  //   v'     = v + (dt / M) tau.
  Eigen::Matrix<double, 1, 6> rate_f, inner, dist_f, tau;
  rate_f << bv, bv, av, 0, 0, 0;
  inner = k * rate_f;
  inner(5) += 1.0;
  dist_f = bd * inner + (Eigen::Matrix<double, 1, 6>() << 0, 0, 0, bd, ad, 0).finished();
  tau = dist_f - k * rate_f;

  Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
  A.row(0) << 1, 0, 0, 0, 0, 0;
  A.row(0) += (dt / M_plant) * tau;
  A.row(1) << 1, 0, 0, 0, 0, 0;  // xv' = v
  A.row(2) = rate_f;             // yv' = rate_f
  A.row(3) = inner;              // xd' = inner
  A.row(4) = dist_f;             // yd' = dist_f
  A.row(5) = tau;                // tau_prev' = tau

  return Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>>(A).eigenvalues();
}

}  // namespace aeroarm
