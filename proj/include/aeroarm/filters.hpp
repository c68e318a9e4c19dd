#pragma once

#include "aeroarm/types.hpp"

namespace aeroarm {

// First-order low-pass g/(s+g) discretized with the bilinear transform:
//   y_k = [g dt (x_k + x_{k-1}) + (2 - g dt) y_{k-1}] / (2 + g dt).
// Unity DC gain for any positive cutoff and step.
class LowPass {
 public:
  LowPass() = default;
  LowPass(double cutoff, double dt) { configure(cutoff, dt); }

  void configure(double cutoff, double dt) {
    if (cutoff <= 0.0 || dt <= 0.0)
      throw ConfigError("LowPass: cutoff and dt must be positive");
    const double gd = cutoff * dt;
    b_ = gd / (2.0 + gd);
    a_ = (2.0 - gd) / (2.0 + gd);
  }

  // Seed both the input and output history, e.g. with a known steady state.
  void reset(double value) {
    x_prev_ = value;
    y_prev_ = value;
  }

  double step(double x) {
    const double y = b_ * (x + x_prev_) + a_ * y_prev_;
    x_prev_ = x;
    y_prev_ = y;
    return y;
  }

  [[nodiscard]] double value() const { return y_prev_; }

  // Difference-equation coefficients: y = b (x + x_prev) + a y_prev.
  [[nodiscard]] double b_coeff() const { return b_; }
  [[nodiscard]] double a_coeff() const { return a_; }

 private:
  double b_ = 0.0;
  double a_ = 0.0;
  double x_prev_ = 0.0;
  double y_prev_ = 0.0;
};

// Bank of identical-rate low-pass filters over a fixed-size vector signal.
template <int N>
class LowPassBank {
 public:
  using VecN = Eigen::Matrix<double, N, 1>;

  LowPassBank() = default;
  LowPassBank(const VecN& cutoffs, double dt) { configure(cutoffs, dt); }
  LowPassBank(double cutoff, double dt) { configure(VecN::Constant(cutoff), dt); }

  void configure(const VecN& cutoffs, double dt) {
    for (int i = 0; i < N; ++i) ch_[i].configure(cutoffs(i), dt);
  }

  void reset(const VecN& values) {
    for (int i = 0; i < N; ++i) ch_[i].reset(values(i));
  }

  VecN step(const VecN& x) {
    VecN y;
    for (int i = 0; i < N; ++i) y(i) = ch_[i].step(x(i));
    return y;
  }

  [[nodiscard]] VecN value() const {
    VecN y;
    for (int i = 0; i < N; ++i) y(i) = ch_[i].value();
    return y;
  }

 private:
  LowPass ch_[N];
};

}  // namespace aeroarm
