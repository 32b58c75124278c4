#pragma once

#include <Eigen/Dense>

#include "qmotor/model.hpp"

namespace qmotor {

/// Sampled time series of the carrier/starter velocity expectations plus the
/// running time average of the carrier velocity. v_c is in units of v0,
/// v_s in units of J_s d / hbar.
struct VelocityTrace {
  Eigen::VectorXd times;
  Eigen::VectorXd v_c;
  Eigen::VectorXd v_s;
  Eigen::VectorXd running_avg;  ///< trapezoidal average of v_c over [t0, times[i]]
  double t0 = 0.0;

  int size() const { return static_cast<int>(times.size()); }
};

/// Fills running_avg from times/v_c; running_avg[0] is the instantaneous value.
inline void finish_running_average(VelocityTrace& tr) {
  const int n = tr.size();
  tr.running_avg.resize(n);
  if (n == 0) return;
  tr.running_avg[0] = tr.v_c[0];
  double acc = 0.0;
  for (int i = 1; i < n; ++i) {
    acc += 0.5 * (tr.v_c[i] + tr.v_c[i - 1]) * (tr.times[i] - tr.times[i - 1]);
    tr.running_avg[i] = acc / (tr.times[i] - tr.t0);
  }
}

}  // namespace qmotor
