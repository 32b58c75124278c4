#pragma once

// Motor under load: the bias A_B(t) = omega_B t is added to the vector
// potential. The Hamiltonian depends on the drive only through e^{i A~}, so
// whenever q * omega = r * omega_B with co-prime integers q, r the biased
// problem is periodic with the common period r T and the Floquet machinery
// applies over that extended period. No Floquet structure exists at
// irrational bias ratios, and the load characteristic is genuinely
// discontinuous from one rational point to the next: never interpolate.

#include <numeric>
#include <vector>

#include "qmotor/floquet.hpp"
#include "qmotor/observables.hpp"

namespace qmotor {

/// The resonance bookkeeping q * omega = r * omega_B. q may be negative or 0
/// (an unbiased run analyzed over r periods); for q != 0 the pair must be
/// co-prime.
struct Commensurate {
  int q = 0;
  int r = 1;

  static Commensurate make(int q, int r) {
    if (r < 1) throw std::invalid_argument("Commensurate: r must be >= 1");
    if (q != 0 && std::gcd(std::abs(q), r) != 1)
      throw std::invalid_argument("Commensurate: q and r must be co-prime");
    return {q, r};
  }

  /// Reduces an arbitrary integer pair to co-prime form.
  static Commensurate from_ratio(int q, int r) {
    if (r < 1) throw std::invalid_argument("Commensurate: r must be >= 1");
    const int g = q == 0 ? r : std::gcd(std::abs(q), r);
    return {q / g, r / g};
  }

  double omega_B(double omega) const { return omega * q / r; }
  double common_period(double drive_period) const { return r * drive_period; }
};

/// Floquet spectrum of the loaded motor over the common period r T, with
/// mean velocities averaged over r T. Rejects an omega_B in the params that
/// is not the commensurate value (no Floquet structure off the rational
/// ladder).
inline FloquetSpectrum load_spectrum(const ModelParams& p, const Commensurate& c,
                                     const Integrator& integ = {}, int samples_per_t = 128) {
  p.validate();
  const double wb = c.omega_B(p.omega);
  if (std::abs(p.omega_B - wb) > 1e-12 * p.omega)
    throw std::invalid_argument("load_spectrum: params.omega_B is not omega * q / r (incommensurate request)");
  const DriveProtocol d = make_drive(p, DriveKind::biased);
  const double period = c.common_period(d.period());
  return floquet_analyze(p, d, p.t0, integ, samples_per_t * c.r, period);
}

/// One point of the load characteristic.
struct LoadPoint {
  int q = 0;      ///< reduced numerator
  int r = 1;      ///< reduced denominator
  double omega_B = 0.0;
  double v_min = 0.0;  ///< min over the Floquet velocity spectrum, units v0
  double v_max = 0.0;  ///< max over the Floquet velocity spectrum
  double v_c = 0.0;    ///< t0-averaged dc velocity of the standard initial state
};

/// Load characteristic over the rational ladder omega_B = omega * q / r.
/// Each point is an independent job; the resulting curve is discontinuous by
/// construction and must not be interpolated.
inline LoadPoint load_point(const ModelParams& p, int q_raw, int r_raw, int l_c, int n_t0,
                            const Integrator& integ = {}, int samples_per_t = 128) {
  const Commensurate c = Commensurate::from_ratio(q_raw, r_raw);
  ModelParams pb = p;
  pb.omega_B = c.omega_B(p.omega);
  const DriveProtocol d = make_drive(pb, DriveKind::biased);
  const double period = c.common_period(d.period());
  const TransportSolution sol =
      solve_transport(pb, d, l_c, n_t0, integ, samples_per_t * c.r, period);
  LoadPoint pt;
  pt.q = c.q;
  pt.r = c.r;
  pt.omega_B = pb.omega_B;
  pt.v_min = sol.vbar_c.minCoeff();
  pt.v_max = sol.vbar_c.maxCoeff();
  pt.v_c = sol.v_c_avg();
  return pt;
}

inline std::vector<LoadPoint> load_characteristic(const ModelParams& p,
                                                  const std::vector<int>& q_list, int r, int l_c,
                                                  int n_t0, const Integrator& integ = {},
                                                  int samples_per_t = 128) {
  std::vector<LoadPoint> table;
  table.reserve(q_list.size());
  for (int q : q_list) table.push_back(load_point(p, q, r, l_c, n_t0, integ, samples_per_t));
  return table;
}

}  // namespace qmotor
