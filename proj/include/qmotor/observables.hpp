#pragma once

// Transport observables: quasimomentum distributions, the two equivalent
// carrier-velocity evaluations, dc averages from direct propagation and from
// the Floquet contraction, the start-time average and its dispersion.
//
// Note on conventions: with the Hamiltonian's Peierls phase e^{+iA} on the
// forward carrier hop and kappa read off <kappa|psi> with
// |kappa> = L^{-1/2} sum_n e^{i kappa n} |n>, the commutator velocity
// (i/hbar)[H, x_c] evaluates to v0 * sum_kappa rho_kappa sin(kappa - A).
// Both routes below implement exactly that and agree to machine precision.

#include <vector>

#include "qmotor/floquet.hpp"
#include "qmotor/kspace.hpp"
#include "qmotor/model.hpp"
#include "qmotor/trace.hpp"

namespace qmotor {

/// Carrier quasimomentum distribution rho_kappa at a fixed time.
struct MomentumDistribution {
  Eigen::VectorXd kappa_grid;  ///< kappa_l = 2 pi l / L, l = 0..L-1
  Eigen::VectorXd rho;         ///< probabilities, sum to 1
  double time = 0.0;
};

/// rho_kappa of the carrier: partial Fourier transform over the carrier
/// index, traced over the starter.
inline MomentumDistribution momentum_distribution(const StateVector& state, const ModelParams& p) {
  p.validate();
  state.check_normalized(1e-8);
  const int L = p.L;
  MomentumDistribution md;
  md.time = state.time;
  md.kappa_grid.resize(L);
  md.rho = Eigen::VectorXd::Zero(L);
  const double a = 1.0 / std::sqrt(static_cast<double>(L));
  for (int j = 0; j < L; ++j) {
    const double k = kspace::kappa(L, j);
    md.kappa_grid[j] = k;
    for (int ls = 0; ls < L; ++ls) {
      cd acc = 0.0;
      for (int lc = 0; lc < L; ++lc) acc += std::polar(1.0, -k * lc) * state.amp[lc * L + ls];
      md.rho[j] += std::norm(a * acc);
    }
  }
  return md;
}

/// Starter analog of momentum_distribution.
inline MomentumDistribution starter_momentum_distribution(const StateVector& state,
                                                          const ModelParams& p) {
  p.validate();
  state.check_normalized(1e-8);
  const int L = p.L;
  MomentumDistribution md;
  md.time = state.time;
  md.kappa_grid.resize(L);
  md.rho = Eigen::VectorXd::Zero(L);
  const double a = 1.0 / std::sqrt(static_cast<double>(L));
  for (int j = 0; j < L; ++j) {
    const double k = kspace::kappa(L, j);
    md.kappa_grid[j] = k;
    for (int lc = 0; lc < L; ++lc) {
      cd acc = 0.0;
      for (int ls = 0; ls < L; ++ls) acc += std::polar(1.0, -k * ls) * state.amp[lc * L + ls];
      md.rho[j] += std::norm(a * acc);
    }
  }
  return md;
}

/// Carrier velocity via the quasimomentum route, units of v0.
inline double carrier_velocity(const StateVector& state, double A_value, const ModelParams& p) {
  const MomentumDistribution md = momentum_distribution(state, p);
  double v = 0.0;
  for (int j = 0; j < p.L; ++j) v += md.rho[j] * std::sin(md.kappa_grid[j] - A_value);
  return v;
}

/// Carrier velocity via the commutator-defined operator (i/hbar)[H, x_c],
/// units of v0. Cross-check path for carrier_velocity.
inline double carrier_velocity_commutator(const StateVector& state, double A_value,
                                          const ModelParams& p) {
  p.validate();
  state.check_normalized(1e-8);
  const int L = p.L;
  const cd g = cd(0.0, 0.5) * std::polar(1.0, A_value);
  cd acc = 0.0;
  for (int lc = 0; lc < L; ++lc) {
    const int lcm = (lc - 1 + L) % L;
    const int lcp = (lc + 1) % L;
    for (int ls = 0; ls < L; ++ls)
      acc += std::conj(state.amp[lc * L + ls]) *
             (g * state.amp[lcm * L + ls] + std::conj(g) * state.amp[lcp * L + ls]);
  }
  return acc.real();
}

/// Starter velocity, units of J_s d / hbar. The starter carries no Peierls
/// phase.
inline double starter_velocity(const StateVector& state, const ModelParams& p) {
  const MomentumDistribution md = starter_momentum_distribution(state, p);
  double v = 0.0;
  for (int j = 0; j < p.L; ++j) v += md.rho[j] * std::sin(md.kappa_grid[j]);
  return v;
}

/// Long-time average of the carrier velocity read off a trace, with the
/// fluctuation band of the running average over the last 10% of the window
/// as a convergence diagnostic.
struct DcEstimate {
  double value = 0.0;
  double band = 0.0;
};

inline DcEstimate dc_velocity_direct(const VelocityTrace& trace, double period) {
  if (trace.size() < 2) throw std::invalid_argument("dc_velocity_direct: empty trace");
  const double span = trace.times[trace.size() - 1] - trace.t0;
  if (span < 100.0 * period - 1e-9)
    throw std::invalid_argument("dc_velocity_direct: window shorter than 100 periods");
  DcEstimate est;
  est.value = trace.running_avg[trace.size() - 1];
  const double cut = trace.times[trace.size() - 1] - 0.1 * span;
  double lo = est.value, hi = est.value;
  for (int i = 0; i < trace.size(); ++i) {
    if (trace.times[i] < cut) continue;
    lo = std::min(lo, trace.running_avg[i]);
    hi = std::max(hi, trace.running_avg[i]);
  }
  est.band = hi - lo;
  return est;
}

/// Exact asymptotic dc velocity: expansion of psi0 in the Floquet basis at
/// t0 contracted with the mean velocities, units of v0.
inline double dc_velocity_floquet(const FloquetSpectrum& spec, const StateVector& psi0) {
  if (!spec.has_velocities())
    throw std::invalid_argument("dc_velocity_floquet: spectrum lacks mean velocities");
  psi0.check_normalized(1e-8);
  const Vec c = floquet_coefficients(spec, psi0.amp);
  const double total = c.squaredNorm();
  if (std::abs(total - 1.0) > 1e-8)
    throw numerical_error("dc_velocity_floquet: expansion norm deficit above 1e-8");
  double v = 0.0;
  for (int n = 0; n < spec.dim(); ++n) v += spec.mean_velocity(n) * std::norm(c[n]);
  return v;
}

/// Floquet transport solution for the standard initial state: spectrum with
/// mean velocities plus the start-time resolved dc velocities on an n_t0
/// grid.
struct TransportSolution {
  FloquetSpectrum spectrum;
  Eigen::VectorXd vbar_c;    ///< flat, global state order, units v0
  Eigen::VectorXd vbar_s;    ///< flat, units J_s d/hbar
  Eigen::MatrixXd coeff2;    ///< n_t0 x L^2
  Eigen::VectorXd t0_grid;
  Eigen::VectorXd v_c_of_t0; ///< dc carrier velocity per start time, units v0
  Eigen::VectorXd v_s_of_t0; ///< dc starter velocity per start time

  double v_c_avg() const { return v_c_of_t0.mean(); }
  double v_s_avg() const { return v_s_of_t0.mean(); }
};

inline TransportSolution solve_transport(const ModelParams& p, const DriveProtocol& d, int l_c,
                                         int n_t0, const Integrator& integ = {},
                                         int samples = 128, double period = -1.0) {
  if (n_t0 < 1) throw std::invalid_argument("solve_transport: n_t0 must be >= 1");
  if (period <= 0.0) period = d.period();
  const StateVector psi0 = initial_state(p, l_c);
  const Monodromy u = monodromy(p, d, p.t0, period, integ);
  const FloquetSpectrum bare = floquet_decompose(u, p);
  const PeriodScan scan = floquet_period_scan(bare, d, integ, samples, &psi0.amp, n_t0);

  TransportSolution sol;
  sol.spectrum = scan.spectrum;
  const int n = sol.spectrum.dim();
  sol.vbar_c.resize(n);
  sol.vbar_s.resize(n);
  for (int i = 0; i < n; ++i) {
    sol.vbar_c[i] = sol.spectrum.mean_velocity(i);
    sol.vbar_s[i] = sol.spectrum.mean_velocity_starter(i);
  }
  sol.coeff2 = scan.coeff2;
  sol.t0_grid = scan.t0_grid;
  sol.v_c_of_t0 = scan.coeff2 * sol.vbar_c;
  sol.v_s_of_t0 = scan.coeff2 * sol.vbar_s;
  return sol;
}

/// Eq.-(10)-type unique motor velocity: dc_velocity_floquet averaged over
/// n_t0 equally spaced start times in [t0, t0 + T). Units of v0.
inline double t0_averaged_velocity(const ModelParams& p, int l_c, int n_t0,
                                   const Integrator& integ = {}, int samples = 128) {
  if (n_t0 < 2) throw std::invalid_argument("t0_averaged_velocity: n_t0 must be >= 2");
  const DriveProtocol d = make_drive(p);
  return solve_transport(p, d, l_c, n_t0, integ, samples).v_c_avg();
}

// ---------------------------------------------------------------------------
// Direct long-horizon propagation of a start-time ensemble.

/// Result of propagating the standard initial state for every member of a
/// start-time ensemble up to a common horizon, via powers of the one-period
/// propagator with intra-period snapshots.
struct T0Ensemble {
  Eigen::VectorXd t0_grid;
  Eigen::VectorXd v_at_horizon;        ///< running average at the horizon, per member
  Eigen::VectorXd elapsed;             ///< shared elapsed-time sample grid
  Eigen::VectorXd mean_running;        ///< running average of the member-averaged velocity
  std::vector<Eigen::VectorXd> member_running;  ///< per member, at period boundaries
  Eigen::VectorXd period_marks;        ///< elapsed times of the period boundaries
};

/// Direct time evolution of the t0 ensemble. The drive must be T-periodic
/// (unbiased), which is what makes the monodromy-power shortcut exact.
inline T0Ensemble direct_t0_ensemble(const ModelParams& p, const DriveProtocol& d, int l_c,
                                     int n_t0, int horizon_periods, int samples_per_period = 64,
                                     const Integrator& integ = {}, bool keep_traces = false) {
  p.validate();
  if (n_t0 < 1) throw std::invalid_argument("direct_t0_ensemble: n_t0 must be >= 1");
  if (horizon_periods < 1)
    throw std::invalid_argument("direct_t0_ensemble: horizon must be >= 1 period");
  if (d.kind == DriveKind::biased && p.omega_B != 0.0)
    throw std::invalid_argument("direct_t0_ensemble: drive must be T-periodic (no bias)");
  const int L = p.L;
  const double T = d.period();
  int S = samples_per_period;
  if (S % n_t0 != 0) S = n_t0 * ((S + n_t0 - 1) / n_t0);

  const PeriodPropagators pp = monodromy_with_snapshots(p, d, p.t0, T, S, integ);
  const StateVector psi0 = initial_state(p, l_c);
  const auto psi0_blocks = kspace::to_blocks(L, psi0.amp);

  T0Ensemble out;
  out.t0_grid.resize(n_t0);
  out.v_at_horizon.resize(n_t0);
  const int total = horizon_periods * S;  // samples after the initial one
  const double h = T / S;
  out.elapsed.resize(total + 1);
  for (int m = 0; m <= total; ++m) out.elapsed[m] = m * h;
  Eigen::VectorXd vsum_members = Eigen::VectorXd::Zero(total + 1);
  if (keep_traces) {
    out.member_running.assign(static_cast<size_t>(n_t0), Eigen::VectorXd::Zero(horizon_periods + 1));
    out.period_marks.resize(horizon_periods + 1);
    for (int n = 0; n <= horizon_periods; ++n) out.period_marks[n] = n * T;
  }

  const int stride = S / n_t0;
  for (int i = 0; i < n_t0; ++i) {
    const int ji = i * stride;
    out.t0_grid[i] = p.t0 + pp.offsets[static_cast<size_t>(ji)];
    // chi = U(0, s_i) psi0 in the virtual extension; states at n T + s_j are
    // P_j U^n chi.
    std::vector<Vec> chi(static_cast<size_t>(L));
    for (int kb = 0; kb < L; ++kb)
      chi[static_cast<size_t>(kb)] =
          pp.partial[static_cast<size_t>(ji)][static_cast<size_t>(kb)].adjoint() *
          psi0_blocks[static_cast<size_t>(kb)];

    double acc = 0.0, vprev = 0.0;
    int cur_period = 0;
    for (int m = 0; m <= total; ++m) {
      const int n = (m + ji) / S;  // period containing this sample
      const int j = (m + ji) % S;  // snapshot offset within the period
      while (cur_period < n) {
        for (int kb = 0; kb < L; ++kb)
          chi[static_cast<size_t>(kb)] =
              pp.full.blocks[static_cast<size_t>(kb)] * chi[static_cast<size_t>(kb)];
        ++cur_period;
      }
      const double t_abs = p.t0 + n * T + pp.offsets[static_cast<size_t>(j)];
      const double a = d.value(t_abs);
      double v = 0.0;
      for (int kb = 0; kb < L; ++kb) {
        const Vec w = pp.partial[static_cast<size_t>(j)][static_cast<size_t>(kb)] *
                      chi[static_cast<size_t>(kb)];
        v += kspace::block_carrier_velocity(L, kb, a, w);
      }
      if (m > 0) acc += 0.5 * (v + vprev) * h;
      vprev = v;
      vsum_members[m] += v;
      if (keep_traces && m % S == 0)
        out.member_running[static_cast<size_t>(i)][m / S] = (m == 0 ? v : acc / out.elapsed[m]);
    }
    out.v_at_horizon[i] = acc / out.elapsed[total];
  }

  // running average of the ensemble-mean velocity on the shared elapsed grid
  out.mean_running.resize(total + 1);
  out.mean_running[0] = vsum_members[0] / n_t0;
  double acc = 0.0;
  for (int m = 1; m <= total; ++m) {
    acc += 0.5 * (vsum_members[m] + vsum_members[m - 1]) / n_t0 * h;
    out.mean_running[m] = acc / out.elapsed[m];
  }
  return out;
}

enum class DispersionMode { floquet, direct };

/// Eq.-(11)-type start-time dispersion of the asymptotic motor velocity,
/// either exact (Floquet contraction) or at a finite horizon (direct
/// propagation via monodromy powers).
inline double t0_dispersion(const ModelParams& p, int l_c, int n_t0, int horizon_periods,
                            DispersionMode mode = DispersionMode::floquet,
                            const Integrator& integ = {}, int samples = 128) {
  if (n_t0 < 1) throw std::invalid_argument("t0_dispersion: n_t0 must be >= 1");
  const DriveProtocol d = make_drive(p);
  Eigen::VectorXd v;
  if (mode == DispersionMode::floquet) {
    v = solve_transport(p, d, l_c, n_t0, integ, samples).v_c_of_t0;
  } else {
    v = direct_t0_ensemble(p, d, l_c, n_t0, horizon_periods, samples, integ).v_at_horizon;
  }
  const double mean = v.mean();
  const double mean2 = v.squaredNorm() / v.size();
  return std::sqrt(std::max(0.0, mean2 - mean * mean));
}

}  // namespace qmotor
