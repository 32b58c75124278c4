#pragma once

// Unitary time evolution under the driven Hamiltonian and construction of the
// one-period propagator (monodromy). Two engines share the same schemes:
//
//  * a block engine working in the total-quasimomentum basis (L independent
//    L x L problems) -- the default, used by everything performance-critical;
//  * a flat-basis reference path applying the exponential through a Chebyshev
//    expansion of the sparse L^2 x L^2 Hamiltonian -- used by the public
//    single-step operation and as an independent cross-check in tests.
//
// Schemes: exponential midpoint (H frozen at the interval midpoint, unitary
// per step) and a 4th-order commutator-free scheme on the two Gauss nodes for
// the slow-drive regime.

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qmotor/kspace.hpp"
#include "qmotor/model.hpp"
#include "qmotor/trace.hpp"

namespace qmotor {

enum class Scheme { midpoint_exponential, commutator_free_4 };

struct Integrator {
  int steps_per_period = 4096;  ///< power of two, >= 64
  Scheme scheme = Scheme::midpoint_exponential;
  double tolerance = 1e-10;     ///< norm-drift / unitarity budget per run

  void validate() const {
    if (steps_per_period < 64 || (steps_per_period & (steps_per_period - 1)) != 0)
      throw std::invalid_argument("Integrator: steps_per_period must be a power of two >= 64");
    if (!(tolerance > 0.0)) throw std::invalid_argument("Integrator: tolerance must be > 0");
  }
};

namespace detail {

// 4th-order commutator-free coefficients (Gauss nodes c1 < c2).
inline constexpr double cf4_c1 = 0.5 - 0.28867513459481288225;  // 1/2 - sqrt(3)/6
inline constexpr double cf4_c2 = 0.5 + 0.28867513459481288225;
inline constexpr double cf4_a1 = 0.25 - 0.28867513459481288225;  // (3 - 2 sqrt 3)/12
inline constexpr double cf4_a2 = 0.25 + 0.28867513459481288225;

/// exp(-i H dt) for Hermitian H via eigendecomposition; exactly unitary up to
/// roundoff.
inline Mat hermitian_exp_propagator(const Mat& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  if (es.info() != Eigen::Success)
    throw numerical_error("hermitian_exp_propagator: eigendecomposition failed");
  const auto& e = es.eigenvalues();
  Vec phases(e.size());
  for (int i = 0; i < e.size(); ++i) phases[i] = std::polar(1.0, -e[i] * dt);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// One Chebyshev-expanded application of exp(-i H dt) to the columns of x.
/// bound must dominate the spectral radius of H.
inline Mat chebyshev_exp_apply(const SpMat& h, double bound, double dt, const Mat& x) {
  const double tau = bound * std::abs(dt);
  if (tau == 0.0) return x;
  // c_k = (2 - delta_k0) (-i)^k J_k(tau); truncate once the Bessel tail is
  // below machine precision.
  std::vector<cd> coeff;
  coeff.push_back(cd(std::cyl_bessel_j(0, tau), 0.0));
  const cd mi = (dt > 0.0) ? cd(0.0, -1.0) : cd(0.0, 1.0);
  cd f = 1.0;
  for (int k = 1; k < 512; ++k) {
    f *= mi;
    const double jk = std::cyl_bessel_j(static_cast<unsigned>(k), tau);
    coeff.push_back(2.0 * f * jk);
    if (static_cast<double>(k) > tau + 10.0 && std::abs(jk) < 1e-17) break;
  }
  const double inv_b = 1.0 / bound;
  Mat tkm1 = x;             // T_0 x
  Mat tk = inv_b * (h * x); // T_1 x
  Mat y = coeff[0] * tkm1;
  if (coeff.size() > 1) y += coeff[1] * tk;
  for (size_t k = 2; k < coeff.size(); ++k) {
    Mat tkp1 = 2.0 * inv_b * (h * tk) - tkm1;
    y += coeff[k] * tkp1;
    tkm1.swap(tk);
    tk.swap(tkp1);
  }
  return y;
}

inline double spectral_bound(const ModelParams& p, double carrier_mag, double kinetic_scale) {
  return p.J_c * carrier_mag + kinetic_scale * (p.J_s + std::abs(p.W)) + 1e-9;
}

}  // namespace detail

/// Steps the columns of per-block matrices from t to t + dt. Exponentials are
/// taken per block through dense eigendecomposition.
inline void step_blocks(const ModelParams& p, const DriveProtocol& d, Scheme scheme,
                        std::vector<Mat>& blocks, double t, double dt) {
  const int L = p.L;
  if (scheme == Scheme::midpoint_exponential) {
    const cd f = std::polar(1.0, d.value(t + 0.5 * dt));
    for (int kb = 0; kb < L; ++kb)
      blocks[static_cast<size_t>(kb)] =
          detail::hermitian_exp_propagator(kspace::block_hamiltonian(p, kb, f, 1.0), dt) *
          blocks[static_cast<size_t>(kb)];
  } else {
    const cd e1 = std::polar(1.0, d.value(t + detail::cf4_c1 * dt));
    const cd e2 = std::polar(1.0, d.value(t + detail::cf4_c2 * dt));
    const cd f_early = detail::cf4_a2 * e1 + detail::cf4_a1 * e2;
    const cd f_late = detail::cf4_a1 * e1 + detail::cf4_a2 * e2;
    for (int kb = 0; kb < L; ++kb) {
      Mat& b = blocks[static_cast<size_t>(kb)];
      b = detail::hermitian_exp_propagator(kspace::block_hamiltonian(p, kb, f_early, 0.5), dt) * b;
      b = detail::hermitian_exp_propagator(kspace::block_hamiltonian(p, kb, f_late, 0.5), dt) * b;
    }
  }
}

/// One integrator step on a flat state through the sparse Hamiltonian
/// (Chebyshev-expanded exponential). Norm is checked against the integrator
/// tolerance.
inline StateVector step(const StateVector& state, const DriveProtocol& d, double dt,
                        const Integrator& integ = {}) {
  integ.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  state.check_normalized(1e-8);
  const ModelParams& p = d.params;
  StateVector out;
  if (integ.scheme == Scheme::midpoint_exponential) {
    const double a = d.value(state.time + 0.5 * dt);
    const auto h = build_hamiltonian(p, a);
    out.amp = detail::chebyshev_exp_apply(h.sparse, detail::spectral_bound(p, 1.0, 1.0), dt,
                                          state.amp);
  } else {
    const cd e1 = std::polar(1.0, d.value(state.time + detail::cf4_c1 * dt));
    const cd e2 = std::polar(1.0, d.value(state.time + detail::cf4_c2 * dt));
    const cd f_early = detail::cf4_a2 * e1 + detail::cf4_a1 * e2;
    const cd f_late = detail::cf4_a1 * e1 + detail::cf4_a2 * e2;
    const auto h1 = detail::build_hamiltonian_general(p, f_early, 0.5);
    const auto h2 = detail::build_hamiltonian_general(p, f_late, 0.5);
    const double b1 = detail::spectral_bound(p, std::abs(f_early), 0.5);
    const double b2 = detail::spectral_bound(p, std::abs(f_late), 0.5);
    out.amp = detail::chebyshev_exp_apply(h1.sparse, b1, dt, state.amp);
    out.amp = detail::chebyshev_exp_apply(h2.sparse, b2, dt, out.amp);
  }
  out.time = state.time + dt;
  if (std::abs(out.amp.norm() - 1.0) > 1e-11)
    throw numerical_error("step: exponential action lost unitarity");
  return out;
}

/// One-period propagator, kept in its exact block-diagonal form. matrix()
/// materializes the flat L^2 x L^2 unitary on demand.
struct Monodromy {
  std::vector<Mat> blocks;  ///< blocks[kb] is the L x L propagator of block kb
  double t0 = 0.0;
  double period = 0.0;
  int L = 0;

  Mat matrix() const {
    const int n = L * L;
    // U = B diag(blocks) B^dagger with B the block-basis unitary
    Mat b(n, n), dg = Mat::Zero(n, n);
    for (int kb = 0; kb < L; ++kb) {
      for (int r = 0; r < L; ++r) b.col(kb * L + r) = kspace::block_state_flat(L, kb, r);
      dg.block(kb * L, kb * L, L, L) = blocks[static_cast<size_t>(kb)];
    }
    return b * dg * b.adjoint();
  }

  double unitarity_error() const {
    double worst = 0.0;
    for (const auto& b : blocks) {
      const Mat g = b.adjoint() * b - Mat::Identity(b.rows(), b.cols());
      worst = std::max(worst, g.cwiseAbs().maxCoeff());
    }
    return worst;
  }
};

namespace detail {

inline int effective_steps(const Integrator& integ, double period, double drive_period,
                           int sample_multiple) {
  const double ratio = period / drive_period;
  int steps = std::max(1, static_cast<int>(std::llround(integ.steps_per_period * ratio)));
  if (sample_multiple > 0 && steps % sample_multiple != 0)
    steps = sample_multiple * ((steps + sample_multiple - 1) / sample_multiple);
  return steps;
}

}  // namespace detail

/// U(t0 + period, t0) via the block engine: the identity basis of every block
/// is propagated through the full period.
inline Monodromy monodromy(const ModelParams& p, const DriveProtocol& d, double t0, double period,
                           const Integrator& integ = {}) {
  p.validate();
  integ.validate();
  if (!(period > 0.0)) throw std::invalid_argument("monodromy: period must be > 0");
  Monodromy u;
  u.L = p.L;
  u.t0 = t0;
  u.period = period;
  u.blocks.assign(static_cast<size_t>(p.L), Mat::Identity(p.L, p.L));
  const int steps = detail::effective_steps(integ, period, d.period(), 0);
  const double dt = period / steps;
  for (int s = 0; s < steps; ++s) step_blocks(p, d, integ.scheme, u.blocks, t0 + s * dt, dt);
  if (u.unitarity_error() > integ.tolerance)
    throw numerical_error("monodromy: propagator lost unitarity beyond tolerance");
  return u;
}

/// Monodromy plus the partial propagators U(t0 + s_j, t0) at the equally
/// spaced sample offsets s_j = j * period / samples. The step count is
/// rounded up to a multiple of `samples` so snapshots land on step edges.
struct PeriodPropagators {
  Monodromy full;
  std::vector<double> offsets;            ///< s_j, j = 0..samples-1 (s_0 = 0)
  std::vector<std::vector<Mat>> partial;  ///< partial[j] = blocks of U(t0+s_j, t0)
};

inline PeriodPropagators monodromy_with_snapshots(const ModelParams& p, const DriveProtocol& d,
                                                  double t0, double period, int samples,
                                                  const Integrator& integ = {}) {
  p.validate();
  integ.validate();
  if (samples < 1) throw std::invalid_argument("monodromy_with_snapshots: samples must be >= 1");
  PeriodPropagators pp;
  pp.full.L = p.L;
  pp.full.t0 = t0;
  pp.full.period = period;
  pp.full.blocks.assign(static_cast<size_t>(p.L), Mat::Identity(p.L, p.L));
  const int steps = detail::effective_steps(integ, period, d.period(), samples);
  const double dt = period / steps;
  const int stride = steps / samples;
  pp.offsets.resize(static_cast<size_t>(samples));
  pp.partial.resize(static_cast<size_t>(samples));
  for (int s = 0; s < steps; ++s) {
    if (s % stride == 0) {
      const int j = s / stride;
      pp.offsets[static_cast<size_t>(j)] = s * dt;
      pp.partial[static_cast<size_t>(j)] = pp.full.blocks;
    }
    step_blocks(p, d, integ.scheme, pp.full.blocks, t0 + s * dt, dt);
  }
  if (pp.full.unitarity_error() > integ.tolerance)
    throw numerical_error("monodromy_with_snapshots: propagator lost unitarity beyond tolerance");
  return pp;
}

/// Flat-basis reference monodromy: propagates the L^2 identity columns with
/// the Chebyshev stepper, never assuming the block structure. For tests.
inline Mat monodromy_flat(const ModelParams& p, const DriveProtocol& d, double t0, double period,
                          const Integrator& integ = {}) {
  p.validate();
  integ.validate();
  const int n = p.dim();
  Mat u = Mat::Identity(n, n);
  const int steps = detail::effective_steps(integ, period, d.period(), 0);
  const double dt = period / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * dt;
    if (integ.scheme == Scheme::midpoint_exponential) {
      const auto h = build_hamiltonian(p, d.value(t + 0.5 * dt));
      u = detail::chebyshev_exp_apply(h.sparse, detail::spectral_bound(p, 1.0, 1.0), dt, u);
    } else {
      const cd e1 = std::polar(1.0, d.value(t + detail::cf4_c1 * dt));
      const cd e2 = std::polar(1.0, d.value(t + detail::cf4_c2 * dt));
      const cd f_early = detail::cf4_a2 * e1 + detail::cf4_a1 * e2;
      const cd f_late = detail::cf4_a1 * e1 + detail::cf4_a2 * e2;
      const auto h1 = detail::build_hamiltonian_general(p, f_early, 0.5);
      const auto h2 = detail::build_hamiltonian_general(p, f_late, 0.5);
      u = detail::chebyshev_exp_apply(h1.sparse, detail::spectral_bound(p, std::abs(f_early), 0.5),
                                      dt, u);
      u = detail::chebyshev_exp_apply(h2.sparse, detail::spectral_bound(p, std::abs(f_late), 0.5),
                                      dt, u);
    }
  }
  return u;
}

struct PropagateResult {
  StateVector final;
  VelocityTrace trace;
};

/// Integrates the state to t_final, emitting `samples` equally spaced
/// velocity snapshots (plus the initial one). Deterministic; aborts if the
/// norm drifts beyond the integrator tolerance.
inline PropagateResult propagate(const StateVector& state, const DriveProtocol& d, double t_final,
                                 int samples, const Integrator& integ = {}) {
  integ.validate();
  if (!(t_final > state.time)) throw std::invalid_argument("propagate: t_final must exceed state.time");
  if (samples < 1) throw std::invalid_argument("propagate: samples must be >= 1");
  state.check_normalized(1e-8);
  const ModelParams& p = d.params;
  const double span = t_final - state.time;
  const int steps = detail::effective_steps(integ, span, d.period(), samples);
  const double dt = span / steps;
  const int stride = steps / samples;

  std::vector<Mat> blocks;  // single-column blocks
  {
    auto comps = kspace::to_blocks(p.L, state.amp);
    blocks.reserve(comps.size());
    for (auto& c : comps) blocks.push_back(c);
  }
  VelocityTrace tr;
  tr.t0 = state.time;
  tr.times.resize(samples + 1);
  tr.v_c.resize(samples + 1);
  tr.v_s.resize(samples + 1);

  auto record = [&](int slot, double t) {
    const double a = d.value(t);
    double vc = 0.0, vs = 0.0;
    for (int kb = 0; kb < p.L; ++kb) {
      const Vec w = blocks[static_cast<size_t>(kb)].col(0);
      vc += kspace::block_carrier_velocity(p.L, kb, a, w);
      vs += kspace::block_starter_velocity(p.L, w);
    }
    tr.times[slot] = t;
    tr.v_c[slot] = vc;
    tr.v_s[slot] = vs;
  };
  record(0, state.time);
  for (int s = 0; s < steps; ++s) {
    step_blocks(p, d, integ.scheme, blocks, state.time + s * dt, dt);
    if ((s + 1) % stride == 0) record((s + 1) / stride, state.time + (s + 1) * dt);
  }
  finish_running_average(tr);

  PropagateResult res;
  std::vector<Vec> comps;
  comps.reserve(blocks.size());
  for (auto& b : blocks) comps.push_back(b.col(0));
  res.final.amp = kspace::from_blocks(p.L, comps);
  res.final.time = t_final;
  res.trace = std::move(tr);
  if (std::abs(res.final.amp.norm() - 1.0) > integ.tolerance)
    throw numerical_error("propagate: norm drift exceeded tolerance");
  return res;
}

}  // namespace qmotor
