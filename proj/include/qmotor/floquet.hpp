#pragma once

// Floquet spectral analysis. The one-period propagator is diagonalized block
// by block in the total-quasimomentum basis; eigenphases give quasienergies
// folded into [-w_eff/2, w_eff/2) with w_eff = 2 pi / period. Every state
// carries its k label, and a one-period pass over the propagated eigenbasis
// yields the period-averaged carrier/starter velocities of Eq.-(9) type,
// start-time expansion coefficients, parity partners and avoided crossings.
//
// Degenerate eigenphases within a block (including the exact collisions
// produced by zone folding over an r T period) are resolved by
// simultaneously diagonalizing the period-averaged carrier velocity on the
// degenerate subspace, which makes per-state velocities well defined and the
// coefficient contraction exact.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qmotor/dynamics.hpp"
#include "qmotor/kspace.hpp"
#include "qmotor/model.hpp"

namespace qmotor {

struct FloquetSpectrum {
  int L = 0;
  double period = 0.0;
  double t0 = 0.0;
  double theta = 0.0;  ///< drive phase shift this spectrum was computed at

  std::vector<Mat> vectors;                    ///< per block: columns are states in |k,r> coords
  std::vector<Eigen::VectorXd> quasienergies;  ///< per block, sorted ascending
  std::vector<Eigen::VectorXd> vbar_c;         ///< per block, units v0 (empty until computed)
  std::vector<Eigen::VectorXd> vbar_s;         ///< per block, units J_s d/hbar
  double vbar_quad_error = -1.0;               ///< S vs S/2 quadrature estimate

  int dim() const { return L * L; }
  double omega_eff() const { return 2.0 * pi / period; }
  bool has_velocities() const { return !vbar_c.empty(); }

  int block_of(int n) const { return n / L; }
  int slot_of(int n) const { return n % L; }
  double k_label(int n) const { return kspace::kappa(L, block_of(n)); }
  double quasienergy(int n) const { return quasienergies[block_of(n)][slot_of(n)]; }
  double mean_velocity(int n) const { return vbar_c[block_of(n)][slot_of(n)]; }
  double mean_velocity_starter(int n) const { return vbar_s[block_of(n)][slot_of(n)]; }
  Vec state_block(int n) const { return vectors[block_of(n)].col(slot_of(n)); }

  Vec state_flat(int n) const {
    std::vector<Vec> comps(static_cast<size_t>(L), Vec::Zero(L));
    comps[static_cast<size_t>(block_of(n))] = state_block(n);
    return kspace::from_blocks(L, comps);
  }

  double orthonormality_error() const {
    double worst = 0.0;
    for (const auto& v : vectors) {
      const Mat g = v.adjoint() * v - Mat::Identity(L, L);
      worst = std::max(worst, g.cwiseAbs().maxCoeff());
    }
    return worst;
  }
};

namespace detail {

/// Eigenphases and orthonormal eigenvectors of one unitary block via the
/// complex Schur form (diagonal for a normal matrix, Schur vectors exactly
/// orthonormal even across degeneracies).
inline void unitary_block_eig(const Mat& u, double period, Eigen::VectorXd& eps, Mat& vecs) {
  Eigen::ComplexSchur<Mat> schur(u, true);
  if (schur.info() != Eigen::Success)
    throw numerical_error("floquet_decompose: Schur decomposition failed");
  const Mat& t = schur.matrixT();
  const int n = static_cast<int>(u.rows());
  double offdiag = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) offdiag = std::max(offdiag, std::abs(t(i, j)));
  if (offdiag > 1e-7)
    throw numerical_error("floquet_decompose: block is not normal (unitarity lost upstream)");
  eps.resize(n);
  for (int i = 0; i < n; ++i) eps[i] = -std::arg(t(i, i)) / period;
  // sort ascending, carrying the Schur vectors along
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eps[a] < eps[b]; });
  Eigen::VectorXd eps_sorted(n);
  Mat v_sorted(n, n);
  for (int i = 0; i < n; ++i) {
    eps_sorted[i] = eps[order[static_cast<size_t>(i)]];
    v_sorted.col(i) = schur.matrixU().col(order[static_cast<size_t>(i)]);
  }
  eps = eps_sorted;
  vecs = v_sorted;
}

/// Groups the (sorted) eigenphase angles of a block into clusters of circular
/// distance below tol, merging across the fold edge.
inline std::vector<std::vector<int>> degenerate_clusters(const Eigen::VectorXd& eps, double period,
                                                         double phase_tol) {
  const int n = static_cast<int>(eps.size());
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && std::abs(eps[i] - eps[i - 1]) * period < phase_tol)
      clusters.back().push_back(i);
    else
      clusters.push_back({i});
  }
  if (clusters.size() > 1) {
    const double wrap = (eps[0] + 2.0 * pi / period - eps[n - 1]) * period;
    if (wrap < phase_tol) {
      // fold-edge states are degenerate on the circle
      auto& first = clusters.front();
      auto& last = clusters.back();
      last.insert(last.end(), first.begin(), first.end());
      clusters.front() = std::move(last);
      clusters.pop_back();
    }
  }
  return clusters;
}

}  // namespace detail

/// Diagonalizes a block-form monodromy. Quasienergies are folded into
/// [-w_eff/2, w_eff/2); mean velocities are left empty.
inline FloquetSpectrum floquet_decompose(const Monodromy& u, const ModelParams& p) {
  p.validate();
  if (u.L != p.L) throw std::invalid_argument("floquet_decompose: dimension mismatch");
  if (u.unitarity_error() > 1e-9)
    throw numerical_error("floquet_decompose: monodromy is not unitary within tolerance");
  FloquetSpectrum s;
  s.L = p.L;
  s.period = u.period;
  s.t0 = u.t0;
  s.theta = p.Theta;
  s.vectors.resize(static_cast<size_t>(p.L));
  s.quasienergies.resize(static_cast<size_t>(p.L));
  for (int kb = 0; kb < p.L; ++kb)
    detail::unitary_block_eig(u.blocks[static_cast<size_t>(kb)], u.period,
                              s.quasienergies[static_cast<size_t>(kb)],
                              s.vectors[static_cast<size_t>(kb)]);
  return s;
}

/// Same, from a flat L^2 x L^2 propagator: transforms to the block basis and
/// rejects off-block leakage above `leak_tol` (a broken symmetry upstream).
inline FloquetSpectrum floquet_decompose_flat(const Mat& u_flat, const ModelParams& p, double t0,
                                              double period, double leak_tol = 1e-9) {
  p.validate();
  const int L = p.L, n = p.dim();
  if (u_flat.rows() != n || u_flat.cols() != n)
    throw std::invalid_argument("floquet_decompose_flat: dimension mismatch");
  Mat b(n, n);
  for (int kb = 0; kb < L; ++kb)
    for (int r = 0; r < L; ++r) b.col(kb * L + r) = kspace::block_state_flat(L, kb, r);
  const Mat ub = b.adjoint() * u_flat * b;
  double leak = 0.0;
  Monodromy m;
  m.L = L;
  m.t0 = t0;
  m.period = period;
  m.blocks.resize(static_cast<size_t>(L));
  for (int kb = 0; kb < L; ++kb) {
    m.blocks[static_cast<size_t>(kb)] = ub.block(kb * L, kb * L, L, L);
    for (int kb2 = 0; kb2 < L; ++kb2)
      if (kb2 != kb)
        leak = std::max(leak, ub.block(kb * L, kb2 * L, L, L).cwiseAbs().maxCoeff());
  }
  if (leak > leak_tol)
    throw numerical_error("floquet_decompose_flat: off-block leakage above tolerance");
  return floquet_decompose(m, p);
}

/// One pass of the propagated Floquet basis over its period.
struct PeriodScan {
  FloquetSpectrum spectrum;   ///< input spectrum with velocities filled and
                              ///< degenerate clusters velocity-diagonalized
  Eigen::VectorXd t0_grid;    ///< start times of the coefficient rows
  Eigen::MatrixXd coeff2;     ///< |c_n(t0)|^2, n_t0 x L^2 (empty if no psi0)
};

/// Propagates the Floquet eigenbasis over one period with `samples` equally
/// spaced velocity samples (>= 32; the periodic trapezoid rule is a plain
/// mean). If psi0 is given, expansion coefficients are also collected on the
/// n_t0-point start-time subgrid, which must divide the sample grid.
inline PeriodScan floquet_period_scan(const FloquetSpectrum& spec, const DriveProtocol& d,
                                      const Integrator& integ = {}, int samples = 128,
                                      const Vec* psi0 = nullptr, int n_t0 = 0) {
  integ.validate();
  if (samples < 32) throw std::invalid_argument("floquet_period_scan: samples must be >= 32");
  const ModelParams& p = d.params;
  if (p.L != spec.L) throw std::invalid_argument("floquet_period_scan: dimension mismatch");
  const int L = spec.L;
  if (psi0 && n_t0 < 1)
    throw std::invalid_argument("floquet_period_scan: n_t0 must be >= 1 with psi0");
  int S = samples;
  if (psi0 && S % n_t0 != 0) S = n_t0 * ((S + n_t0 - 1) / n_t0);
  if (S % 2 != 0) ++S;  // even sample count for the S/2 quadrature check

  const int steps = detail::effective_steps(integ, spec.period, d.period(), S);
  const double dt = spec.period / steps;
  const int stride = steps / S;
  const int coeff_stride = psi0 ? S / n_t0 : 0;

  std::vector<Vec> psi0_blocks;
  if (psi0) psi0_blocks = kspace::to_blocks(L, *psi0);

  std::vector<Mat> cols = spec.vectors;
  std::vector<Eigen::VectorXd> vsum(static_cast<size_t>(L), Eigen::VectorXd::Zero(L));
  std::vector<Eigen::VectorXd> vsum_half(static_cast<size_t>(L), Eigen::VectorXd::Zero(L));
  std::vector<Eigen::VectorXd> vsum_s(static_cast<size_t>(L), Eigen::VectorXd::Zero(L));

  // degenerate clusters and their accumulated velocity cross matrices
  const double phase_tol = 1e-9;
  std::vector<std::vector<std::vector<int>>> clusters(static_cast<size_t>(L));
  std::vector<std::vector<Mat>> mc(static_cast<size_t>(L)), ms(static_cast<size_t>(L));
  for (int kb = 0; kb < L; ++kb) {
    clusters[static_cast<size_t>(kb)] =
        detail::degenerate_clusters(spec.quasienergies[static_cast<size_t>(kb)], spec.period,
                                    phase_tol);
    for (const auto& cl : clusters[static_cast<size_t>(kb)])
      if (cl.size() > 1) {
        mc[static_cast<size_t>(kb)].push_back(Mat::Zero(cl.size(), cl.size()));
        ms[static_cast<size_t>(kb)].push_back(Mat::Zero(cl.size(), cl.size()));
      } else {
        mc[static_cast<size_t>(kb)].push_back(Mat());
        ms[static_cast<size_t>(kb)].push_back(Mat());
      }
  }

  Eigen::MatrixXcd coeff;  // raw complex coefficients, rotated after the pass
  if (psi0) coeff.resize(n_t0, L * L);

  for (int j = 0; j < S; ++j) {
    const double t = spec.t0 + j * (spec.period / S);
    const double a = d.value(t);
    for (int kb = 0; kb < L; ++kb) {
      Mat& v = cols[static_cast<size_t>(kb)];
      for (int c = 0; c < L; ++c) {
        const Vec w = v.col(c);
        const double vc = kspace::block_carrier_velocity(L, kb, a, w);
        vsum[static_cast<size_t>(kb)][c] += vc;
        if (j % 2 == 0) vsum_half[static_cast<size_t>(kb)][c] += vc;
        vsum_s[static_cast<size_t>(kb)][c] += kspace::block_starter_velocity(L, w);
      }
      const auto& cls = clusters[static_cast<size_t>(kb)];
      for (size_t ci = 0; ci < cls.size(); ++ci) {
        const auto& cl = cls[ci];
        if (cl.size() < 2) continue;
        for (size_t i = 0; i < cl.size(); ++i)
          for (size_t jj = 0; jj < cl.size(); ++jj) {
            mc[static_cast<size_t>(kb)][ci](i, jj) += kspace::block_carrier_velocity_cross(
                L, kb, a, v.col(cl[i]), v.col(cl[jj]));
            ms[static_cast<size_t>(kb)][ci](i, jj) +=
                v.col(cl[i]).dot(kspace::block_starter_velocity_apply(L, v.col(cl[jj])));
          }
      }
      if (psi0 && j % coeff_stride == 0) {
        const int row = j / coeff_stride;
        for (int c = 0; c < L; ++c)
          coeff(row, kb * L + c) = v.col(c).dot(psi0_blocks[static_cast<size_t>(kb)]);
      }
    }
    for (int s = 0; s < stride; ++s)
      step_blocks(p, d, integ.scheme, cols, t + s * dt, dt);
  }

  PeriodScan out;
  out.spectrum = spec;
  out.spectrum.vbar_c.assign(static_cast<size_t>(L), Eigen::VectorXd::Zero(L));
  out.spectrum.vbar_s.assign(static_cast<size_t>(L), Eigen::VectorXd::Zero(L));
  double quad_err = 0.0;
  for (int kb = 0; kb < L; ++kb) {
    out.spectrum.vbar_c[static_cast<size_t>(kb)] = vsum[static_cast<size_t>(kb)] / S;
    out.spectrum.vbar_s[static_cast<size_t>(kb)] = vsum_s[static_cast<size_t>(kb)] / S;
    quad_err = std::max(quad_err, (vsum_half[static_cast<size_t>(kb)] / (S / 2) -
                                   vsum[static_cast<size_t>(kb)] / S)
                                      .cwiseAbs()
                                      .maxCoeff());
  }
  out.spectrum.vbar_quad_error = quad_err;

  // resolve degenerate clusters by diagonalizing the averaged carrier velocity
  for (int kb = 0; kb < L; ++kb) {
    const auto& cls = clusters[static_cast<size_t>(kb)];
    for (size_t ci = 0; ci < cls.size(); ++ci) {
      const auto& cl = cls[ci];
      if (cl.size() < 2) continue;
      const int h = static_cast<int>(cl.size());
      Mat m = mc[static_cast<size_t>(kb)][ci] / S;
      m = 0.5 * (m + m.adjoint().eval());  // Hermitize against quadrature noise
      Eigen::SelfAdjointEigenSolver<Mat> es(m);
      const Mat rot = es.eigenvectors();
      Mat vc(L, h);
      for (int i = 0; i < h; ++i) vc.col(i) = out.spectrum.vectors[static_cast<size_t>(kb)].col(cl[i]);
      vc = vc * rot;
      const Mat msr = rot.adjoint() * (ms[static_cast<size_t>(kb)][ci] / S) * rot;
      for (int i = 0; i < h; ++i) {
        out.spectrum.vectors[static_cast<size_t>(kb)].col(cl[i]) = vc.col(i);
        out.spectrum.vbar_c[static_cast<size_t>(kb)][cl[i]] = es.eigenvalues()[i];
        out.spectrum.vbar_s[static_cast<size_t>(kb)][cl[i]] = msr(i, i).real();
      }
      if (psi0)
        for (int row = 0; row < n_t0; ++row) {
          Vec sub(h);
          for (int i = 0; i < h; ++i) sub[i] = coeff(row, kb * L + cl[i]);
          const Vec subr = rot.adjoint() * sub;
          for (int i = 0; i < h; ++i) coeff(row, kb * L + cl[i]) = subr[i];
        }
    }
  }

  if (psi0) {
    out.t0_grid.resize(n_t0);
    for (int i = 0; i < n_t0; ++i) out.t0_grid[i] = spec.t0 + i * (spec.period / n_t0);
    out.coeff2 = coeff.cwiseAbs2();
  }
  return out;
}

/// Period-averaged velocities of every Floquet state; returns a copy of the
/// spectrum with vbar fields filled (they do not depend on t0).
inline FloquetSpectrum floquet_mean_velocity(const FloquetSpectrum& spec, const DriveProtocol& d,
                                             const Integrator& integ = {}, int samples = 128) {
  return floquet_period_scan(spec, d, integ, samples).spectrum;
}

/// Monodromy + decomposition + mean velocities in one call.
inline FloquetSpectrum floquet_analyze(const ModelParams& p, const DriveProtocol& d, double t0,
                                       const Integrator& integ = {}, int samples = 128,
                                       double period = -1.0) {
  if (period <= 0.0) period = d.period();
  const Monodromy u = monodromy(p, d, t0, period, integ);
  return floquet_mean_velocity(floquet_decompose(u, p), d, integ, samples);
}

/// Expansion coefficients c_n = <phi_n(t0)|psi> of a flat state.
inline Vec floquet_coefficients(const FloquetSpectrum& spec, const Vec& psi_flat) {
  const auto comps = kspace::to_blocks(spec.L, psi_flat);
  Vec c(spec.dim());
  for (int kb = 0; kb < spec.L; ++kb)
    c.segment(kb * spec.L, spec.L) =
        spec.vectors[static_cast<size_t>(kb)].adjoint() * comps[static_cast<size_t>(kb)];
  return c;
}

/// Parity pairing between spectra at opposite Theta (same t0, which must be a
/// multiple of T/2 for the conjugation relation U(-Theta) = U(Theta)^T to
/// hold; t0 = 0 in practice). State m of the -Theta spectrum in block k is
/// matched to the state of the +Theta spectrum in block -k whose vector is
/// closest to the complex conjugate, and the match is validated through the
/// velocity antisymmetry vbar_m(-Theta) = -vbar_n(+Theta).
struct ParityPairing {
  std::vector<int> partner;       ///< global index in spec_plus for each state of spec_minus
  double max_velocity_residual = 0.0;
  double min_overlap = 1.0;
};

inline ParityPairing match_parity_partners(const FloquetSpectrum& spec_plus,
                                           const FloquetSpectrum& spec_minus,
                                           double tol = 1e-6) {
  if (spec_plus.L != spec_minus.L)
    throw std::invalid_argument("match_parity_partners: dimension mismatch");
  if (std::abs(spec_plus.theta + spec_minus.theta) > 1e-9)
    throw std::invalid_argument("match_parity_partners: spectra are not at opposite Theta");
  if (!spec_plus.has_velocities() || !spec_minus.has_velocities())
    throw std::invalid_argument("match_parity_partners: mean velocities required");
  const int L = spec_plus.L;
  ParityPairing out;
  out.partner.assign(static_cast<size_t>(L * L), -1);
  for (int kbm = 0; kbm < L; ++kbm) {
    const int kbp = (L - kbm) % L;
    const Eigen::MatrixXd overlap = (spec_plus.vectors[static_cast<size_t>(kbp)].adjoint() *
                         spec_minus.vectors[static_cast<size_t>(kbm)].conjugate())
                            .cwiseAbs();
    // greedy maximal assignment
    std::vector<bool> row_used(static_cast<size_t>(L), false), col_used(static_cast<size_t>(L), false);
    for (int pick = 0; pick < L; ++pick) {
      int bi = -1, bj = -1;
      double best = -1.0;
      for (int i = 0; i < L; ++i) {
        if (row_used[static_cast<size_t>(i)]) continue;
        for (int j = 0; j < L; ++j) {
          if (col_used[static_cast<size_t>(j)]) continue;
          if (overlap(i, j) > best) {
            best = overlap(i, j);
            bi = i;
            bj = j;
          }
        }
      }
      row_used[static_cast<size_t>(bi)] = true;
      col_used[static_cast<size_t>(bj)] = true;
      out.partner[static_cast<size_t>(kbm * L + bj)] = kbp * L + bi;
      out.min_overlap = std::min(out.min_overlap, best);
    }
  }
  for (int n = 0; n < L * L; ++n) {
    const double resid =
        std::abs(spec_minus.mean_velocity(n) + spec_plus.mean_velocity(out.partner[static_cast<size_t>(n)]));
    out.max_velocity_residual = std::max(out.max_velocity_residual, resid);
  }
  if (out.max_velocity_residual > tol)
    throw numerical_error("match_parity_partners: no bijection satisfies the velocity antisymmetry within tolerance");
  return out;
}

// ---------------------------------------------------------------------------
// State continuation over a Theta grid and avoided-crossing detection.

struct ContinuationAmbiguity {
  int grid_index = 0;  ///< continuation step from grid_index to grid_index+1
  int block = 0;
  double best = 0.0;    ///< winning overlap
  double second = 0.0;  ///< runner-up overlap that made the step ambiguous
};

struct Continuation {
  /// state_of_curve[j][c] = global state index of curve c at grid point j;
  /// curve ids are the state indices at the first grid point.
  std::vector<std::vector<int>> state_of_curve;
  std::vector<ContinuationAmbiguity> ambiguities;
};

/// Continues states across the grid by maximal eigenvector overlap, block by
/// block. Ambiguous assignments (near-degenerate overlaps) are reported, not
/// guessed around.
inline Continuation track_states(const std::vector<FloquetSpectrum>& spectra,
                                 double ambiguity_margin = 0.05) {
  if (spectra.empty()) throw std::invalid_argument("track_states: empty spectrum list");
  const int L = spectra.front().L;
  const int n = L * L;
  Continuation cont;
  cont.state_of_curve.resize(spectra.size());
  auto& first = cont.state_of_curve.front();
  first.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) first[static_cast<size_t>(i)] = i;

  for (size_t j = 0; j + 1 < spectra.size(); ++j) {
    std::vector<int> next_of(static_cast<size_t>(n), -1);  // state at j -> state at j+1
    for (int kb = 0; kb < L; ++kb) {
      const Eigen::MatrixXd overlap = (spectra[j + 1].vectors[static_cast<size_t>(kb)].adjoint() *
                           spectra[j].vectors[static_cast<size_t>(kb)])
                              .cwiseAbs();
      std::vector<bool> used_new(static_cast<size_t>(L), false), used_old(static_cast<size_t>(L), false);
      for (int pick = 0; pick < L; ++pick) {
        int bi = -1, bj = -1;
        double best = -1.0, second = -1.0;
        for (int i = 0; i < L; ++i) {
          if (used_new[static_cast<size_t>(i)]) continue;
          for (int c = 0; c < L; ++c) {
            if (used_old[static_cast<size_t>(c)]) continue;
            if (overlap(i, c) > best) {
              second = best;
              best = overlap(i, c);
              bi = i;
              bj = c;
            } else if (overlap(i, c) > second) {
              second = overlap(i, c);
            }
          }
        }
        if (second >= 0.0 && best - second < ambiguity_margin)
          cont.ambiguities.push_back({static_cast<int>(j), kb, best, second});
        used_new[static_cast<size_t>(bi)] = true;
        used_old[static_cast<size_t>(bj)] = true;
        next_of[static_cast<size_t>(kb * L + bj)] = kb * L + bi;
      }
    }
    auto& cur = cont.state_of_curve[j];
    auto& nxt = cont.state_of_curve[j + 1];
    nxt.resize(static_cast<size_t>(n));
    for (int c = 0; c < n; ++c) nxt[static_cast<size_t>(c)] = next_of[static_cast<size_t>(cur[static_cast<size_t>(c)])];
  }
  return cont;
}

struct Crossing {
  double theta_star = 0.0;
  double gap = 0.0;    ///< circular quasienergy distance at the minimum
  double t_obs = 0.0;  ///< hbar / gap, time needed to resolve the crossing
  int grid_index = 0;
  int block_a = 0, block_b = 0;
  int curve_a = 0, curve_b = 0;  ///< curve ids (state indices at the grid start)
  bool same_block = true;
  bool exact = false;  ///< gap at machine level: a true (symmetry-protected) crossing
  int level = 0;       ///< refinement depth this crossing was found at
};

struct CrossingOptions {
  double gap_threshold = -1.0;   ///< absolute; < 0 picks 0.1 * omega_eff
  double exact_tol = 1e-11;
  double ambiguity_margin = 0.05;
  bool include_cross_block = true;
};

struct CrossingScan {
  std::vector<Crossing> crossings;
  std::vector<ContinuationAmbiguity> ambiguities;
};

namespace detail {

inline double circle_gap(double e1, double e2, double w_eff) {
  double d = std::fmod(std::abs(e1 - e2), w_eff);
  return std::min(d, w_eff - d);
}

}  // namespace detail

/// Scans quasienergy curves over a Theta grid for local gap minima below the
/// threshold. Gaps are measured on the quasienergy circle. Same-block minima
/// are candidate avoided crossings; cross-block minima can only be true
/// crossings (the blocks do not couple) and are flagged exact once the gap is
/// at machine level.
inline CrossingScan detect_avoided_crossings(const std::vector<double>& thetas,
                                             const std::vector<FloquetSpectrum>& spectra,
                                             const CrossingOptions& opts = {}) {
  if (thetas.size() != spectra.size() || thetas.size() < 3)
    throw std::invalid_argument("detect_avoided_crossings: need >= 3 grid points with spectra");
  const int L = spectra.front().L;
  const int n = L * L;
  const double w_eff = spectra.front().omega_eff();
  const double threshold = opts.gap_threshold > 0.0 ? opts.gap_threshold : 0.1 * w_eff;

  CrossingScan scan;
  Continuation cont = track_states(spectra, opts.ambiguity_margin);
  scan.ambiguities = cont.ambiguities;

  const size_t m = thetas.size();
  auto eps_of_curve = [&](size_t j, int c) {
    return spectra[j].quasienergy(cont.state_of_curve[j][static_cast<size_t>(c)]);
  };
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const bool same = a / L == b / L;
      if (!same && !opts.include_cross_block) continue;
      double prev = detail::circle_gap(eps_of_curve(0, a), eps_of_curve(0, b), w_eff);
      double cur = detail::circle_gap(eps_of_curve(1, a), eps_of_curve(1, b), w_eff);
      for (size_t j = 1; j + 1 < m; ++j) {
        const double next = detail::circle_gap(eps_of_curve(j + 1, a), eps_of_curve(j + 1, b), w_eff);
        if (cur < threshold && cur < prev && cur <= next) {
          Crossing c;
          c.theta_star = thetas[j];
          c.gap = cur;
          c.t_obs = cur > 0.0 ? 1.0 / cur : std::numeric_limits<double>::infinity();
          c.grid_index = static_cast<int>(j);
          c.block_a = a / L;
          c.block_b = b / L;
          c.curve_a = a;
          c.curve_b = b;
          c.same_block = same;
          c.exact = cur < opts.exact_tol;
          scan.crossings.push_back(c);
        }
        prev = cur;
        cur = next;
      }
    }
  }
  std::sort(scan.crossings.begin(), scan.crossings.end(),
            [](const Crossing& x, const Crossing& y) { return x.gap < y.gap; });
  return scan;
}

using SpectrumProvider = std::function<FloquetSpectrum(double)>;

/// Re-scans a window on a finer grid, recursively zooming into every minimum
/// found. Returns the crossings of all levels, finest last.
inline std::vector<Crossing> refine_window(const SpectrumProvider& provider, double theta_lo,
                                           double theta_hi, int points, int levels,
                                           const CrossingOptions& opts = {}, int level = 1) {
  if (points < 5) throw std::invalid_argument("refine_window: need >= 5 points");
  std::vector<double> thetas(static_cast<size_t>(points));
  std::vector<FloquetSpectrum> spectra;
  spectra.reserve(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    thetas[static_cast<size_t>(i)] = theta_lo + (theta_hi - theta_lo) * i / (points - 1);
    spectra.push_back(provider(thetas[static_cast<size_t>(i)]));
  }
  CrossingOptions o = opts;
  o.gap_threshold = std::numeric_limits<double>::max();  // report every minimum in the window
  CrossingScan scan = detect_avoided_crossings(thetas, spectra, o);
  std::vector<Crossing> out;
  for (auto c : scan.crossings) {
    c.level = level;
    out.push_back(c);
  }
  if (levels > 1) {
    const double h = (theta_hi - theta_lo) / (points - 1);
    for (const auto& c : scan.crossings) {
      const auto sub = refine_window(provider, c.theta_star - h, c.theta_star + h, points,
                                     levels - 1, opts, level + 1);
      out.insert(out.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

/// Pinpoints one crossing inside a bracket: bisects on the signed circular
/// gap when it changes sign across the bracket (a true crossing), otherwise
/// golden-section minimizes the gap (an avoided crossing). The pair is
/// re-identified at every probe by overlap continuation from the bracket
/// edge.
inline Crossing pinpoint_crossing(const SpectrumProvider& provider, const Crossing& seed,
                                  double theta_lo, double theta_hi, int iterations = 60) {
  FloquetSpectrum ref = provider(theta_lo);
  const double w_eff = ref.omega_eff();
  const int L = ref.L;

  // signed circular difference eps_a - eps_b wrapped into [-w_eff/2, w_eff/2)
  auto signed_gap_at = [&](const FloquetSpectrum& s) {
    auto follow = [&](int curve) {
      const int kb = curve / L;
      const Vec v = ref.vectors[static_cast<size_t>(kb)].col(curve % L);
      Eigen::Index best = 0;
      (s.vectors[static_cast<size_t>(kb)].adjoint() * v).cwiseAbs().maxCoeff(&best);
      return kb * L + static_cast<int>(best);
    };
    const double d = s.quasienergy(follow(seed.curve_a)) - s.quasienergy(follow(seed.curve_b));
    double w = std::remainder(d, w_eff);
    return w;
  };

  double flo = signed_gap_at(provider(theta_lo));
  double fhi = signed_gap_at(provider(theta_hi));
  Crossing out = seed;
  if (flo * fhi < 0.0) {
    double lo = theta_lo, hi = theta_hi;
    for (int i = 0; i < iterations; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double fm = signed_gap_at(provider(mid));
      if (fm * flo <= 0.0) {
        hi = mid;
        fhi = fm;
      } else {
        lo = mid;
        flo = fm;
      }
    }
    out.theta_star = 0.5 * (lo + hi);
    out.gap = std::abs(signed_gap_at(provider(out.theta_star)));
    out.exact = true;
  } else {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = theta_lo, hi = theta_hi;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = std::abs(signed_gap_at(provider(x1))), f2 = std::abs(signed_gap_at(provider(x2)));
    for (int i = 0; i < iterations; ++i) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = std::abs(signed_gap_at(provider(x1)));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = std::abs(signed_gap_at(provider(x2)));
      }
    }
    out.theta_star = 0.5 * (lo + hi);
    out.gap = std::min(f1, f2);
    out.exact = false;
  }
  out.t_obs = out.gap > 0.0 ? 1.0 / out.gap : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace qmotor
