#pragma once

// Total-quasimomentum block structure. The simultaneous one-site shift of
// both particles commutes with the Hamiltonian, so the L^2-dimensional
// problem splits into L blocks of size L labelled by the total quasimomentum
// k = 2*pi*kb/L. Block states are
//
//   |k, r> = L^{-1/2} sum_m e^{i k m} |m>_c (x) |m + r>_s ,
//
// with r the starter-carrier relative coordinate; they satisfy
// S |k, r> = e^{-i k} |k, r>. In a block the carrier hop turns into a ring
// hop in r with the reduced phase (A - k), the starter hop into a plain ring
// hop, and the interaction into an impurity at r = 0.

#include <vector>

#include "qmotor/model.hpp"

namespace qmotor {
namespace kspace {

inline double kappa(int L, int l) { return 2.0 * pi * l / L; }

/// Simultaneous one-site shift of both particles, S|l_c, l_s> = |l_c+1, l_s+1>.
inline SpMat shift_matrix(int L) {
  SpMat s(L * L, L * L);
  std::vector<Eigen::Triplet<cd>> trip;
  trip.reserve(static_cast<size_t>(L * L));
  for (int lc = 0; lc < L; ++lc)
    for (int ls = 0; ls < L; ++ls)
      trip.emplace_back(((lc + 1) % L) * L + (ls + 1) % L, lc * L + ls, cd(1.0, 0.0));
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

/// Flat amplitudes of the block basis state |k, r>.
inline Vec block_state_flat(int L, int kb, int r) {
  Vec v = Vec::Zero(L * L);
  const double a = 1.0 / std::sqrt(static_cast<double>(L));
  for (int m = 0; m < L; ++m)
    v[m * L + (m + r) % L] = a * std::polar(1.0, kappa(L, kb) * m);
  return v;
}

/// Change of basis flat -> blocks: comps[kb][r] = <k, r | psi>.
inline std::vector<Vec> to_blocks(int L, const Vec& flat) {
  std::vector<Vec> comps(static_cast<size_t>(L), Vec::Zero(L));
  const double a = 1.0 / std::sqrt(static_cast<double>(L));
  for (int kb = 0; kb < L; ++kb) {
    const double k = kappa(L, kb);
    for (int r = 0; r < L; ++r) {
      cd acc = 0.0;
      for (int m = 0; m < L; ++m)
        acc += std::polar(1.0, -k * m) * flat[m * L + (m + r) % L];
      comps[static_cast<size_t>(kb)][r] = a * acc;
    }
  }
  return comps;
}

inline Vec from_blocks(int L, const std::vector<Vec>& comps) {
  Vec flat = Vec::Zero(L * L);
  const double a = 1.0 / std::sqrt(static_cast<double>(L));
  for (int kb = 0; kb < L; ++kb) {
    const double k = kappa(L, kb);
    for (int m = 0; m < L; ++m) {
      const cd phase = a * std::polar(1.0, k * m);
      for (int r = 0; r < L; ++r)
        flat[m * L + (m + r) % L] += phase * comps[static_cast<size_t>(kb)][r];
    }
  }
  return flat;
}

/// Block Hamiltonian H_k(f, s), the restriction of the generalized
/// Hamiltonian of build_hamiltonian_general to the block kb. L x L, Hermitian.
inline Mat block_hamiltonian(const ModelParams& p, int kb, cd carrier_factor, double kinetic_scale) {
  const int L = p.L;
  const cd ek = std::polar(1.0, -kappa(L, kb));
  const cd hop_down = -0.5 * p.J_c * carrier_factor * ek;        // r -> r-1
  const cd hop_s = cd(-0.5 * p.J_s * kinetic_scale, 0.0);
  Mat h = Mat::Zero(L, L);
  for (int r = 0; r < L; ++r) {
    const int rm = (r - 1 + L) % L;
    const int rp = (r + 1) % L;
    h(rm, r) += hop_down;
    h(rp, r) += std::conj(hop_down);
    h(rp, r) += hop_s;
    h(rm, r) += hop_s;
  }
  h(0, 0) += kinetic_scale * p.W;
  return h;
}

inline Mat block_hamiltonian(const ModelParams& p, int kb, double A_value) {
  return block_hamiltonian(p, kb, std::polar(1.0, A_value), 1.0);
}

/// Applies the carrier velocity operator (units of v0 = J_c d / hbar)
/// restricted to block kb: v = -dH/dA / J_c.
inline Vec block_carrier_velocity_apply(int L, int kb, double A_value, const Vec& w) {
  const cd f = cd(0.0, 0.5) * std::polar(1.0, A_value - kappa(L, kb));
  Vec out(L);
  for (int r = 0; r < L; ++r)
    out[r] = f * w[(r + 1) % L] + std::conj(f) * w[(r - 1 + L) % L];
  return out;
}

/// <w| v_c |w> within one block, units of v0.
inline double block_carrier_velocity(int L, int kb, double A_value, const Vec& w) {
  return w.dot(block_carrier_velocity_apply(L, kb, A_value, w)).real();
}

/// <w| v_c |v> cross matrix element within one block (for degenerate
/// subspace resolution), units of v0.
inline cd block_carrier_velocity_cross(int L, int kb, double A_value, const Vec& w, const Vec& v) {
  return w.dot(block_carrier_velocity_apply(L, kb, A_value, v));
}

/// Applies the starter velocity operator (units of J_s d / hbar) within a
/// block. The starter is neutral, so no drive phase enters.
inline Vec block_starter_velocity_apply(int L, const Vec& w) {
  const cd f = cd(0.0, 0.5);
  Vec out(L);
  for (int r = 0; r < L; ++r) out[r] = f * (w[(r - 1 + L) % L] - w[(r + 1) % L]);
  return out;
}

inline double block_starter_velocity(int L, const Vec& w) {
  return w.dot(block_starter_velocity_apply(L, w)).real();
}

/// Carrier quasimomentum distribution of a state given per block; the block
/// kb contributes |<kappa_j, k - kappa_j | psi>|^2 to bin j.
inline Eigen::VectorXd rho_carrier_blocks(int L, const std::vector<Vec>& comps) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(L);
  const double a = 1.0 / std::sqrt(static_cast<double>(L));
  for (int kb = 0; kb < L; ++kb) {
    for (int j = 0; j < L; ++j) {
      const double f = kappa(L, kb) - kappa(L, j);  // starter momentum k - kappa
      cd acc = 0.0;
      for (int r = 0; r < L; ++r)
        acc += comps[static_cast<size_t>(kb)][r] * std::polar(1.0, -f * r);
      rho[j] += std::norm(a * acc);
    }
  }
  return rho;
}

/// Carrier momentum distribution of a single-block state.
inline Eigen::VectorXd rho_carrier_single_block(int L, int kb, const Vec& w) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(L);
  const double a = 1.0 / std::sqrt(static_cast<double>(L));
  for (int j = 0; j < L; ++j) {
    const double f = kappa(L, kb) - kappa(L, j);
    cd acc = 0.0;
    for (int r = 0; r < L; ++r) acc += w[r] * std::polar(1.0, -f * r);
    rho[j] = std::norm(a * acc);
  }
  return rho;
}

}  // namespace kspace
}  // namespace qmotor
