#pragma once

// Two-atom motor on a ring lattice: a magnetically driven "carrier" and a
// neutral "starter" hopping on L sites with periodic boundary conditions,
// coupled by an on-site interaction W. Everything downstream (propagation,
// Floquet analysis, transport observables) is built on the pieces here.
//
// Units: hbar = J_c = d = 1 internally. Energies are quoted in units of the
// carrier hopping J_c, times in hbar/J_c, and velocities in units of the
// maximal group velocity v0 = J_c d / hbar.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qmotor {

using cd = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cd>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cd iu{0.0, 1.0};

/// Thrown when a propagation or decomposition leaves its numerical tolerance
/// (norm drift, unitarity loss, failed block separation, ...).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// All physical constants of the model. Energies in units of J_c, times in
/// hbar/J_c, omega and omega_B in J_c/hbar, Theta in radians.
struct ModelParams {
  int L = 2;            ///< number of lattice sites on the ring
  double J_c = 1.0;     ///< carrier hopping
  double J_s = 1.0;     ///< starter hopping
  double W = 0.0;       ///< on-site carrier-starter interaction
  double A1 = 0.0;      ///< drive amplitude of the omega harmonic
  double A2 = 0.0;      ///< drive amplitude of the 2*omega harmonic
  double omega = 0.1;   ///< drive angular frequency
  double Theta = 0.0;   ///< symmetry-breaking phase shift
  double omega_B = 0.0; ///< Bloch bias frequency (0 = no load)
  double t0 = 0.0;      ///< switch-on time

  int dim() const { return L * L; }
  double period() const { return 2.0 * pi / omega; }

  void validate() const {
    if (L < 2) throw std::invalid_argument("ModelParams: L must be >= 2");
    if (!(omega > 0.0)) throw std::invalid_argument("ModelParams: omega must be > 0");
    for (double x : {J_c, J_s, W, A1, A2, omega, Theta, omega_B, t0})
      if (!std::isfinite(x))
        throw std::invalid_argument("ModelParams: all parameters must be finite");
  }
};

/// Index bookkeeping for the two-particle basis |l_c> (x) |l_s>.
/// Sites are 1..L in the public interface, the flat index is
/// flat = (l_c-1)*L + (l_s-1) in 0..L^2-1.
struct BasisIndex {
  int l_c = 1;
  int l_s = 1;
  int flat = 0;

  static BasisIndex from_sites(int L, int l_c, int l_s) {
    if (l_c < 1 || l_c > L || l_s < 1 || l_s > L)
      throw std::invalid_argument("BasisIndex: site out of range");
    return {l_c, l_s, (l_c - 1) * L + (l_s - 1)};
  }
  static BasisIndex from_flat(int L, int flat) {
    if (flat < 0 || flat >= L * L)
      throw std::invalid_argument("BasisIndex: flat index out of range");
    return {flat / L + 1, flat % L + 1, flat};
  }
  /// Periodic wrap of an external 1..L site label, |L+1> = |1>.
  static int wrap_site(int L, int l) { return (l - 1 + 2 * L) % L + 1; }
};

enum class DriveKind {
  static_zero,      ///< A(t) identically 0, static Hamiltonian
  harmonic_mixing,  ///< A(t) = A1 sin(w t) + A2 sin(2 w t + Theta), unbiased
  biased            ///< harmonic mixing plus the Bloch ramp omega_B * t
};

/// The vector potential A~(t; t0) = step(t - t0) * [A(t) + omega_B * t] as a
/// pure function of time. A(t) lives on the entire time axis; the switch-on
/// at t0 only gates it.
struct DriveProtocol {
  DriveKind kind = DriveKind::harmonic_mixing;
  ModelParams params;

  double period() const { return params.period(); }

  /// The unswitched signal A(t) (plus bias for the biased kind).
  double base_signal(double t) const {
    switch (kind) {
      case DriveKind::static_zero:
        return 0.0;
      case DriveKind::harmonic_mixing:
        return params.A1 * std::sin(params.omega * t) +
               params.A2 * std::sin(2.0 * params.omega * t + params.Theta);
      case DriveKind::biased:
        return params.A1 * std::sin(params.omega * t) +
               params.A2 * std::sin(2.0 * params.omega * t + params.Theta) +
               params.omega_B * t;
    }
    return 0.0;
  }

  /// A~(t; t0): exactly 0 for t < t0.
  double value(double t) const {
    if (!std::isfinite(t)) throw std::invalid_argument("DriveProtocol: non-finite time");
    return t < params.t0 ? 0.0 : base_signal(t);
  }
};

inline DriveProtocol make_drive(const ModelParams& p, DriveKind kind = DriveKind::harmonic_mixing) {
  p.validate();
  return DriveProtocol{kind, p};
}

/// Normalized state over the L^2 two-particle site basis plus its time stamp.
struct StateVector {
  Vec amp;
  double time = 0.0;

  int dim() const { return static_cast<int>(amp.size()); }
  double norm() const { return amp.norm(); }

  void check_normalized(double tol = 1e-10) const {
    if (std::abs(amp.norm() - 1.0) > tol)
      throw numerical_error("StateVector: norm deviates from 1 by more than " + std::to_string(tol));
  }
};

/// Hamiltonian in the flat two-particle basis, sparse for matvec paths with a
/// dense view for eigensolvers. At most 5 nonzeros per row: two carrier hops,
/// two starter hops, the W diagonal.
struct HamiltonianMatrix {
  SpMat sparse;

  int dim() const { return static_cast<int>(sparse.rows()); }
  Mat dense() const { return Mat(sparse); }
  Vec apply(const Vec& x) const { return sparse * x; }
};

namespace detail {

/// Assembles H(f, s) = -(J_c/2) (f C+ + conj(f) C-) - s (J_s/2)(S+ + S-) + s W D
/// where C/S are carrier/starter one-site shifts and D the l_c = l_s diagonal.
/// f = e^{iA}, s = 1 gives the physical Hamiltonian; general (f, s) serve the
/// commutator-free integrator which exponentiates weighted combinations.
inline HamiltonianMatrix build_hamiltonian_general(const ModelParams& p, cd carrier_factor,
                                                   double kinetic_scale) {
  p.validate();
  if (!std::isfinite(carrier_factor.real()) || !std::isfinite(carrier_factor.imag()))
    throw std::invalid_argument("build_hamiltonian: non-finite drive value");
  const int L = p.L;
  const cd hop_c = -0.5 * p.J_c * carrier_factor;
  const cd hop_s = cd(-0.5 * p.J_s * kinetic_scale, 0.0);

  std::vector<Eigen::Triplet<cd>> trip;
  trip.reserve(static_cast<size_t>(5 * L * L));
  for (int lc = 0; lc < L; ++lc) {
    const int lc1 = (lc + 1) % L;
    for (int ls = 0; ls < L; ++ls) {
      const int ls1 = (ls + 1) % L;
      const int from = lc * L + ls;
      // carrier hop |l_c+1><l_c| with the Peierls factor, plus H.c.
      trip.emplace_back(lc1 * L + ls, from, hop_c);
      trip.emplace_back(from, lc1 * L + ls, std::conj(hop_c));
      // starter hop, no phase
      trip.emplace_back(lc * L + ls1, from, hop_s);
      trip.emplace_back(from, lc * L + ls1, std::conj(hop_s));
      if (lc == ls && p.W != 0.0)
        trip.emplace_back(from, from, cd(kinetic_scale * p.W, 0.0));
    }
  }
  HamiltonianMatrix h;
  h.sparse.resize(L * L, L * L);
  h.sparse.setFromTriplets(trip.begin(), trip.end());  // duplicates (L=2 wrap) sum up
  return h;
}

}  // namespace detail

/// H_tot(A) = H_c(A) + H_s + H_int in the flat basis, Hermitian, <= 5
/// nonzeros per row. For L = 2 the forward and backward carrier hop connect
/// the same pair of sites, so the bond amplitude collapses to -J_c cos A.
inline HamiltonianMatrix build_hamiltonian(const ModelParams& p, double A_value) {
  if (!std::isfinite(A_value)) throw std::invalid_argument("build_hamiltonian: non-finite A");
  return detail::build_hamiltonian_general(p, std::polar(1.0, A_value), 1.0);
}

/// |psi(t0)> = L^{-1/2} |l_c> (x) sum_{l_s} |l_s>: localized carrier,
/// uniformly delocalized starter. Both particles start at zero velocity.
inline StateVector initial_state(const ModelParams& p, int l_c) {
  p.validate();
  if (l_c < 1 || l_c > p.L) throw std::invalid_argument("initial_state: carrier site out of range");
  StateVector s;
  s.amp = Vec::Zero(p.dim());
  const double a = 1.0 / std::sqrt(static_cast<double>(p.L));
  for (int ls = 0; ls < p.L; ++ls) s.amp[(l_c - 1) * p.L + ls] = a;
  s.time = p.t0;
  return s;
}

/// Physical scales for an experimental realization.
struct PhysicalScale {
  double E0;             ///< recoil energy hbar^2 pi^2 / (2 M d^2), joule
  double J_max;          ///< tight-binding bound on the tunneling, 0.13 E0, joule
  double omega_bound_hz; ///< drive frequency with hbar*omega = 0.1 J_max, hertz
};

/// Recoil energy and the resulting bounds on tunneling and drive frequency
/// for an atom of mass `atom_mass` (kg) on a ring with lattice constant
/// `lattice_const` (m).
inline PhysicalScale physical_scale(double atom_mass, double lattice_const) {
  if (!(atom_mass > 0.0) || !(lattice_const > 0.0))
    throw std::invalid_argument("physical_scale: mass and lattice constant must be positive");
  constexpr double hbar = 1.054571817e-34;  // J s
  PhysicalScale s{};
  s.E0 = hbar * hbar * pi * pi / (2.0 * atom_mass * lattice_const * lattice_const);
  s.J_max = 0.13 * s.E0;
  s.omega_bound_hz = 0.1 * s.J_max / hbar / (2.0 * pi);
  return s;
}

}  // namespace qmotor
