#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qmotor/floquet.hpp"
#include "qmotor/kspace.hpp"
#include "qmotor/model.hpp"

using namespace qmotor;
using Catch::Approx;

namespace {

ModelParams fig2_params(int L, double theta) {
  ModelParams p;
  p.L = L;
  p.W = 0.2;
  p.A1 = 0.5;
  p.A2 = 0.25;
  p.omega = 0.1;
  p.Theta = theta;
  return p;
}

ModelParams fig4_params(double theta) {
  ModelParams p;
  p.L = 4;
  p.W = 0.01;
  p.A1 = 1.0;
  p.A2 = 0.5;
  p.omega = 0.05;
  p.Theta = theta;
  return p;
}

Integrator integ(int steps, Scheme s = Scheme::midpoint_exponential) {
  Integrator i;
  i.steps_per_period = steps;
  i.scheme = s;
  return i;
}

double fold(double e, double w_eff) {
  double f = std::remainder(e, w_eff);
  if (f >= 0.5 * w_eff) f -= w_eff;  // convention [-w_eff/2, w_eff/2)
  return f;
}

}  // namespace

TEST_CASE("static quasienergies are the folded eigenvalues, block by block", "[floquet]") {
  ModelParams p = fig2_params(4, 0.0);
  p.W = 0.0;
  const auto d = make_drive(p, DriveKind::static_zero);
  const double tau = d.period();
  const auto spec = floquet_decompose(monodromy(p, d, 0.0, tau, integ(512)), p);
  REQUIRE(static_cast<int>(spec.quasienergies.size()) == p.L);  // L blocks of size L
  const double w_eff = spec.omega_eff();
  for (int kb = 0; kb < p.L; ++kb) {
    // block k holds carrier momentum kappa with starter momentum k - kappa
    std::vector<double> oracle;
    for (int j = 0; j < p.L; ++j)
      oracle.push_back(fold(-std::cos(kspace::kappa(p.L, j)) -
                                std::cos(kspace::kappa(p.L, kb) - kspace::kappa(p.L, j)),
                            w_eff));
    std::sort(oracle.begin(), oracle.end());
    for (int j = 0; j < p.L; ++j)
      REQUIRE(spec.quasienergies[kb][j] == Approx(oracle[static_cast<size_t>(j)]).margin(1e-8));
  }
}

TEST_CASE("quasienergies respect the fold convention", "[floquet]") {
  ModelParams p = fig2_params(4, 1.3);
  const auto d = make_drive(p);
  const auto spec = floquet_decompose(monodromy(p, d, 0.0, d.period(), integ(512)), p);
  const double half = 0.5 * spec.omega_eff();
  for (int n = 0; n < spec.dim(); ++n) {
    REQUIRE(spec.quasienergy(n) >= -half - 1e-15);
    REQUIRE(spec.quasienergy(n) < half);
  }
}

TEST_CASE("Floquet states are orthonormal shift eigenvectors", "[floquet]") {
  ModelParams p = fig2_params(5, 0.9);
  const auto d = make_drive(p);
  const auto spec = floquet_decompose(monodromy(p, d, 0.0, d.period(), integ(512)), p);
  REQUIRE(spec.orthonormality_error() < 1e-9);
  const Mat s = Mat(kspace::shift_matrix(p.L));
  for (int n : {0, 7, 13, 24}) {
    const Vec v = spec.state_flat(n);
    const cd lambda = std::polar(1.0, -spec.k_label(n));
    REQUIRE((s * v - lambda * v).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("flat decomposition rejects symmetry-breaking leakage", "[floquet]") {
  ModelParams p = fig2_params(3, 0.4);
  const auto d = make_drive(p);
  const Mat u = monodromy_flat(p, d, 0.0, d.period(), integ(256));
  REQUIRE_NOTHROW(floquet_decompose_flat(u, p, 0.0, d.period()));
  Mat broken = u;
  broken(0, 5) += 1e-6;  // not block diagonal any more
  REQUIRE_THROWS_AS(floquet_decompose_flat(broken, p, 0.0, d.period()), numerical_error);
}

TEST_CASE("expansion of any state in the Floquet basis is complete", "[floquet]") {
  ModelParams p = fig2_params(4, 0.8);
  const auto d = make_drive(p);
  const auto spec = floquet_decompose(monodromy(p, d, 0.0, d.period(), integ(512)), p);
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 10; ++rep) {
    Vec psi(p.dim());
    for (int i = 0; i < p.dim(); ++i) psi[i] = cd(g(rng), g(rng));
    psi /= psi.norm();
    REQUIRE(floquet_coefficients(spec, psi).squaredNorm() == Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("k = 0 states carry no mean velocity at Theta = 0 and pi", "[floquet]") {
  for (double theta : {0.0, pi}) {
    ModelParams p = fig2_params(4, theta);
    const auto d = make_drive(p);
    const auto spec = floquet_analyze(p, d, 0.0, integ(1024));
    for (int j = 0; j < p.L; ++j) REQUIRE(std::abs(spec.vbar_c[0][j]) < 1e-8);
  }
}

TEST_CASE("mean velocities do not depend on t0", "[floquet]") {
  ModelParams p = fig2_params(4, 1.1);
  const auto d = make_drive(p);
  const double T = d.period();
  const auto s0 = floquet_analyze(p, d, 0.0, integ(1024));
  const auto s1 = floquet_analyze(p, d, T / 3.0, integ(1024));
  for (int kb = 0; kb < p.L; ++kb) {
    // quasienergies are t0-independent, so sorting by them aligns the states
    for (int j = 0; j < p.L; ++j) {
      REQUIRE(s0.quasienergies[kb][j] == Approx(s1.quasienergies[kb][j]).margin(1e-8));
      REQUIRE(s0.vbar_c[kb][j] == Approx(s1.vbar_c[kb][j]).margin(1e-6));
    }
  }
}

TEST_CASE("quadrature of the period average is Richardson-verified", "[floquet]") {
  ModelParams p = fig2_params(4, 0.5);
  const auto d = make_drive(p);
  const auto spec = floquet_analyze(p, d, 0.0, integ(1024), 128);
  REQUIRE(spec.vbar_quad_error >= 0.0);
  REQUIRE(spec.vbar_quad_error < 1e-8);
}

TEST_CASE("W = 0 velocities match the single-particle brute force at L = 8", "[floquet]") {
  ModelParams p = fig2_params(8, 0.7);
  p.W = 0.0;
  const auto d = make_drive(p);
  const auto spec = floquet_analyze(p, d, 0.0, integ(1024), 256);
  std::vector<double> vs;
  for (int n = 0; n < spec.dim(); ++n) vs.push_back(spec.mean_velocity(n));
  std::sort(vs.begin(), vs.end());

  // decoupled carrier: vbar(kappa) = (1/T) int sin(kappa - A(t)) dt, each
  // value L-fold degenerate through the starter factor
  std::vector<double> oracle;
  const int S = 1 << 14;
  const double T = d.period();
  for (int j = 0; j < p.L; ++j) {
    double acc = 0.0;
    for (int s = 0; s < S; ++s) acc += std::sin(kspace::kappa(p.L, j) - d.value(s * T / S));
    for (int rep = 0; rep < p.L; ++rep) oracle.push_back(acc / S);
  }
  std::sort(oracle.begin(), oracle.end());
  double sym = 0.0;
  for (size_t i = 0; i < vs.size(); ++i) {
    REQUIRE(vs[i] == Approx(oracle[i]).margin(1e-9));
    sym = std::max(sym, std::abs(vs[i] + vs[vs.size() - 1 - i]));
  }
  REQUIRE(sym < 1e-9);  // velocity spectrum symmetric about zero
}

TEST_CASE("parity partners pair opposite k with opposite velocities", "[floquet]") {
  const Integrator i4 = integ(1024, Scheme::commutator_free_4);
  const ModelParams pp = fig4_params(pi / 2);
  const ModelParams pm = fig4_params(-pi / 2);
  const auto sp = floquet_analyze(pp, make_drive(pp), 0.0, i4);
  const auto sm = floquet_analyze(pm, make_drive(pm), 0.0, i4);
  const auto pairing = match_parity_partners(sp, sm, 1e-6);
  REQUIRE(pairing.max_velocity_residual < 1e-6);
  for (int n = 0; n < sm.dim(); ++n) {
    const int m = pairing.partner[static_cast<size_t>(n)];
    const int kb_n = n / sm.L, kb_m = m / sm.L;
    REQUIRE((kb_n + kb_m) % sm.L == 0);  // opposite quasimomenta; k = 0 pairs with itself
    REQUIRE(sm.quasienergy(n) == Approx(sp.quasienergy(m)).margin(1e-8));
  }
}

TEST_CASE("at Theta = 0 the pairing negates the velocity spectrum", "[floquet]") {
  ModelParams p = fig2_params(4, 0.0);
  const auto spec = floquet_analyze(p, make_drive(p), 0.0, integ(1024));
  const auto pairing = match_parity_partners(spec, spec, 1e-6);
  REQUIRE(pairing.max_velocity_residual < 1e-6);
}

TEST_CASE("parity matching rejects mismatched spectra", "[floquet]") {
  ModelParams p1 = fig2_params(4, 0.4);
  ModelParams p2 = fig2_params(4, 0.5);
  const auto s1 = floquet_analyze(p1, make_drive(p1), 0.0, integ(512));
  const auto s2 = floquet_analyze(p2, make_drive(p2), 0.0, integ(512));
  REQUIRE_THROWS_AS(match_parity_partners(s1, s2), std::invalid_argument);
}

TEST_CASE("state continuation and gap minima over a Theta grid", "[floquet]") {
  const Integrator i4 = integ(256, Scheme::commutator_free_4);
  const ModelParams base = fig4_params(0.0);
  auto provider = [&](double theta) {
    ModelParams p = base;
    p.Theta = theta;
    return floquet_decompose(monodromy(p, make_drive(p), 0.0, make_drive(p).period(), i4), p);
  };
  std::vector<double> thetas;
  std::vector<FloquetSpectrum> spectra;
  for (int i = 0; i <= 40; ++i) {
    thetas.push_back(-pi + 2.0 * pi * i / 40);
    spectra.push_back(provider(thetas.back()));
  }
  const Continuation cont = track_states(spectra);
  // curves are permutations at every grid point
  for (const auto& perm : cont.state_of_curve) {
    std::vector<int> seen(perm.size(), 0);
    for (int s : perm) seen[static_cast<size_t>(s)]++;
    for (int c : seen) REQUIRE(c == 1);
  }
  CrossingOptions opts;
  opts.gap_threshold = 0.02 * spectra.front().omega_eff();
  const CrossingScan scan = detect_avoided_crossings(thetas, spectra, opts);
  REQUIRE(!scan.crossings.empty());
  for (const auto& c : scan.crossings) {
    REQUIRE(c.gap < opts.gap_threshold);
    REQUIRE(c.t_obs == Approx(1.0 / c.gap));
  }
}

TEST_CASE("W = 0 crossings are exact and pinpointed to machine precision", "[floquet]") {
  const Integrator i4 = integ(256, Scheme::commutator_free_4);
  ModelParams base = fig4_params(0.0);
  base.W = 0.0;
  auto provider = [&](double theta) {
    ModelParams p = base;
    p.Theta = theta;
    return floquet_decompose(monodromy(p, make_drive(p), 0.0, make_drive(p).period(), i4), p);
  };
  std::vector<double> thetas;
  std::vector<FloquetSpectrum> spectra;
  for (int i = 0; i <= 32; ++i) {
    thetas.push_back(0.2 + 2.5 * i / 32);
    spectra.push_back(provider(thetas.back()));
  }
  CrossingOptions opts;
  opts.gap_threshold = 0.05 * spectra.front().omega_eff();
  const CrossingScan scan = detect_avoided_crossings(thetas, spectra, opts);
  REQUIRE(!scan.crossings.empty());
  const Crossing& seed = scan.crossings.front();
  const double h = thetas[1] - thetas[0];
  const Crossing fine =
      pinpoint_crossing(provider, seed, seed.theta_star - h, seed.theta_star + h);
  REQUIRE(fine.exact);
  REQUIRE(fine.gap < 1e-11);
}
