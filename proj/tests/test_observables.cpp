#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qmotor/observables.hpp"

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

Integrator integ(int steps, Scheme s = Scheme::midpoint_exponential) {
  Integrator i;
  i.steps_per_period = steps;
  i.scheme = s;
  return i;
}

StateVector random_normalized(int dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  StateVector s;
  s.amp.resize(dim);
  for (int i = 0; i < dim; ++i) s.amp[i] = cd(g(rng), g(rng));
  s.amp /= s.amp.norm();
  return s;
}

}  // namespace

TEST_CASE("momentum distribution is a probability vector", "[observables]") {
  ModelParams p = fig2_params(5, 0.0);
  for (unsigned seed : {1u, 2u, 3u}) {
    const StateVector s = random_normalized(p.dim(), seed);
    const auto md = momentum_distribution(s, p);
    REQUIRE(md.rho.sum() == Approx(1.0).margin(1e-10));
    REQUIRE(md.rho.minCoeff() >= -1e-14);
    const auto ms = starter_momentum_distribution(s, p);
    REQUIRE(ms.rho.sum() == Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("initial state: uniform carrier momentum, zero velocities", "[observables]") {
  ModelParams p = fig2_params(6, 0.3);
  const StateVector s = initial_state(p, 3);
  const auto md = momentum_distribution(s, p);
  for (int j = 0; j < p.L; ++j) REQUIRE(md.rho[j] == Approx(1.0 / p.L).margin(1e-12));
  for (double a : {0.0, 0.6, -2.0})
    REQUIRE(std::abs(carrier_velocity(s, a, p)) < 1e-13);  // uniform rho, any drive value
  REQUIRE(std::abs(starter_velocity(s, p)) < 1e-13);
}

TEST_CASE("carrier plane wave at kappa = pi/2 moves with +1 v0", "[observables]") {
  const int L = 4;
  ModelParams p = fig2_params(L, 0.0);
  StateVector s;
  s.amp.resize(L * L);
  for (int lc = 0; lc < L; ++lc)
    for (int ls = 0; ls < L; ++ls)
      s.amp[lc * L + ls] = std::polar(1.0 / L, 0.5 * pi * lc);
  REQUIRE(carrier_velocity(s, 0.0, p) == Approx(1.0).margin(1e-12));
  REQUIRE(carrier_velocity_commutator(s, 0.0, p) == Approx(1.0).margin(1e-12));
  // starter plane wave analog
  StateVector w;
  w.amp.resize(L * L);
  for (int lc = 0; lc < L; ++lc)
    for (int ls = 0; ls < L; ++ls)
      w.amp[lc * L + ls] = std::polar(1.0 / L, 0.5 * pi * ls);
  REQUIRE(starter_velocity(w, p) == Approx(1.0).margin(1e-12));
}

TEST_CASE("momentum route equals the commutator route on random states", "[observables]") {
  ModelParams p = fig2_params(5, 0.0);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> ua(-4.0, 4.0);
  for (int rep = 0; rep < 100; ++rep) {
    const StateVector s = random_normalized(p.dim(), 100 + rep);
    const double a = ua(rng);
    REQUIRE(std::abs(carrier_velocity(s, a, p) - carrier_velocity_commutator(s, a, p)) < 1e-10);
  }
}

TEST_CASE("block-engine velocities agree with the flat-basis observables", "[observables]") {
  ModelParams p = fig2_params(4, 0.9);
  const StateVector s = random_normalized(p.dim(), 7);
  const auto comps = kspace::to_blocks(p.L, s.amp);
  for (double a : {0.0, 1.3}) {
    double vb = 0.0;
    for (int kb = 0; kb < p.L; ++kb)
      vb += kspace::block_carrier_velocity(p.L, kb, a, comps[static_cast<size_t>(kb)]);
    REQUIRE(vb == Approx(carrier_velocity(s, a, p)).margin(1e-12));
  }
  double vs = 0.0;
  for (int kb = 0; kb < p.L; ++kb)
    vs += kspace::block_starter_velocity(p.L, comps[static_cast<size_t>(kb)]);
  REQUIRE(vs == Approx(starter_velocity(s, p)).margin(1e-12));
  const Eigen::VectorXd rho = kspace::rho_carrier_blocks(p.L, comps);
  const auto md = momentum_distribution(s, p);
  REQUIRE((rho - md.rho).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("running average matches re-integration of the trace", "[observables]") {
  ModelParams p = fig2_params(4, pi / 2);
  const auto d = make_drive(p);
  const auto res = propagate(initial_state(p, 1), d, p.t0 + 4.0 * d.period(), 64, integ(512));
  const auto& tr = res.trace;
  for (int i = 1; i < tr.size(); ++i) {
    double acc = 0.0;
    for (int j = 1; j <= i; ++j)
      acc += 0.5 * (tr.v_c[j] + tr.v_c[j - 1]) * (tr.times[j] - tr.times[j - 1]);
    REQUIRE(tr.running_avg[i] == Approx(acc / (tr.times[i] - tr.t0)).margin(1e-12));
  }
}

TEST_CASE("dc from a trace: W = 0 stays at zero with an empty band", "[observables]") {
  ModelParams p = fig2_params(4, pi / 2);
  p.W = 0.0;
  const auto d = make_drive(p);
  const auto res = propagate(initial_state(p, 1), d, p.t0 + 100.0 * d.period(), 400, integ(256));
  const auto est = dc_velocity_direct(res.trace, d.period());
  REQUIRE(std::abs(est.value) < 1e-12);
  REQUIRE(est.band < 1e-12);
}

TEST_CASE("dc from a trace rejects windows below 100 periods", "[observables]") {
  ModelParams p = fig2_params(4, 0.0);
  const auto d = make_drive(p);
  const auto res = propagate(initial_state(p, 1), d, p.t0 + 5.0 * d.period(), 32, integ(256));
  REQUIRE_THROWS_AS(dc_velocity_direct(res.trace, d.period()), std::invalid_argument);
}

TEST_CASE("monochromatic drive from t0 = 0: asymptotic dc vanishes", "[observables]") {
  ModelParams p = fig2_params(4, 0.9);
  p.A2 = 0.0;
  const auto d = make_drive(p);
  const auto spec = floquet_analyze(p, d, 0.0, integ(1024));
  REQUIRE(std::abs(dc_velocity_floquet(spec, initial_state(p, 1))) < 1e-8);
  // and the finite-window direct average stays inside its own fluctuation band
  const auto res = propagate(initial_state(p, 1), d, p.t0 + 120.0 * d.period(), 480, integ(1024));
  const auto est = dc_velocity_direct(res.trace, d.period());
  REQUIRE(std::abs(est.value) <= est.band + 1e-9);
}

TEST_CASE("single Floquet state contracts to its own mean velocity", "[observables]") {
  ModelParams p = fig2_params(4, 1.0);
  const auto d = make_drive(p);
  const auto spec = floquet_analyze(p, d, 0.0, integ(1024));
  for (int n : {0, 5, 11}) {
    StateVector psi;
    psi.amp = spec.state_flat(n);
    psi.time = 0.0;
    REQUIRE(dc_velocity_floquet(spec, psi) == Approx(spec.mean_velocity(n)).margin(1e-10));
  }
}

TEST_CASE("expansion deficit is rejected", "[observables]") {
  ModelParams p = fig2_params(4, 1.0);
  const auto d = make_drive(p);
  const auto spec = floquet_analyze(p, d, 0.0, integ(512));
  StateVector bad = initial_state(p, 1);
  bad.amp *= std::sqrt(1.0 - 1e-5);  // norm deficit above the velocity-contraction budget
  REQUIRE_THROWS_AS(dc_velocity_floquet(spec, bad), numerical_error);
}

TEST_CASE("t0 coefficients are complete and reproduce the direct start", "[observables]") {
  ModelParams p = fig2_params(4, pi / 2);
  const auto d = make_drive(p);
  const auto sol = solve_transport(p, d, 1, 8, integ(1024));
  for (int i = 0; i < sol.coeff2.rows(); ++i)
    REQUIRE(sol.coeff2.row(i).sum() == Approx(1.0).margin(1e-9));
  // row 0 is the plain t0 = 0 contraction
  const double direct = dc_velocity_floquet(sol.spectrum, initial_state(p, 1));
  REQUIRE(sol.v_c_of_t0[0] == Approx(direct).margin(1e-10));
}

TEST_CASE("t0-averaged velocity is antisymmetric in Theta and vanishes at 0", "[observables]") {
  ModelParams p0 = fig2_params(4, 0.0);
  REQUIRE(std::abs(t0_averaged_velocity(p0, 1, 8, integ(1024))) < 1e-8);
  ModelParams pp = fig2_params(4, 0.8);
  ModelParams pm = fig2_params(4, -0.8);
  ModelParams ps = fig2_params(4, 0.8 + pi);
  const double vp = t0_averaged_velocity(pp, 1, 8, integ(1024));
  const double vm = t0_averaged_velocity(pm, 1, 8, integ(1024));
  const double vs = t0_averaged_velocity(ps, 1, 8, integ(1024));
  REQUIRE(vp + vm == Approx(0.0).margin(1e-8));
  REQUIRE(vp + vs == Approx(0.0).margin(1e-8));
  REQUIRE(std::abs(vp) > 1e-3);  // the broken symmetry does move the motor
}

TEST_CASE("t0-averaged velocity does not depend on the carrier site", "[observables]") {
  ModelParams p = fig2_params(4, pi / 2);
  const double v1 = t0_averaged_velocity(p, 1, 6, integ(1024));
  const double v3 = t0_averaged_velocity(p, 3, 6, integ(1024));
  REQUIRE(v1 == Approx(v3).margin(1e-10));
}

TEST_CASE("dispersion of a single-member ensemble is zero", "[observables]") {
  ModelParams p = fig2_params(4, pi / 2);
  REQUIRE(t0_dispersion(p, 1, 1, 10, DispersionMode::floquet, integ(512)) == 0.0);
}

TEST_CASE("ensemble member traces equal plain propagation", "[observables]") {
  // the monodromy-power shortcut must reproduce step-by-step integration
  ModelParams p = fig2_params(4, pi / 2);
  const auto d = make_drive(p);
  const int n_t0 = 4, S = 32, H = 5;
  const auto ens = direct_t0_ensemble(p, d, 1, n_t0, H, S, integ(512), true);
  for (int i : {0, 2}) {
    StateVector psi = initial_state(p, 1);
    psi.time = ens.t0_grid[i];
    const auto res = propagate(psi, d, psi.time + H * d.period(), H * S, integ(512));
    REQUIRE(res.trace.running_avg[res.trace.size() - 1] ==
            Approx(ens.v_at_horizon[i]).margin(1e-9));
  }
}

TEST_CASE("direct dispersion approaches the exact Floquet dispersion", "[observables]") {
  ModelParams p = fig2_params(4, pi / 2);
  const double exact = t0_dispersion(p, 1, 8, 0, DispersionMode::floquet, integ(1024));
  const double direct = t0_dispersion(p, 1, 8, 400, DispersionMode::direct, integ(1024), 32);
  REQUIRE(direct == Approx(exact).margin(0.25 * exact + 1e-4));
}

TEST_CASE("biased drives are rejected by the periodic ensemble engine", "[observables]") {
  ModelParams p = fig2_params(4, pi / 2);
  p.omega_B = 0.01;
  const auto d = make_drive(p, DriveKind::biased);
  REQUIRE_THROWS_AS(direct_t0_ensemble(p, d, 1, 2, 5, 32, integ(512)), std::invalid_argument);
}

TEST_CASE("a k = 0 Floquet state: zero average at Theta = 0 yet oscillating", "[observables]") {
  // the instantaneous velocity obeys v(t) = -v(T - t) at the symmetric point
  ModelParams p = fig2_params(4, 0.0);
  const auto d = make_drive(p);
  const auto spec = floquet_analyze(p, d, 0.0, integ(1024));
  int pick = 0;
  double vmax = -1.0;
  StateVector psi;
  for (int j = 0; j < p.L; ++j) {
    StateVector cand;
    cand.amp = spec.state_flat(j);
    cand.time = 0.0;
    const double v0 = std::abs(carrier_velocity(cand, d.value(0.25 * d.period()), p));
    if (v0 > vmax) {
      vmax = v0;
      pick = j;
      psi = cand;
    }
  }
  REQUIRE(std::abs(spec.mean_velocity(pick)) < 1e-8);
  const int S = 64;
  const auto res = propagate(psi, d, d.period(), S, integ(1024));
  double biggest = 0.0;
  for (int j = 1; j < S; ++j) {
    biggest = std::max(biggest, std::abs(res.trace.v_c[j]));
    REQUIRE(res.trace.v_c[j] == Approx(-res.trace.v_c[S - j]).margin(1e-7));
  }
  REQUIRE(biggest > 1e-4);  // non-zero except at isolated points
}
