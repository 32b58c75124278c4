#include <catch2/catch_amalgamated.hpp>

#include "qmotor/load.hpp"

using namespace qmotor;
using Catch::Approx;

namespace {

ModelParams base_params(double theta = pi / 2) {
  ModelParams p;
  p.L = 4;
  p.W = 0.2;
  p.A1 = 0.5;
  p.A2 = 0.25;
  p.omega = 0.1;
  p.Theta = theta;
  return p;
}

Integrator integ(int steps) {
  Integrator i;
  i.steps_per_period = steps;
  return i;
}

}  // namespace

TEST_CASE("commensurate bookkeeping", "[load]") {
  REQUIRE_NOTHROW(Commensurate::make(3, 10));
  REQUIRE_NOTHROW(Commensurate::make(0, 10));  // unbiased, analyzed over 10 T
  REQUIRE_NOTHROW(Commensurate::make(-7, 10));
  REQUIRE_THROWS_AS(Commensurate::make(4, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(Commensurate::make(1, 0), std::invalid_argument);

  const auto c1 = Commensurate::from_ratio(4, 10);
  REQUIRE(c1.q == 2);
  REQUIRE(c1.r == 5);
  const auto c2 = Commensurate::from_ratio(-6, 4);
  REQUIRE(c2.q == -3);
  REQUIRE(c2.r == 2);
  const auto c3 = Commensurate::from_ratio(0, 7);
  REQUIRE(c3.q == 0);
  REQUIRE(c3.r == 1);

  const auto c = Commensurate::make(3, 10);
  REQUIRE(c.omega_B(0.1) == Approx(0.03));
  REQUIRE(c.common_period(62.0) == Approx(620.0));
}

TEST_CASE("biased Hamiltonian is periodic over r T through the phase factor", "[load]") {
  ModelParams p = base_params();
  const auto c = Commensurate::make(2, 3);
  p.omega_B = c.omega_B(p.omega);
  const auto d = make_drive(p, DriveKind::biased);
  const double rt = c.common_period(d.period());
  for (double t : {0.3, 17.9, 2.0 * rt + 1.0}) {
    const cd f1 = std::polar(1.0, d.value(t));
    const cd f2 = std::polar(1.0, d.value(t + rt));
    REQUIRE(std::abs(f1 - f2) < 1e-12);
  }
}

TEST_CASE("incommensurate requests are rejected", "[load]") {
  ModelParams p = base_params();
  p.omega_B = 0.01234;  // not omega * q / r for the pair below
  REQUIRE_THROWS_AS(load_spectrum(p, Commensurate::make(1, 3), integ(512)),
                    std::invalid_argument);
}

TEST_CASE("zero bias over r periods reduces to the unbiased spectrum", "[load]") {
  ModelParams p = base_params(0.9);
  const auto unbiased = floquet_analyze(p, make_drive(p), 0.0, integ(512));
  ModelParams pz = p;
  pz.omega_B = 0.0;
  const auto folded = load_spectrum(pz, Commensurate::make(0, 3), integ(512), 64);
  REQUIRE(folded.period == Approx(3.0 * make_drive(p).period()));
  for (int kb = 0; kb < p.L; ++kb) {
    Eigen::VectorXd a = unbiased.vbar_c[kb];
    Eigen::VectorXd b = folded.vbar_c[kb];
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (int j = 0; j < p.L; ++j) REQUIRE(a[j] == Approx(b[j]).margin(1e-8));
  }
}

TEST_CASE("load points reduce the rational bias before use", "[load]") {
  ModelParams p = base_params();
  const auto a = load_point(p, 1, 3, 1, 4, integ(512), 64);
  const auto b = load_point(p, 2, 6, 1, 4, integ(512), 64);
  REQUIRE(a.q == b.q);
  REQUIRE(a.r == b.r);
  REQUIRE(a.omega_B == Approx(b.omega_B));
  REQUIRE(a.v_min == Approx(b.v_min).margin(1e-12));
  REQUIRE(a.v_max == Approx(b.v_max).margin(1e-12));
  REQUIRE(a.v_c == Approx(b.v_c).margin(1e-12));
}

TEST_CASE("velocity range mirrors under bias reversal at Theta = pi/2", "[load]") {
  ModelParams p = base_params(pi / 2);
  const auto plus = load_point(p, 1, 3, 1, 6, integ(1024), 64);
  const auto minus = load_point(p, -1, 3, 1, 6, integ(1024), 64);
  REQUIRE(plus.v_max == Approx(-minus.v_min).margin(1e-6));
  REQUIRE(plus.v_min == Approx(-minus.v_max).margin(1e-6));
}

TEST_CASE("q = 0 column reproduces the unloaded motor velocity", "[load]") {
  ModelParams p = base_params(pi / 2);
  const auto pt = load_point(p, 0, 10, 1, 6, integ(512), 64);
  REQUIRE(pt.omega_B == 0.0);
  const double unloaded = t0_averaged_velocity(p, 1, 6, integ(512));
  REQUIRE(pt.v_c == Approx(unloaded).margin(1e-8));
}
