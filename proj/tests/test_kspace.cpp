#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qmotor/kspace.hpp"
#include "qmotor/model.hpp"

using namespace qmotor;
using Catch::Approx;

namespace {

Vec random_state(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = cd(g(rng), g(rng));
  v /= v.norm();
  return v;
}

}  // namespace

TEST_CASE("block basis states are shift eigenvectors with eigenvalue e^{-ik}", "[kspace]") {
  const int L = 5;
  const Mat s = Mat(kspace::shift_matrix(L));
  for (int kb = 0; kb < L; ++kb)
    for (int r = 0; r < L; ++r) {
      const Vec b = kspace::block_state_flat(L, kb, r);
      const Vec sb = s * b;
      const cd lambda = std::polar(1.0, -kspace::kappa(L, kb));
      REQUIRE((sb - lambda * b).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("block transform is unitary and invertible", "[kspace]") {
  for (int L : {2, 3, 6}) {
    const Vec psi = random_state(L * L, 11 + static_cast<unsigned>(L));
    const auto comps = kspace::to_blocks(L, psi);
    double total = 0.0;
    for (const auto& c : comps) total += c.squaredNorm();
    REQUIRE(total == Approx(1.0).margin(1e-12));
    const Vec back = kspace::from_blocks(L, comps);
    REQUIRE((back - psi).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("Hamiltonian is block diagonal in the k basis with the derived blocks", "[kspace]") {
  ModelParams p;
  p.L = 5;
  p.J_s = 0.7;
  p.W = 0.45;
  const double A = 0.83;
  const Mat h = build_hamiltonian(p, A).dense();
  const int L = p.L;
  Mat b(L * L, L * L);
  for (int kb = 0; kb < L; ++kb)
    for (int r = 0; r < L; ++r) b.col(kb * L + r) = kspace::block_state_flat(L, kb, r);
  const Mat hb = b.adjoint() * h * b;
  for (int kb = 0; kb < L; ++kb) {
    const Mat block = kspace::block_hamiltonian(p, kb, A);
    REQUIRE((hb.block(kb * L, kb * L, L, L) - block).cwiseAbs().maxCoeff() < 1e-13);
    for (int kb2 = 0; kb2 < L; ++kb2)
      if (kb2 != kb)
        REQUIRE(hb.block(kb * L, kb2 * L, L, L).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("block velocity operators match H-applied finite differences", "[kspace]") {
  ModelParams p;
  p.L = 6;
  p.J_s = 0.4;
  p.W = 0.3;
  const double A = 0.37;
  const int kb = 2;
  const Vec w = random_state(p.L, 99);
  // v = -dH/dA / J_c by central difference
  const double eps = 1e-6;
  const Mat hp = kspace::block_hamiltonian(p, kb, A + eps);
  const Mat hm = kspace::block_hamiltonian(p, kb, A - eps);
  const Vec fd = -(hp - hm) / (2.0 * eps * p.J_c) * w;
  const Vec op = kspace::block_carrier_velocity_apply(p.L, kb, A, w);
  REQUIRE((fd - op).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE(kspace::block_carrier_velocity(p.L, kb, A, w) ==
          Approx(w.dot(op).real()).margin(1e-14));
}

TEST_CASE("block momentum distribution matches the flat-basis route", "[kspace]") {
  const int L = 4;
  const Vec psi = random_state(L * L, 5);
  const auto comps = kspace::to_blocks(L, psi);
  const Eigen::VectorXd rho = kspace::rho_carrier_blocks(L, comps);
  REQUIRE(rho.sum() == Approx(1.0).margin(1e-12));
  // flat-basis partial Fourier transform
  for (int j = 0; j < L; ++j) {
    double expect = 0.0;
    for (int ls = 0; ls < L; ++ls) {
      cd acc = 0.0;
      for (int lc = 0; lc < L; ++lc)
        acc += std::polar(1.0, -kspace::kappa(L, j) * lc) * psi[lc * L + ls];
      expect += std::norm(acc) / L;
    }
    REQUIRE(rho[j] == Approx(expect).margin(1e-12));
  }
}
