#include "fiberkit/tissue.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace fiberkit;
using fiberkit::testing::random_rotation;

namespace {

FiberTriad axes() { return {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}; }

FiberTriad rotated(const Mat3& R) { return {R.col(0), R.col(1), R.col(2)}; }

// Random F with det in [0.8, 1.2].
Mat3 random_F(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.15, 0.15), j(0.8, 1.2);
  Mat3 H;
  for (int a = 0; a < 9; ++a) H(a / 3, a % 3) = u(rng);
  Mat3 F = Mat3::Identity() + H;
  return F * std::cbrt(j(rng) / F.determinant());
}

Mat3 fd_piola(const Mat3& F, const FiberTriad& t, const UsykParams& p) {
  Mat3 P;
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      Mat3 Fp = F, Fm = F;
      Fp(i, k) += h;
      Fm(i, k) -= h;
      P(i, k) = (usyk_energy(Fp, t, p) - usyk_energy(Fm, t, p)) / (2 * h);
    }
  return P;
}

}  // namespace

TEST_CASE("energy oracles") {
  UsykParams p;
  CHECK(usyk_energy(Mat3::Identity(), axes(), p) == 0.0);
  std::mt19937_64 rng(1);
  CHECK(std::abs(usyk_energy(random_rotation(rng), axes(), p)) < 1e-9);

  Mat3 F = Vec3(1.1, 1, 1).asDiagonal();
  const double Q = 5.0 * 0.105 * 0.105;
  const double expect = 1000.0 * std::expm1(Q) + 25000.0 * 0.1 * std::log(1.1);
  CHECK(usyk_energy(F, axes(), p) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(usyk_energy(F, axes(), p) - 295.0) < 0.5);

  Mat3 inverted = Vec3(-1, 1, 1).asDiagonal();
  CHECK_THROWS_AS(usyk_energy(inverted, axes(), p), DataError);
  UsykParams bad;
  bad.c = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("Piola stress is the derivative of the energy") {
  UsykParams p;
  std::mt19937_64 rng(2);
  double worst = 0;
  for (int k = 0; k < 120; ++k) {
    Mat3 F = random_F(rng);
    FiberTriad t = rotated(random_rotation(rng));
    Mat3 P = piola_stress(F, t, 0.0, StressFactors{}, p), Pfd = fd_piola(F, t, p);
    worst = std::max(worst, (P - Pfd).norm() / std::max(Pfd.norm(), p.c));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("stress-free reference and frame indifference") {
  UsykParams p;
  CHECK(piola_stress(Mat3::Identity(), axes(), 0.0, StressFactors{}, p).norm() <= 1e-12 * p.c);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    Mat3 F = random_F(rng), R = random_rotation(rng);
    FiberTriad t = rotated(random_rotation(rng));
    const double w0 = usyk_energy(F, t, p), w1 = usyk_energy(R * F, t, p);
    CHECK(std::abs(w1 - w0) <= 1e-10 * std::max(1.0, std::abs(w0)));
  }
}

TEST_CASE("active stress structure") {
  const double Ta = 5e4;
  FiberTriad t = axes();
  Mat3 Pa = active_piola(Mat3::Identity(), t, Ta, StressFactors{1, 0, 0});
  CHECK((Pa - Ta * t.f * t.f.transpose()).norm() == 0.0);

  std::mt19937_64 rng(4);
  FiberTriad r = rotated(random_rotation(rng));
  StressFactors sf{0.89, 0.18, 0.19};
  Mat3 A = active_piola(Mat3::Identity(), r, Ta, sf);
  CHECK((A - A.transpose()).norm() < 1e-9);
  CHECK((A * r.f - sf.m_f * Ta * r.f).norm() < 1e-9);
  CHECK((A * r.s - sf.m_s * Ta * r.s).norm() < 1e-9);
  CHECK((A * r.n - sf.m_n * Ta * r.n).norm() < 1e-9);

  CHECK_THROWS_AS(active_piola(Mat3::Identity(), t, -1.0, sf), ValidationError);
}

TEST_CASE("active tension scaling") {
  CHECK(active_tension(0.0, 23e6) == 0.0);
  const double G = 0.01;
  CHECK(active_tension(G, 0.5 * 23e6) == doctest::Approx(0.5 * active_tension(G, 23e6)));
  CHECK_THROWS_AS(active_tension(-0.1, 23e6), ValidationError);
}

TEST_CASE("stress factor normalization") {
  StressFactors a = normalize_sf({1, 0, 0});
  CHECK(a.m_f == 1.0);
  StressFactors b = normalize_sf({3, 4, 0});
  CHECK(b.norm() == doctest::Approx(1.0));
  StressFactors c = normalize_sf({0.89, 0.18, 0.19}, true);
  CHECK(c.norm() == doctest::Approx(0.9277).epsilon(1e-3));
  CHECK(std::abs(c.norm() - 0.93) < 0.005);
  CHECK_THROWS_AS(normalize_sf({0, 0, 0}), ValidationError);
  CHECK_THROWS_AS(normalize_sf({-1, 0, 0}), ValidationError);
}

TEST_CASE("strain invariant oracles") {
  StrainInvariants z = green_lagrange_invariants(Mat3::Zero());
  CHECK(z.I1 == 0.0);
  CHECK(z.I2 == 0.0);
  CHECK(z.I3 == 1.0);

  std::mt19937_64 rng(5);
  Mat3 R = random_rotation(rng);
  StrainInvariants r = green_lagrange_invariants(R - Mat3::Identity());
  CHECK(std::abs(r.I1) < 1e-14);
  CHECK(std::abs(r.I2) < 1e-14);
  CHECK(std::abs(r.I3 - 1) < 1e-14);

  StrainInvariants s = green_lagrange_invariants(Vec3(0.1, 0, 0).asDiagonal());
  CHECK(s.I1 == doctest::Approx(0.105).epsilon(1e-14));
  CHECK(s.I2 == 0.0);
  CHECK(s.I3 == doctest::Approx(1.21).epsilon(1e-14));

  for (int k = 0; k < 200; ++k) {
    Mat3 F = random_F(rng);
    StrainInvariants v = green_lagrange_invariants(F - Mat3::Identity());
    const double J = F.determinant();
    CHECK(std::abs(v.I3 - J * J) <= 1e-12 * J * J);
    // simultaneous rotation of the configuration leaves the invariants unchanged
    Mat3 Q = random_rotation(rng);
    StrainInvariants w = green_lagrange_invariants(Q * F * Q.transpose() - Mat3::Identity());
    CHECK(std::abs(w.I1 - v.I1) < 1e-12);
    CHECK(std::abs(w.I2 - v.I2) < 1e-12);
  }
}

TEST_CASE("strain fields on a mesh") {
  TetMesh m = make_box_mesh(3, 3, 3, Vec3::Zero(), Vec3::Ones());
  VectorField zero(m.num_nodes(), Vec3::Zero()), stretch(m.num_nodes());
  for (std::size_t i = 0; i < m.num_nodes(); ++i) stretch[i] = Vec3(0.1 * m.nodes[i].x(), 0, 0);
  InvariantFields a = strain_invariant_fields(m, zero), b = strain_invariant_fields(m, stretch);
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    CHECK(a.I1[i] == 0.0);
    CHECK(a.I3[i] == 1.0);
    CHECK(std::abs(b.I1[i] - 0.105) < 1e-12);
    CHECK(std::abs(b.I2[i]) < 1e-12);
    CHECK(std::abs(b.I3[i] - 1.21) < 1e-12);
  }
  VectorField crush(m.num_nodes());
  for (std::size_t i = 0; i < m.num_nodes(); ++i) crush[i] = Vec3(-2.0 * m.nodes[i].x(), 0, 0);
  CHECK_THROWS_AS(strain_invariant_fields(m, crush), DataError);
}
