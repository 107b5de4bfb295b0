#include "fiberkit/frames.hpp"
#include "fiberkit/laplace.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace fiberkit;
using fiberkit::testing::random_rotation;

namespace {

bool close(const Vec3& a, const Vec3& b, double tol = 1e-12) { return (a - b).norm() < tol; }

Frame canonical() { return build_frame(Vec3(1, 0, 0), Vec3(0, 0, 1)); }

}  // namespace

TEST_CASE("build_frame oracles") {
  Frame f = canonical();
  CHECK(close(f.t, Vec3(1, 0, 0)));
  CHECK(close(f.n, Vec3(0, 0, 1)));
  CHECK(close(f.l, Vec3(0, 1, 0)));

  Frame g = build_frame(Vec3(2, 0, 0), Vec3(0, 0, 5));
  CHECK(close(g.t, f.t));
  CHECK(close(g.n, f.n));
  CHECK(close(g.l, f.l));

  Frame h = build_frame(Vec3(1, 0, 0), Vec3(1, 0, 1) / std::sqrt(2.0));
  CHECK(close(h.t, Vec3(1, 0, 0)));
  CHECK(close(h.n, Vec3(0, 0, 1)));

  CHECK_THROWS_AS(build_frame(Vec3::Zero(), Vec3(0, 0, 1)), DegeneracyError);
  CHECK_THROWS_AS(build_frame(Vec3(1, 0, 0), Vec3::Zero()), DegeneracyError);
  CHECK_THROWS_AS(build_frame(Vec3(1, 0, 0), Vec3(3, 0, 0)), DegeneracyError);
  try {
    build_frame(Vec3(1, 0, 0), Vec3(2, 0, 0), 42);
  } catch (const DegeneracyError& e) {
    CHECK(e.index() == 42);
  }
}

TEST_CASE("frames are orthonormal and right-handed") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 1000; ++k) {
    Vec3 a = fiberkit::testing::random_unit(rng) * 3.0, b = fiberkit::testing::random_unit(rng) * 0.2;
    Frame f = build_frame(a, b);
    CHECK(std::abs(f.l.norm() - 1) < 1e-12);
    CHECK(std::abs(f.t.norm() - 1) < 1e-12);
    CHECK(std::abs(f.n.norm() - 1) < 1e-12);
    CHECK(std::abs(f.l.dot(f.t)) < 1e-12);
    CHECK(std::abs(f.l.dot(f.n)) < 1e-12);
    CHECK(std::abs(f.t.dot(f.n)) < 1e-12);
    // e_l = e_n x e_t, so (e_n, e_t, e_l) is the right-handed ordering
    Mat3 M;
    M << f.n, f.t, f.l;
    CHECK(std::abs(M.determinant() - 1.0) < 1e-10);
    CHECK((f.l - f.n.cross(f.t)).norm() < 1e-12);
  }
}

TEST_CASE("fibers_to_angles oracles") {
  Frame fr = canonical();
  auto angles_of = [&](const Vec3& f, const Vec3& s) {
    FiberTriad t{f, s, f.cross(s)};
    return fibers_to_angles(t, fr);
  };
  Angles a = angles_of(fr.l, fr.t);
  CHECK(std::abs(a.alpha) < 1e-15);
  CHECK(std::abs(a.gamma) < 1e-15);
  CHECK(std::abs(a.beta) < 1e-15);

  a = angles_of(fr.n, fr.t);
  CHECK(std::abs(a.alpha - kPi / 2) < 1e-15);
  CHECK(std::abs(a.gamma) < 1e-15);

  const double th = deg2rad(60.0);
  a = angles_of(std::cos(th) * fr.l + std::sin(th) * fr.n, fr.t);
  CHECK(std::abs(a.alpha - th) < 1e-14);
  CHECK(std::abs(a.gamma) < 1e-14);

  FiberTriad bad{fr.t, fr.l, fr.n};
  CHECK_THROWS_AS(fibers_to_angles(bad, fr), DegeneracyError);
}

TEST_CASE("angles_to_fibers oracles") {
  Frame fr = canonical();
  FiberTriad t = angles_to_fibers(Angles{0, 0, 0}, fr);
  CHECK(close(t.f, fr.l));
  CHECK(close(t.s, fr.t));
  CHECK(close(t.n, fr.n));

  t = angles_to_fibers(Angles{kPi / 2, 0, 0}, fr);
  CHECK(close(t.f, fr.n));
  CHECK(close(t.s, fr.t));

  // beta = pi/2 rotates s onto the auxiliary normal and n onto minus the auxiliary transmural.
  FiberTriad r = angles_to_fibers(Angles{0.3, 0.2, 0}, fr);
  FiberTriad q = angles_to_fibers(Angles{0.3, 0.2, kPi / 2}, fr);
  CHECK(close(q.f, r.f));
  CHECK(close(q.s, r.n, 1e-12));
  CHECK(close(q.n, -r.s, 1e-12));

  CHECK_THROWS_AS(angles_to_fibers(Angles{0, kPi / 2, 0}, fr), DegeneracyError);
}

TEST_CASE("round trip with beta = 0 over random angles and frames") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ua(-kPi, kPi), ug(deg2rad(-80), deg2rad(80));
  double err = 0;
  for (int k = 0; k < 20000; ++k) {
    Mat3 R = random_rotation(rng);
    Frame fr{R.col(0), R.col(1), R.col(2)};
    fr.l = fr.n.cross(fr.t);
    Angles in{ua(rng), ug(rng), 0.0};
    Angles out = fibers_to_angles(angles_to_fibers(in, fr), fr);
    err = std::max({err, std::abs(wrap_pi(out.alpha - in.alpha)), std::abs(out.gamma - in.gamma), std::abs(out.beta)});
  }
  CHECK(err < 1e-9);
}

TEST_CASE("direction equivalence: (alpha + pi, -gamma) flips the fiber") {
  Frame fr = canonical();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(-kPi, kPi), ug(deg2rad(-80), deg2rad(80));
  for (int k = 0; k < 2000; ++k) {
    const double a = ua(rng), g = ug(rng);
    Vec3 f1 = angles_to_fibers(Angles{a, g, 0}, fr).f;
    Vec3 f2 = angles_to_fibers(Angles{wrap_pi(a + kPi), -g, 0}, fr).f;
    CHECK((f1 + f2).norm() < 1e-12);
  }
}

TEST_CASE("normalize_angles folds gamma and keeps the fiber line") {
  Frame fr = canonical();
  Angles a{0.4, deg2rad(120.0), 0.0};
  Angles n = normalize_angles(a);
  CHECK(n.gamma > -kPi / 2);
  CHECK(n.gamma <= kPi / 2);
  Vec3 f_raw = std::cos(a.alpha) * std::cos(a.gamma) * fr.l + std::sin(a.alpha) * std::cos(a.gamma) * fr.n +
               std::sin(a.gamma) * fr.t;
  Vec3 f_n = angles_to_fibers(n, fr).f;
  CHECK(std::abs(std::abs(f_raw.dot(f_n)) - 1.0) < 1e-12);
}

TEST_CASE("slab with phi linear in x and psi linear in z gives a constant frame") {
  TetMesh m = make_box_mesh(4, 4, 4, Vec3::Zero(), Vec3::Ones());
  ScalarField phi(m.num_nodes()), psi(m.num_nodes());
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    phi[i] = m.nodes[i].x();
    psi[i] = 2 * m.nodes[i].z();
  }
  FrameFieldResult r = frame_field(m, phi, psi);
  CHECK(r.repaired == 0);
  for (const auto& f : r.frames) {
    CHECK(close(f.t, Vec3(1, 0, 0), 1e-10));
    CHECK(close(f.n, Vec3(0, 0, 1), 1e-10));
    CHECK(close(f.l, Vec3(0, 1, 0), 1e-10));
  }
}

TEST_CASE("degenerate nodes are repaired from neighbors; large patches are an error") {
  TetMesh m = make_box_mesh(6, 6, 6, Vec3::Zero(), Vec3::Ones());
  ScalarField phi(m.num_nodes()), psi(m.num_nodes());
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    const Vec3& x = m.nodes[i];
    phi[i] = x.x();
    psi[i] = x.z();
  }
  // Flatten psi around one interior node so its recovered gradient vanishes.
  int centre = -1;
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    if ((m.nodes[i] - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12) centre = static_cast<int>(i);
  REQUIRE(centre >= 0);
  NodeAdjacency adj = node_neighbors(m);
  auto [b, e] = adj.range(centre);
  for (auto it = b; it != e; ++it) psi[*it] = 0.5;
  psi[centre] = 0.5;
  FrameFieldResult r = frame_field(m, phi, psi, 0.2);
  CHECK(r.repaired >= 1);
  CHECK(close(r.frames[centre].t, Vec3(1, 0, 0), 1e-8));

  ScalarField flat(m.num_nodes(), 1.0);
  CHECK_THROWS_AS(frame_field(m, flat, psi), DegeneracyError);
}
