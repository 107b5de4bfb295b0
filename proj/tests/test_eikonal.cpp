#include "fiberkit/eikonal.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

using namespace fiberkit;
using fiberkit::testing::random_rotation;

namespace {

TetMesh centred_box(int n, double half) {
  return make_box_mesh(n, n, n, Vec3::Constant(-half), Vec3::Constant(half));
}

int nearest_node(const TetMesh& m, const Vec3& x) {
  int best = 0;
  for (std::size_t i = 1; i < m.num_nodes(); ++i)
    if ((m.nodes[i] - x).norm() < (m.nodes[best] - x).norm()) best = static_cast<int>(i);
  return best;
}

StimulationSite at_node(int v, double onset = 0.0) {
  StimulationSite s;
  s.nodes = {v};
  s.onset = onset;
  return s;
}

std::vector<Mat3> isotropic(const TetMesh& m, double sigma) { return std::vector<Mat3>(m.num_tets(), sigma * Mat3::Identity()); }

CalciumTransient triangle() {
  CalciumTransient c;
  c.period = 0.2;
  c.t = {0.0, 0.02, 0.1, 0.2};
  c.value = {0.1, 1.0, 0.4, 0.1};
  return c;
}

}  // namespace

TEST_CASE("conductivity tensor oracles") {
  TetMesh m = make_box_mesh(1, 1, 1, Vec3::Zero(), Vec3::Ones());
  std::mt19937_64 rng(1);
  Mat3 R = random_rotation(rng);
  TriadField tr(m.num_nodes(), FiberTriad{R.col(0), R.col(1), R.col(2)});

  for (const Mat3& D : build_conductivity(m, tr, Conductivities{3e-4, 3e-4, 3e-4}))
    CHECK((D - 3e-4 * Mat3::Identity()).norm() < 1e-18);

  Conductivities table;  // 2e-4, 1e-4, 1e-4
  for (const Mat3& D : build_conductivity(m, tr, table)) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(D);
    CHECK(std::abs(es.eigenvalues()[2] - 2e-4) < 1e-16);
    CHECK(std::abs(es.eigenvalues()[1] - 1e-4) < 1e-16);
    CHECK(std::abs(es.eigenvalues()[0] - 1e-4) < 1e-16);
    CHECK(std::abs(std::abs(es.eigenvectors().col(2).dot(R.col(0))) - 1.0) < 1e-10);
  }

  TriadField ax(m.num_nodes(), FiberTriad{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)});
  std::vector<Mat3> F(m.num_tets(), Vec3(1.3, 1, 1).asDiagonal());
  std::vector<Mat3> D0 = build_conductivity(m, ax, table), D1 = build_conductivity(m, ax, table, &F);
  for (std::size_t t = 0; t < D0.size(); ++t) CHECK((D0[t] - D1[t]).norm() < 1e-18);

  // Sign flips of triad vectors do not change the tensor.
  TriadField flipped = tr;
  for (auto& t : flipped) t = {-t.f, t.s, -t.n};
  std::vector<Mat3> Da = build_conductivity(m, tr, table), Db = build_conductivity(m, flipped, table);
  for (std::size_t t = 0; t < Da.size(); ++t) CHECK((Da[t] - Db[t]).norm() < 1e-18);

  CHECK_THROWS_AS(build_conductivity(m, tr, Conductivities{-1, 1, 1}), ValidationError);
}

TEST_CASE("stimulus parsing") {
  StimulationSite s = parse_stimulus("1e-3,0,-2e-3,5e-4,0.005");
  REQUIRE(s.center.has_value());
  CHECK((*s.center - Vec3(1e-3, 0, -2e-3)).norm() == 0.0);
  CHECK(s.radius == 5e-4);
  CHECK(s.onset == 0.005);
  CHECK_THROWS_AS(parse_stimulus("1,2,3"), ValidationError);
  CHECK_THROWS_AS(parse_stimulus("1,2,3,x,0"), ValidationError);
  CHECK_THROWS_AS(parse_stimulus("0,0,0,1,-1"), ValidationError);
}

TEST_CASE("isotropic point source matches the distance function") {
  TetMesh m = centred_box(32, 1e-3);
  const double sigma = 1e-4, c0 = 55.0;
  const int src = nearest_node(m, Vec3::Zero());
  EikonalResult r = solve_eikonal(m, isotropic(m, sigma), c0, {at_node(src)});
  CHECK(r.final_sweep_updates == 0);
  CHECK(r.T[src] == 0.0);
  const double v = c0 * std::sqrt(sigma);
  double err = 0;
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    const double d = (m.nodes[i] - m.nodes[src]).norm();
    if (d == 0) continue;
    err = std::max(err, std::abs(r.T[i] - d / v) / (d / v));
  }
  CHECK(err < 0.02);
}

TEST_CASE("activation invariants: onsets, lower bound, scaling in c0") {
  TetMesh m = centred_box(10, 1e-3);
  std::vector<Mat3> D = isotropic(m, 2e-4);
  StimulationSite s;
  s.center = Vec3(-1e-3, -1e-3, -1e-3);
  s.radius = 0.25e-3;
  s.onset = 0.002;
  EikonalResult a = solve_eikonal(m, D, 55.0, {s});
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    CHECK(a.T[i] >= 0.002);
    if ((m.nodes[i] - *s.center).norm() <= s.radius) CHECK(a.T[i] == 0.002);
  }
  s.onset = 0.0;
  EikonalResult b = solve_eikonal(m, D, 55.0, {s}), c = solve_eikonal(m, D, 110.0, {s});
  for (std::size_t i = 0; i < m.num_nodes(); ++i) CHECK(std::abs(c.T[i] - 0.5 * b.T[i]) <= 1e-9);
}

TEST_CASE("two stimuli give the pointwise minimum of the single solutions") {
  TetMesh m = centred_box(12, 1e-3);
  TriadField tr(m.num_nodes(), FiberTriad{Vec3(1, 1, 0).normalized(), Vec3(-1, 1, 0).normalized(), Vec3(0, 0, 1)});
  std::vector<Mat3> D = build_conductivity(m, tr, Conductivities{});
  StimulationSite s1 = at_node(nearest_node(m, Vec3(-1e-3, -1e-3, 0))), s2 = at_node(nearest_node(m, Vec3(1e-3, 0, 1e-3)), 0.004);
  EikonalResult a = solve_eikonal(m, D, 55.0, {s1}), b = solve_eikonal(m, D, 55.0, {s2}), ab = solve_eikonal(m, D, 55.0, {s1, s2});
  for (std::size_t i = 0; i < m.num_nodes(); ++i) CHECK(std::abs(ab.T[i] - std::min(a.T[i], b.T[i])) <= 1e-9);
}

TEST_CASE("rotating mesh and fibers together leaves activation unchanged") {
  TetMesh m = centred_box(8, 1e-3);
  std::mt19937_64 rng(2);
  Mat3 Q = random_rotation(rng);
  TriadField tr(m.num_nodes(), FiberTriad{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)});
  TetMesh r = m;
  for (auto& x : r.nodes) x = Q * x;
  TriadField rt = tr;
  for (auto& t : rt) t = {Q * t.f, Q * t.s, Q * t.n};
  const int src = nearest_node(m, Vec3(-1e-3, 0, 0));
  EikonalResult a = solve_eikonal(m, build_conductivity(m, tr, Conductivities{}), 55.0, {at_node(src)});
  EikonalResult b = solve_eikonal(r, build_conductivity(r, rt, Conductivities{}), 55.0, {at_node(src)});
  for (std::size_t i = 0; i < m.num_nodes(); ++i) CHECK(std::abs(a.T[i] - b.T[i]) <= 1e-9);
}

TEST_CASE("refinement reduces the point-source error") {
  const double sigma = 1e-4, c0 = 55.0, v = c0 * std::sqrt(sigma);
  auto error = [&](int n) {
    TetMesh m = centred_box(n, 1e-3);
    const int src = nearest_node(m, Vec3::Zero());
    EikonalOptions raw;
    raw.point_source_layers = 0;
    EikonalResult r = solve_eikonal(m, isotropic(m, sigma), c0, {at_node(src)}, raw);
    double e = 0;
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
      const double d = (m.nodes[i] - m.nodes[src]).norm();
      e = std::max(e, std::abs(r.T[i] - d / v));
    }
    return e;
  };
  // without the exact source patch the point-source error decays like h log(1/h)
  const double e1 = error(8), e2 = error(16);
  CHECK(e2 < e1);
  CHECK(std::log2(e1 / e2) >= 0.5);
}

TEST_CASE("eikonal input errors") {
  TetMesh m = centred_box(2, 1e-3);
  std::vector<Mat3> D = isotropic(m, 1e-4);
  CHECK_THROWS_AS(solve_eikonal(m, D, 55.0, {}), ValidationError);
  CHECK_THROWS_AS(solve_eikonal(m, D, 0.0, {at_node(0)}), ValidationError);
  StimulationSite far;
  far.center = Vec3(1, 1, 1);
  far.radius = 1e-6;
  CHECK_THROWS_AS(solve_eikonal(m, D, 55.0, {far}), ValidationError);
  CHECK_THROWS_AS(solve_eikonal(m, D, 55.0, {at_node(100000)}), ValidationError);

  // Two disconnected tets: the second is never reached.
  TetMesh two;
  two.nodes = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1),
               Vec3(5, 0, 0), Vec3(6, 0, 0), Vec3(5, 1, 0), Vec3(5, 0, 1)};
  two.tets = {{0, 1, 2, 3}, {4, 5, 6, 7}};
  two.regions = {RegionLabel::LV, RegionLabel::LV};
  CHECK_THROWS_AS(solve_eikonal(two, isotropic(two, 1e-4), 55.0, {at_node(0)}), SolverError);
}

TEST_CASE("calcium transient: periodic interpolation and shifting") {
  CalciumTransient c = triangle();
  CHECK_NOTHROW(c.validate());
  CHECK(c(0.02) == doctest::Approx(1.0));
  CHECK(c(0.01) == doctest::Approx(0.55));
  CHECK(c(0.22) == doctest::Approx(c(0.02)));
  CHECK(c(-0.18) == doctest::Approx(c(0.02)));

  ShiftedCalcium sc = shift_calcium({0.0, 0.005}, c, 0.2);
  for (double t : {0.0, 0.013, 0.05, 0.19}) {
    CHECK(sc.at(0, t) == doctest::Approx(c(t)));
    CHECK(sc.at(1, t) == doctest::Approx(c(t - 0.005)));
  }

  CalciumTransient bad = c;
  bad.value[1] = -1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.t[2] = 0.01;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.value.back() = 5.0;  // seam jump larger than any step
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("fluorescence to calcium") {
  const double Kd = 320, Fmin = 3600, Fmax = 11110;
  std::vector<std::string> w;
  std::vector<double> ca = fluorescence_to_calcium({Fmin, 7355, 9000, 3000}, Kd, Fmin, Fmax, &w);
  CHECK(ca[0] == 0.0);
  CHECK(ca[1] == doctest::Approx(320.0).epsilon(1e-12));
  CHECK(ca[2] == doctest::Approx(320.0 * 5400.0 / 2110.0).epsilon(1e-12));
  CHECK(std::abs(ca[2] - 819.0) < 0.1);
  CHECK(ca[3] == 0.0);
  CHECK(w.size() == 1);
  CHECK_THROWS_AS(fluorescence_to_calcium({Fmax}, Kd, Fmin, Fmax), DataError);
}
