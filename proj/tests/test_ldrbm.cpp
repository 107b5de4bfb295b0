#include "fiberkit/laplace.hpp"
#include "fiberkit/ldrbm.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace fiberkit;

namespace {

struct Heart {
  TetMesh mesh;
  ScalarField phi, psi;
};

const Heart& coarse_heart() {
  static const Heart h = [] {
    BiventricleParams p;
    p.edge_length = 0.5e-3;
    Heart h;
    h.mesh = generate_idealized_biventricle(p);
    h.phi = solve_laplace(h.mesh, {{SurfaceLabel::Epi, 0.0}, {SurfaceLabel::EndoRV, -1.0}, {SurfaceLabel::EndoLV, 2.0}});
    h.psi = solve_laplace(h.mesh, {{SurfaceLabel::Apex, 0.0}, {SurfaceLabel::Base, 1.0}});
    return h;
  }();
  return h;
}

}  // namespace

TEST_CASE("transmural coordinate oracles") {
  ScalarField w = transmural_coordinate({-1.0, 2.0, 1.0, 0.0, -0.5});
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 1.0);
  CHECK(w[2] == 0.5);
  CHECK(w[3] == 0.0);
  CHECK(w[4] == 0.5);
  CHECK_THROWS_AS(transmural_coordinate({2.1}), DataError);
  CHECK_THROWS_AS(transmural_coordinate({-1.5}), DataError);
}

TEST_CASE("convex combination endpoints and midpoint") {
  PrescribedAngles p;
  p.alpha_endo_lv = deg2rad(-60);
  p.alpha_epi_lv = deg2rad(60);
  std::vector<RegionLabel> lv(3, RegionLabel::LV);
  AngleField a = ldrbm_angles({1.0, 0.0, 0.5}, lv, p);
  CHECK(a[0].alpha == p.alpha_endo_lv);
  CHECK(a[1].alpha == p.alpha_epi_lv);
  CHECK(std::abs(a[2].alpha) < 1e-15);

  PrescribedAngles paper;  // LV endo -76, epi 22
  AngleField m = ldrbm_angles({0.5}, {RegionLabel::LV}, paper);
  CHECK(std::abs(rad2deg(m[0].alpha) - (-27.0)) < 1e-12);
}

TEST_CASE("invalid prescriptions are rejected") {
  PrescribedAngles p;
  p.gamma_epi_rv = kPi / 2;
  CHECK_THROWS_AS(validate(p), ValidationError);
  p = PrescribedAngles{};
  p.alpha_endo_lv = 4.0;
  CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("endpoint exactness and monotone profile on the biventricle") {
  const Heart& h = coarse_heart();
  PrescribedAngles p;
  p.alpha_endo_rv = deg2rad(-50);
  p.alpha_epi_rv = deg2rad(30);
  ScalarField w = transmural_coordinate(h.phi);
  auto sides = node_sides(h.mesh, h.phi);
  AngleField a = ldrbm_angles(w, sides, p);
  auto endo_lv = nodes_on(h.mesh, {SurfaceLabel::EndoLV});
  auto endo_rv = nodes_on(h.mesh, {SurfaceLabel::EndoRV});
  auto epi = nodes_on(h.mesh, {SurfaceLabel::Epi, SurfaceLabel::Apex});
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool lv = sides[i] == RegionLabel::LV;
    const double ae = lv ? p.alpha_endo_lv : p.alpha_endo_rv, ap = lv ? p.alpha_epi_lv : p.alpha_epi_rv;
    if (endo_lv[i]) CHECK(std::abs(a[i].alpha - p.alpha_endo_lv) < 1e-8);
    if (endo_rv[i]) CHECK(std::abs(a[i].alpha - p.alpha_endo_rv) < 1e-8);
    if (epi[i] && !endo_lv[i] && !endo_rv[i]) CHECK(std::abs(a[i].alpha - ap) < 1e-8);
    CHECK(a[i].alpha >= std::min(ae, ap) - 1e-12);
    CHECK(a[i].alpha <= std::max(ae, ap) + 1e-12);
    CHECK(std::abs(a[i].alpha - (ae * w[i] + ap * (1 - w[i]))) < 1e-12);
  }
}

TEST_CASE("composition: recovered angles match the prescription") {
  const Heart& h = coarse_heart();
  PrescribedAngles p;
  p.alpha_endo_lv = deg2rad(-60);
  p.alpha_epi_lv = deg2rad(60);
  p.gamma_endo_lv = deg2rad(10);
  LdrbmResult r = ldrbm_fibers(h.mesh, h.phi, h.psi, p);
  AngleField back = fibers_to_angles(r.triads, r.frames);
  double err = 0;
  for (std::size_t i = 0; i < back.size(); ++i)
    err = std::max({err, std::abs(wrap_pi(back[i].alpha - r.angles[i].alpha)), std::abs(back[i].gamma - r.angles[i].gamma)});
  CHECK(err < 1e-6);
}

TEST_CASE("zero prescription gives fibers along the circumferential direction") {
  const Heart& h = coarse_heart();
  PrescribedAngles z{0, 0, 0, 0, 0, 0, 0, 0};
  LdrbmResult r = ldrbm_fibers(h.mesh, h.phi, h.psi, z);
  for (std::size_t i = 0; i < r.triads.size(); ++i) CHECK((r.triads[i].f - r.frames[i].l).norm() < 1e-12);
}

TEST_CASE("modal angle oracles") {
  CHECK(modal_angle_deg(std::vector<double>(10, 30.0), 5.0) == 30.0);
  CHECK(modal_angle_deg({10, 10, 20}, 5.0) == 10.0);
  CHECK(modal_angle_deg({89, 89, -89, 0}, 5.0) == 90.0);  // +-89 share the seam bin
  CHECK_THROWS_AS(modal_angle_deg({}, 5.0), ValidationError);
  CHECK_THROWS_AS(modal_angle_deg({1.0}, 7.0), ValidationError);
}

TEST_CASE("regional modes recover synthetic von Mises modes within one bin") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 8.0);
  AngleField a;
  std::vector<RegionLabel> sides;
  std::vector<Layer> layers;
  const double modes[2][2] = {{-76, 22}, {-60, 40}};  // [side][endo, epi]
  for (int s = 0; s < 2; ++s)
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 4000; ++k) {
        a.push_back(Angles{deg2rad(modes[s][l] + g(rng)), deg2rad(g(rng)), 0});
        sides.push_back(s == 0 ? RegionLabel::LV : RegionLabel::RV);
        layers.push_back(l == 0 ? Layer::Endo : Layer::Epi);
      }
  PrescribedAngles p = regional_modal_angles(a, sides, layers, 5.0);
  CHECK(std::abs(rad2deg(p.alpha_endo_lv) + 76) <= 5.0);
  CHECK(std::abs(rad2deg(p.alpha_epi_lv) - 22) <= 5.0);
  CHECK(std::abs(rad2deg(p.alpha_endo_rv) + 60) <= 5.0);
  CHECK(std::abs(rad2deg(p.alpha_epi_rv) - 40) <= 5.0);
  CHECK(std::abs(rad2deg(p.gamma_endo_lv)) <= 5.0);

  layers.assign(layers.size(), Layer::Endo);
  CHECK_THROWS_AS(regional_modal_angles(a, sides, layers, 5.0), ValidationError);
}
