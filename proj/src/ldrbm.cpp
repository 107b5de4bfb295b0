#include "fiberkit/ldrbm.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fiberkit {

void validate(const PrescribedAngles& p) {
  auto in_alpha = [](double a) { return std::isfinite(a) && a > -kPi && a <= kPi; };
  auto in_gamma = [](double g) { return std::isfinite(g) && g > -kPi / 2 && g < kPi / 2; };
  if (!in_alpha(p.alpha_endo_lv) || !in_alpha(p.alpha_epi_lv) || !in_alpha(p.alpha_endo_rv) ||
      !in_alpha(p.alpha_epi_rv))
    throw ValidationError("prescribed helical angles must lie in (-180, 180] degrees");
  if (!in_gamma(p.gamma_endo_lv) || !in_gamma(p.gamma_epi_lv) || !in_gamma(p.gamma_endo_rv) ||
      !in_gamma(p.gamma_epi_rv))
    throw ValidationError("prescribed intrusion angles must lie in (-90, 90) degrees");
}

const char* to_string(Layer l) {
  switch (l) {
    case Layer::Endo: return "endo";
    case Layer::Mid: return "mid";
    case Layer::Epi: return "epi";
  }
  return "?";
}

std::vector<RegionLabel> node_sides(const TetMesh& m, const ScalarField& phi) {
  if (phi.size() != m.num_nodes()) throw ValidationError("phi length does not match node count");
  std::vector<RegionLabel> sides = node_regions(m);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (phi[i] < 0.0) sides[i] = RegionLabel::RV;
    else if (phi[i] > 0.0) sides[i] = RegionLabel::LV;
  }
  return sides;
}

ScalarField transmural_coordinate(const ScalarField& phi, double tol) {
  ScalarField w(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double p = phi[i];
    if (!(p >= -1.0 - tol && p <= 2.0 + tol))
      throw DataError("transmural distance " + std::to_string(p) + " at node " + std::to_string(i) +
                      " lies outside [-1, 2]");
    w[i] = std::clamp(p < 0.0 ? -p : 0.5 * p, 0.0, 1.0);
  }
  return w;
}

std::vector<Layer> layers_from_w(const ScalarField& w, double endo_threshold, double epi_threshold) {
  std::vector<Layer> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    out[i] = w[i] > endo_threshold ? Layer::Endo : (w[i] < epi_threshold ? Layer::Epi : Layer::Mid);
  return out;
}

AngleField ldrbm_angles(const ScalarField& w, const std::vector<RegionLabel>& sides, const PrescribedAngles& p) {
  validate(p);
  if (w.size() != sides.size()) throw ValidationError("transmural coordinate and side labels differ in length");
  AngleField out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool lv = sides[i] == RegionLabel::LV;
    const double ae = lv ? p.alpha_endo_lv : p.alpha_endo_rv, ap = lv ? p.alpha_epi_lv : p.alpha_epi_rv;
    const double ge = lv ? p.gamma_endo_lv : p.gamma_endo_rv, gp = lv ? p.gamma_epi_lv : p.gamma_epi_rv;
    const double x = w[i];
    // written so that x = 1 and x = 0 reproduce the endpoint values bit for bit
    out[i].alpha = x == 1.0 ? ae : (x == 0.0 ? ap : ae * x + ap * (1.0 - x));
    out[i].gamma = x == 1.0 ? ge : (x == 0.0 ? gp : ge * x + gp * (1.0 - x));
    out[i].beta = 0.0;
  }
  return out;
}

LdrbmResult ldrbm_fibers(const TetMesh& m, const ScalarField& phi, const ScalarField& psi, const PrescribedAngles& p) {
  LdrbmResult r;
  r.w = transmural_coordinate(phi);
  r.sides = node_sides(m, phi);
  r.angles = ldrbm_angles(r.w, r.sides, p);
  FrameFieldResult ff = frame_field(m, phi, psi);
  r.frames = std::move(ff.frames);
  r.repaired_frames = ff.repaired;
  r.triads = angles_to_fibers(r.angles, r.frames);
  return r;
}

double modal_angle_deg(const std::vector<double>& values_deg, double bin_width_deg) {
  if (values_deg.empty()) throw ValidationError("cannot take the mode of an empty set");
  if (!(bin_width_deg > 0)) throw ValidationError("bin width must be positive");
  const double nb = 180.0 / bin_width_deg;
  const long nbins = std::lround(nb);
  if (std::abs(nb - static_cast<double>(nbins)) > 1e-9) throw ValidationError("bin width must divide 180 degrees");
  std::vector<long> count(nbins, 0);
  for (double v : values_deg) {
    long k = static_cast<long>(std::floor(v / bin_width_deg + 0.5));
    k %= nbins;
    if (k < 0) k += nbins;
    count[k]++;
  }
  // center of bin k folded into (-90, 90]
  auto center = [&](long k) {
    double c = static_cast<double>(k) * bin_width_deg;
    if (c > 90.0) c -= 180.0;
    return c;
  };
  long best = -1;
  for (long k = 0; k < nbins; ++k) {
    if (best < 0 || count[k] > count[best] || (count[k] == count[best] && center(k) < center(best))) best = k;
  }
  return center(best);
}

PrescribedAngles regional_modal_angles(const AngleField& angles, const std::vector<RegionLabel>& sides,
                                       const std::vector<Layer>& layers, double bin_width_deg) {
  if (angles.size() != sides.size() || angles.size() != layers.size())
    throw ValidationError("angle, side and layer fields differ in length");
  std::map<std::pair<int, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (layers[i] == Layer::Mid) continue;
    auto& g = groups[{static_cast<int>(sides[i]), static_cast<int>(layers[i])}];
    g.first.push_back(rad2deg(angles[i].alpha));
    g.second.push_back(rad2deg(angles[i].gamma));
  }
  std::vector<std::string> missing;
  auto mode = [&](RegionLabel r, Layer l, bool alpha) {
    auto it = groups.find({static_cast<int>(r), static_cast<int>(l)});
    if (it == groups.end()) {
      std::string name = std::string(to_string(r)) + "/" + to_string(l);
      if (std::find(missing.begin(), missing.end(), name) == missing.end()) missing.push_back(name);
      return 0.0;
    }
    return deg2rad(modal_angle_deg(alpha ? it->second.first : it->second.second, bin_width_deg));
  };
  PrescribedAngles p;
  p.alpha_endo_lv = mode(RegionLabel::LV, Layer::Endo, true);
  p.alpha_epi_lv = mode(RegionLabel::LV, Layer::Epi, true);
  p.alpha_endo_rv = mode(RegionLabel::RV, Layer::Endo, true);
  p.alpha_epi_rv = mode(RegionLabel::RV, Layer::Epi, true);
  p.gamma_endo_lv = mode(RegionLabel::LV, Layer::Endo, false);
  p.gamma_epi_lv = mode(RegionLabel::LV, Layer::Epi, false);
  p.gamma_endo_rv = mode(RegionLabel::RV, Layer::Endo, false);
  p.gamma_epi_rv = mode(RegionLabel::RV, Layer::Epi, false);
  if (!missing.empty()) {
    std::string msg = "empty sub-region(s):";
    for (auto& s : missing) msg += " " + s;
    throw ValidationError(msg);
  }
  return p;
}

}  // namespace fiberkit
