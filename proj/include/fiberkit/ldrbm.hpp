#pragma once

#include "fiberkit/frames.hpp"

#include <string>
#include <vector>

namespace fiberkit {

struct PrescribedAngles {  // radians
  double alpha_endo_lv = deg2rad(-76.0);
  double alpha_epi_lv = deg2rad(22.0);
  double alpha_endo_rv = deg2rad(-76.0);
  double alpha_epi_rv = deg2rad(22.0);
  double gamma_endo_lv = 0.0;
  double gamma_epi_lv = 0.0;
  double gamma_endo_rv = 0.0;
  double gamma_epi_rv = 0.0;
};

void validate(const PrescribedAngles& p);

enum class Layer : int { Endo = 0, Mid = 1, Epi = 2 };
const char* to_string(Layer l);

// Ventricle side of each node: sign of phi, and for phi == 0 the majority region of incident tets.
std::vector<RegionLabel> node_sides(const TetMesh& m, const ScalarField& phi);

// w = -phi on the RV side, phi/2 on the LV side, clamped to [0, 1]. Throws DataError if phi leaves
// [-1 - tol, 2 + tol].
ScalarField transmural_coordinate(const ScalarField& phi, double tol = 1e-8);

std::vector<Layer> layers_from_w(const ScalarField& w, double endo_threshold = 2.0 / 3.0,
                                 double epi_threshold = 1.0 / 3.0);

AngleField ldrbm_angles(const ScalarField& w, const std::vector<RegionLabel>& sides, const PrescribedAngles& p);

struct LdrbmResult {
  ScalarField w;
  std::vector<RegionLabel> sides;
  AngleField angles;
  FrameField frames;
  TriadField triads;
  std::size_t repaired_frames = 0;
};

LdrbmResult ldrbm_fibers(const TetMesh& m, const ScalarField& phi, const ScalarField& psi, const PrescribedAngles& p);

// Bin center (degrees) of the fullest bin of a 180-degree-periodic histogram; bins are centered on
// multiples of bin_width_deg, ties go to the smaller center.
double modal_angle_deg(const std::vector<double>& values_deg, double bin_width_deg);

// Modal alpha/gamma per (ventricle, endo/epi layer).
PrescribedAngles regional_modal_angles(const AngleField& angles, const std::vector<RegionLabel>& sides,
                                       const std::vector<Layer>& layers, double bin_width_deg = 5.0);

}  // namespace fiberkit
