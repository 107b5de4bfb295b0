#pragma once

#include "fiberkit/circ0d.hpp"
#include "fiberkit/eikonal.hpp"
#include "fiberkit/laplace.hpp"
#include "fiberkit/ldrbm.hpp"
#include "fiberkit/mesh.hpp"
#include "fiberkit/tissue.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fiberkit {

struct FiberConfig {
  std::vector<double> ells{0.0, 0.125e-3, 0.25e-3, 0.5e-3};  // m
  double alpha_noise_std_deg = 45.68;
  double gamma_noise_std_deg = 25.39;
  double disorder_fraction = 0.0;
  int hist_bins = 36;
};

struct EikonalConfig {
  Conductivities sigma;
  double c0 = 55.0;  // s^-1/2
  std::vector<StimulationSite> stimuli;
  double tolerance = 1e-9;
  double isochrone_spacing = 1e-3;  // s
};

struct TissueConfig {
  UsykParams usyk;
  double a_xb = 23e6;  // Pa
  double lv_contractility = 1.0;
  double rv_contractility = 0.5;
  std::array<double, 3> stress_factors{1.0, 0.0, 0.0};
  bool sf_passthrough = false;
};

struct CircConfig {
  CircParams params;
  int beats = 30;
  int stride = 50;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "fiberkit_out";
};

struct Config {
  BiventricleParams geometry;
  SolverOptions laplace;
  PrescribedAngles ldrbm;
  double modal_bin_width_deg = 5.0;
  FiberConfig fiber;
  EikonalConfig eikonal;
  TissueConfig tissue;
  CircConfig circ;
  RunConfig run;
};

Config default_config();

// INI text with sections [geometry] [laplace] [ldrbm] [fiberfield] [eikonal] [tissue] [circulation]
// [run]. Missing keys take defaults; unknown keys and invalid values are reported together in one
// ConfigError.
Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

// Fully resolved key = value listing in schema order; its hash identifies a run.
std::string canonical_config(const Config& c);
std::string config_hash(const Config& c);

// Schema lookup for diagnostics.
std::vector<std::string> config_keys();
std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates);

}  // namespace fiberkit
