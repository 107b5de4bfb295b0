#pragma once

#include "fiberkit/frames.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fiberkit {

struct Conductivities {  // m^2/s
  double sigma_f = 2.0e-4;
  double sigma_s = 1.0e-4;
  double sigma_n = 1.0e-4;
};

// Per-cell tensors: the four nodal tensors sigma_f f(x)f + ... are averaged, which is insensitive to
// the sign of each triad vector. With F given (one per cell) each direction is pushed forward and
// normalized.
std::vector<Mat3> build_conductivity(const TetMesh& m, const TriadField& triads, const Conductivities& sigma,
                                     const std::vector<Mat3>* F = nullptr);

struct StimulationSite {
  std::vector<int> nodes;         // explicit node set, or
  std::optional<Vec3> center;     // sphere center (m)
  double radius = 0.0;            // sphere radius (m)
  double onset = 0.0;             // s
};

// Parses "x,y,z,r,t" (SI units).
StimulationSite parse_stimulus(const std::string& spec);

struct EikonalOptions {
  double tolerance = 1e-9;        // s, convergence threshold of a node update
  long max_updates_factor = 2000;  // total node updates capped at factor * nodes
  // A single-node stimulus seeds every node within this many mean edge lengths with the exact
  // arrival time of the local metric (0 disables). Removes the point-source interpolation error.
  double point_source_layers = 10.0;
};

struct EikonalResult {
  ScalarField T;
  long updates = 0;
  long final_sweep_updates = 0;  // nodes lowered by the verification sweep
  long metric_obtuse_tets = 0;   // tets where the local causality condition fails
  double max_final_change = 0.0;
};

EikonalResult solve_eikonal(const TetMesh& m, const std::vector<Mat3>& D, double c0,
                            const std::vector<StimulationSite>& stimuli, const EikonalOptions& opts = {});

// Sampled transient over one period; evaluation is periodic with linear interpolation.
struct CalciumTransient {
  std::vector<double> t;      // s, strictly increasing within [0, period]
  std::vector<double> value;  // concentration, >= 0
  double period = 0.2;

  void validate() const;
  double operator()(double time) const;
};

// Ca(x, t) = transient((t - T(x)) mod period).
class ShiftedCalcium {
 public:
  ShiftedCalcium(ScalarField activation, CalciumTransient transient);
  double at(std::size_t node, double t) const;
  ScalarField snapshot(double t) const;

 private:
  ScalarField T_;
  CalciumTransient tr_;
};

ShiftedCalcium shift_calcium(const ScalarField& activation, const CalciumTransient& transient, double T_HB);

// [Ca] = Kd (F - Fmin) / (Fmax - F). F >= Fmax is an error; F < Fmin is clamped to 0 with a warning.
std::vector<double> fluorescence_to_calcium(const std::vector<double>& F, double Kd, double Fmin, double Fmax,
                                            std::vector<std::string>* warnings = nullptr);

}  // namespace fiberkit
