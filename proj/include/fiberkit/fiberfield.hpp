#pragma once

#include "fiberkit/frames.hpp"
#include "fiberkit/laplace.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace fiberkit {

struct Embedded {
  ScalarField sin2, cos2;
};

// Doubled-angle embedding: theta and theta + pi map to the same point.
Embedded embed(const ScalarField& theta);
ScalarField alpha_channel(const AngleField& a);
ScalarField gamma_channel(const AngleField& a);

// Screened-Poisson smoother (M_L + ell^2 K) u = M_L eta with a lumped mass, natural boundary
// conditions. Construct once per (mesh, ell) and apply to many fields.
class HelmholtzFilter {
 public:
  HelmholtzFilter(const TetMesh& m, double ell, const SolverOptions& opts = {});
  ScalarField apply(const ScalarField& eta, SolveStats* stats = nullptr) const;
  double ell() const { return ell_; }

 private:
  double ell_;
  SolverOptions opts_;
  std::vector<double> lumped_;
  SparseMatrix A_;
};

ScalarField helmholtz_filter(const TetMesh& m, const ScalarField& eta, double ell, const SolverOptions& opts = {});

// Smooths alpha and gamma through their doubled-angle embeddings; beta is returned as zero.
AngleField smooth_angles(const TetMesh& m, const AngleField& angles, double ell, const SolverOptions& opts = {});
AngleField smooth_angles(const HelmholtzFilter& filter, const AngleField& angles);

struct Disarray {
  ScalarField eps_alpha, eps_gamma;  // wrapped to (-pi/2, pi/2]
};

struct Decomposition {
  AngleField macroscopic;
  Disarray disarray;
};

Decomposition decompose(const TetMesh& m, const AngleField& angles, double ell, const SolverOptions& opts = {});
Decomposition decompose(const HelmholtzFilter& filter, const AngleField& angles);

// ---- circular statistics on direction (period pi) data ----

struct CircularSummary {
  double mean = 0.0;       // radians, (-pi/2, pi/2]
  double resultant = 0.0;  // length of the doubled-angle mean vector
  double std = 0.0;        // radians: 0.5 * sqrt(-2 ln R)
  std::size_t count = 0;
};

CircularSummary circular_summary(const std::vector<double>& theta, const std::vector<double>* weights = nullptr);
double circular_std_from_resultant(double R);
double resultant_from_circular_std(double s);

struct RegionHistogram {
  std::string region;
  std::vector<double> bin_centers_deg;
  std::vector<long> counts;
  CircularSummary summary;
};

// Histograms over (-90, 90] with `bins` equal bins plus circular mean/std, per region label.
// labels[i] indexes into region_names; an empty region is an error.
std::vector<RegionHistogram> angle_statistics(const ScalarField& theta, const std::vector<int>& labels,
                                              const std::vector<std::string>& region_names, int bins);

struct ProjectionStats {
  double mean_abs_ff = 0.0, mean_abs_fs = 0.0, mean_abs_fn = 0.0;
  double norm() const;
};

struct ProjectionReport {
  ProjectionStats global;
  std::vector<std::pair<std::string, ProjectionStats>> regions;
  double max_unit_defect = 0.0;  // max over nodes of |ff^2 + fs^2 + fn^2 - 1|
};

ProjectionReport projection_stats(const TetMesh& m, const TriadField& measured, const TriadField& reference,
                                  const std::vector<int>& labels = {},
                                  const std::vector<std::string>& region_names = {});

// ---- synthetic disarray ----

struct DisarrayNoise {
  double kappa_alpha = std::numeric_limits<double>::infinity();
  double kappa_gamma = std::numeric_limits<double>::infinity();
  double disorder_fraction = 0.0;  // share of nodes given a uniformly random direction
};

// Mean resultant length I1/I0 of the von Mises law.
double von_mises_resultant(double kappa);
// Concentration whose doubled-angle noise has the given circular std (radians, direction data).
double kappa_for_circular_std(double std_rad);

// Perturbs (alpha, gamma) of each node relative to its frame: eps = Y/2 with Y ~ VonMises(0, kappa).
TriadField synthesize_disarray(const FrameField& frames, const TriadField& base, const DisarrayNoise& noise,
                               std::uint64_t seed);

// Expected projection means (|f.f0|, |f.s0|, |f.n0|) for a base field with zero intrusion and
// sheet angle; exact quadrature, independent of the helical angle.
ProjectionStats expected_projection(const DisarrayNoise& noise);
// Noise parameters reproducing the requested projection means.
DisarrayNoise calibrate_projection_noise(const ProjectionStats& target);

}  // namespace fiberkit
