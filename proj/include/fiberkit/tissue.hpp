#pragma once

#include "fiberkit/frames.hpp"

#include <array>

namespace fiberkit {

// Orthotropic exponential strain energy; the transversely isotropic default collapses b_s, b_n,
// b_fn and b_sn to one value.
struct UsykParams {
  double b_f = 5.0, b_s = 3.7, b_n = 3.7;
  double b_fs = 2.6, b_fn = 3.7, b_sn = 3.7;
  double c = 2.0e3;      // Pa
  double bulk = 5.0e4;   // Pa
  void validate() const;
};

struct StressFactors {
  double m_f = 1.0, m_s = 0.0, m_n = 0.0;
  double norm() const;
};

// W = c/2 (exp(Q) - 1) + bulk/2 (J - 1) ln J, with Q quadratic in the Green-Lagrange strain
// expressed in the (f, s, n) basis.
double usyk_energy(const Mat3& F, const FiberTriad& triad, const UsykParams& p);

// Passive second Piola-Kirchhoff stress (global basis).
Mat3 usyk_pk2(const Mat3& F, const FiberTriad& triad, const UsykParams& p);

// First Piola stress: exact derivative of usyk_energy plus the rank-one active terms
// m_i Ta (F a_i) (x) a_i / |F a_i|.
Mat3 piola_stress(const Mat3& F, const FiberTriad& triad, double Ta, const StressFactors& sf, const UsykParams& p);
Mat3 active_piola(const Mat3& F, const FiberTriad& triad, double Ta, const StressFactors& sf);

// Ta = a_XB * G.
double active_tension(double drive, double a_xb);

// Unit-norm scaling of nonnegative factors; passthrough keeps them as given (projection-derived
// factors have norm below one on purpose).
StressFactors normalize_sf(const std::array<double, 3>& raw, bool passthrough = false);

struct StrainInvariants {
  double I1 = 0.0, I2 = 0.0, I3 = 1.0;
};

// I1 = tr E, I2 = ((tr E)^2 - tr(E^2)) / 2, I3 = det(F^T F) with F = I + grad_d.
StrainInvariants green_lagrange_invariants(const Mat3& grad_d);

// Per-cell invariants of a nodal displacement field, averaged to nodes by cell volume.
struct InvariantFields {
  ScalarField I1, I2, I3;
};
InvariantFields strain_invariant_fields(const TetMesh& m, const VectorField& displacement);

}  // namespace fiberkit
