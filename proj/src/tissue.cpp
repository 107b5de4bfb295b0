#include "fiberkit/tissue.hpp"

#include <cmath>

namespace fiberkit {

void UsykParams::validate() const {
  for (double v : {b_f, b_s, b_n, b_fs, b_fn, b_sn, c, bulk})
    if (!(v > 0) || !std::isfinite(v)) throw ValidationError("constitutive parameters must be positive");
}

double StressFactors::norm() const { return std::sqrt(m_f * m_f + m_s * m_s + m_n * m_n); }

namespace {

Mat3 basis(const FiberTriad& t) {
  Mat3 Q;
  Q.col(0) = t.f;
  Q.col(1) = t.s;
  Q.col(2) = t.n;
  return Q;
}

Mat3 coefficients(const UsykParams& p) {
  Mat3 b;
  b << p.b_f, p.b_fs, p.b_fn,
       p.b_fs, p.b_s, p.b_sn,
       p.b_fn, p.b_sn, p.b_n;
  return b;
}

double checked_det(const Mat3& F) {
  double J = F.determinant();
  if (!(J > 0)) throw DataError("inverted deformation (det F = " + std::to_string(J) + ")");
  return J;
}

// local strain and exponent
void local_strain(const Mat3& F, const FiberTriad& triad, const UsykParams& p, Mat3& Qb, Mat3& El, double& Q) {
  Qb = basis(triad);
  Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
  El = Qb.transpose() * E * Qb;
  Q = (coefficients(p).array() * El.array().square()).sum();
}

}  // namespace

double usyk_energy(const Mat3& F, const FiberTriad& triad, const UsykParams& p) {
  const double J = checked_det(F);
  Mat3 Qb, El;
  double Q;
  local_strain(F, triad, p, Qb, El, Q);
  return 0.5 * p.c * std::expm1(Q) + 0.5 * p.bulk * (J - 1.0) * std::log(J);
}

Mat3 usyk_pk2(const Mat3& F, const FiberTriad& triad, const UsykParams& p) {
  checked_det(F);
  Mat3 Qb, El;
  double Q;
  local_strain(F, triad, p, Qb, El, Q);
  Mat3 Sl = p.c * std::exp(Q) * (coefficients(p).array() * El.array()).matrix();
  return Qb * Sl * Qb.transpose();
}

Mat3 active_piola(const Mat3& F, const FiberTriad& triad, double Ta, const StressFactors& sf) {
  if (!(Ta >= 0)) throw ValidationError("active tension must be non-negative");
  Mat3 P = Mat3::Zero();
  auto term = [&](const Vec3& a, double m) {
    if (m == 0.0) return;
    Vec3 Fa = F * a;
    P += m * Ta * Fa * a.transpose() / Fa.norm();
  };
  term(triad.f, sf.m_f);
  term(triad.s, sf.m_s);
  term(triad.n, sf.m_n);
  return P;
}

Mat3 piola_stress(const Mat3& F, const FiberTriad& triad, double Ta, const StressFactors& sf, const UsykParams& p) {
  const double J = checked_det(F);
  Mat3 P = F * usyk_pk2(F, triad, p);
  P += 0.5 * p.bulk * (J * std::log(J) + J - 1.0) * F.inverse().transpose();
  return P + active_piola(F, triad, Ta, sf);
}

double active_tension(double drive, double a_xb) {
  if (!(drive >= 0) || !(a_xb >= 0)) throw ValidationError("drive and crossbridge stiffness must be non-negative");
  return a_xb * drive;
}

StressFactors normalize_sf(const std::array<double, 3>& raw, bool passthrough) {
  for (double v : raw)
    if (!(v >= 0) || !std::isfinite(v)) throw ValidationError("stress factors must be finite and non-negative");
  StressFactors sf{raw[0], raw[1], raw[2]};
  const double n = sf.norm();
  if (n == 0.0) throw ValidationError("stress factors are all zero");
  if (passthrough) return sf;
  return {raw[0] / n, raw[1] / n, raw[2] / n};
}

StrainInvariants green_lagrange_invariants(const Mat3& grad_d) {
  const Mat3 F = Mat3::Identity() + grad_d;
  checked_det(F);
  const Mat3 C = F.transpose() * F;
  const Mat3 E = 0.5 * (C - Mat3::Identity());
  const double tr = E.trace();
  return {tr, 0.5 * (tr * tr - (E * E).trace()), C.determinant()};
}

InvariantFields strain_invariant_fields(const TetMesh& m, const VectorField& u) {
  if (u.size() != m.num_nodes()) throw ValidationError("displacement must be nodal");
  const std::size_t n = m.num_nodes();
  std::vector<StrainInvariants> cell(m.num_tets());
  std::vector<double> vol(m.num_tets());
  parallel_for(m.num_tets(), [&](std::size_t t) {
    TetGeometry g = tet_geometry(m, t);
    Mat3 H = Mat3::Zero();
    for (int k = 0; k < 4; ++k) H += u[m.tets[t][k]] * g.grad.row(k);
    try {
      cell[t] = green_lagrange_invariants(H);
    } catch (const DataError&) {
      throw DataError("inverted deformation in cell " + std::to_string(t));
    }
    vol[t] = g.volume;
  });
  InvariantFields out{ScalarField(n, 0.0), ScalarField(n, 0.0), ScalarField(n, 0.0)};
  ScalarField w(n, 0.0);
  for (std::size_t t = 0; t < m.num_tets(); ++t)
    for (int v : m.tets[t]) {
      out.I1[v] += vol[t] * cell[t].I1;
      out.I2[v] += vol[t] * cell[t].I2;
      out.I3[v] += vol[t] * cell[t].I3;
      w[v] += vol[t];
    }
  for (std::size_t v = 0; v < n; ++v) {
    out.I1[v] /= w[v];
    out.I2[v] /= w[v];
    out.I3[v] /= w[v];
  }
  return out;
}

}  // namespace fiberkit
