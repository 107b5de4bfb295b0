#include "fiberkit/laplace.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <limits>

namespace fiberkit {

SparseMatrix assemble_stiffness(const TetMesh& m) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(16 * m.tets.size());
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    TetGeometry g = tet_geometry(m, t);
    Eigen::Matrix4d ke = g.volume * g.grad * g.grad.transpose();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) trip.emplace_back(m.tets[t][i], m.tets[t][j], ke(i, j));
  }
  SparseMatrix K(m.num_nodes(), m.num_nodes());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

SparseMatrix assemble_consistent_mass(const TetMesh& m) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(16 * m.tets.size());
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    double v = m.tet_volume(t);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) trip.emplace_back(m.tets[t][i], m.tets[t][j], v * (i == j ? 0.1 : 0.05));
  }
  SparseMatrix M(m.num_nodes(), m.num_nodes());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

Eigen::VectorXd solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b, const SolverOptions& opts,
                          SolveStats* stats, const Eigen::VectorXd* guess) {
  if (A.rows() == 0) return Eigen::VectorXd();
  if (b.norm() == 0.0) {
    if (stats) *stats = {0, 0.0};
    return Eigen::VectorXd::Zero(b.size());
  }
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(opts.rel_tol);
  cg.setMaxIterations(static_cast<Eigen::Index>(std::ceil(opts.max_iter_factor * static_cast<double>(A.rows()))));
  cg.compute(A);
  Eigen::VectorXd x;
  if (guess)
    x = cg.solveWithGuess(b, *guess);
  else
    x = cg.solve(b);
  if (stats) *stats = {static_cast<long>(cg.iterations()), cg.error()};
  if (cg.info() != Eigen::Success || !x.allFinite())
    throw SolverError("conjugate gradient did not converge after " + std::to_string(cg.iterations()) + " iterations",
                      cg.error());
  return x;
}

ScalarField solve_constrained(const TetMesh& m, const SparseMatrix& K, const ScalarField& fixed,
                              const SolverOptions& opts, SolveStats* stats) {
  const std::size_t n = m.num_nodes();
  std::vector<int> map(n, -1);
  int nfree = 0;
  bool any_fixed = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(fixed[i]))
      map[i] = nfree++;
    else
      any_fixed = true;
  }
  if (!any_fixed) throw ValidationError("ill-posed problem: no Dirichlet nodes");

  // Every free node must reach a constrained node, otherwise the reduced matrix is singular.
  {
    NodeAdjacency adj = node_neighbors(m);
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isnan(fixed[i])) {
        seen[i] = 1;
        stack.push_back(static_cast<int>(i));
      }
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      auto [b, e] = adj.range(u);
      for (auto it = b; it != e; ++it)
        if (!seen[*it]) {
          seen[*it] = 1;
          stack.push_back(*it);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!seen[i]) throw ValidationError("ill-posed problem: a mesh component has no Dirichlet nodes");
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(K.nonZeros());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
  for (int r = 0; r < K.outerSize(); ++r) {
    if (map[r] < 0) continue;
    for (SparseMatrix::InnerIterator it(K, r); it; ++it) {
      int c = static_cast<int>(it.col());
      if (map[c] >= 0)
        trip.emplace_back(map[r], map[c], it.value());
      else
        rhs[map[r]] -= it.value() * fixed[c];
    }
  }
  SparseMatrix A(nfree, nfree);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd x = solve_spd(A, rhs, opts, stats);
  ScalarField u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = map[i] >= 0 ? x[map[i]] : fixed[i];
  return u;
}

ScalarField solve_laplace(const TetMesh& m, const DirichletSpec& bcs, const SolverOptions& opts, SolveStats* stats) {
  if (bcs.empty()) throw ValidationError("ill-posed problem: no Dirichlet surfaces given");
  bool apex_listed = false;
  for (std::size_t i = 0; i < bcs.size(); ++i) {
    if (!std::isfinite(bcs[i].second)) throw ValidationError("Dirichlet value must be finite");
    for (std::size_t j = 0; j < i; ++j)
      if (bcs[i].first == bcs[j].first)
        throw ValidationError(std::string("surface '") + to_string(bcs[i].first) + "' listed twice");
    apex_listed = apex_listed || bcs[i].first == SurfaceLabel::Apex;
  }
  ScalarField fixed(m.num_nodes(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& [label, value] : bcs)
    for (const auto& f : m.facets) {
      bool hit = f.label == label || (label == SurfaceLabel::Epi && f.label == SurfaceLabel::Apex && !apex_listed);
      if (hit)
        for (int v : f.nodes) fixed[v] = value;
    }
  return solve_constrained(m, assemble_stiffness(m), fixed, opts, stats);
}

Vec3 tet_gradient(const TetMesh& m, std::size_t t, const ScalarField& u) {
  TetGeometry g = tet_geometry(m, t);
  Eigen::Vector4d ue(u[m.tets[t][0]], u[m.tets[t][1]], u[m.tets[t][2]], u[m.tets[t][3]]);
  return g.grad.transpose() * ue;
}

VectorField recover_gradient(const TetMesh& m, const ScalarField& u) {
  if (u.size() != m.num_nodes()) throw ValidationError("field length does not match node count");
  VectorField acc(m.num_nodes(), Vec3::Zero());
  std::vector<double> w(m.num_nodes(), 0.0);
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    TetGeometry g = tet_geometry(m, t);
    Eigen::Vector4d ue(u[m.tets[t][0]], u[m.tets[t][1]], u[m.tets[t][2]], u[m.tets[t][3]]);
    Vec3 grad = g.grad.transpose() * ue;
    for (int v : m.tets[t]) {
      acc[v] += g.volume * grad;
      w[v] += g.volume;
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i)
    if (w[i] > 0) acc[i] /= w[i];
  return acc;
}

}  // namespace fiberkit
