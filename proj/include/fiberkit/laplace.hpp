#pragma once

#include "fiberkit/mesh.hpp"

#include <Eigen/SparseCore>

#include <utility>
#include <vector>

namespace fiberkit {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SolverOptions {
  double rel_tol = 1e-12;
  double max_iter_factor = 10.0;  // iterations capped at factor * unknowns
};

struct SolveStats {
  long iterations = 0;
  double relative_residual = 0.0;
};

// A Dirichlet entry on Epi also constrains Apex facets unless Apex has its own entry.
// Later entries win at nodes shared by two constrained surfaces.
using DirichletSpec = std::vector<std::pair<SurfaceLabel, double>>;

SparseMatrix assemble_stiffness(const TetMesh& m);
SparseMatrix assemble_consistent_mass(const TetMesh& m);

// Symmetric positive-definite solve with Jacobi-preconditioned CG; throws SolverError.
Eigen::VectorXd solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b, const SolverOptions& opts,
                          SolveStats* stats = nullptr, const Eigen::VectorXd* guess = nullptr);

// Solves K u = 0 with u fixed on the constrained nodes (NaN in `fixed` marks a free node).
ScalarField solve_constrained(const TetMesh& m, const SparseMatrix& K, const ScalarField& fixed,
                              const SolverOptions& opts = {}, SolveStats* stats = nullptr);

ScalarField solve_laplace(const TetMesh& m, const DirichletSpec& bcs, const SolverOptions& opts = {},
                          SolveStats* stats = nullptr);

// Per-tet P1 gradients averaged to nodes with volume weights.
VectorField recover_gradient(const TetMesh& m, const ScalarField& u);
Vec3 tet_gradient(const TetMesh& m, std::size_t t, const ScalarField& u);

}  // namespace fiberkit
