#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "quadforge/tri_mesh.hpp"

namespace quadforge {

using SpMat = Eigen::SparseMatrix<double>;
using SpSolver = Eigen::SimplicialLDLT<SpMat>;

// Gradients of the three P1 hat functions on triangle t.
std::array<Vec2, 3> p1_basis_gradients(const TriMesh& mesh, int t);
Vec2 p1_gradient(const TriMesh& mesh, int t, std::span<const double> values);

// Cotangent stiffness K_ij = integral of grad(phi_i).grad(phi_j).
SpMat p1_stiffness(const TriMesh& mesh);
// Row-sum lumped mass (one third of each incident triangle area).
std::vector<double> lumped_mass(const TriMesh& mesh);

// Factorizes A, throwing SolverFailure when the decomposition fails.
void factorize(SpSolver& solver, const SpMat& a, const char* what);

// Keeps rows/cols in `keep` (old id -> new id, -1 dropped) and moves the coupling
// to dropped columns into a separate matrix.
struct Partitioned {
    SpMat inner;    // kept x kept
    SpMat coupling; // kept x dropped
};
Partitioned partition(const SpMat& a, std::span<const int> keep_index, std::span<const int> drop_index);

}  // namespace quadforge
