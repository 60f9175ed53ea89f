#include "quadforge/fem.hpp"

#include "quadforge/error.hpp"

namespace quadforge {

std::array<Vec2, 3> p1_basis_gradients(const TriMesh& mesh, int t) {
    const auto& tr = mesh.triangle(t);
    const Vec2& a = mesh.vertex(tr[0]);
    const Vec2& b = mesh.vertex(tr[1]);
    const Vec2& c = mesh.vertex(tr[2]);
    const double twice = orient2d(a, b, c);
    // grad(phi_i) = perp(opposite edge, pointing inward) / (2A)
    return {perp(c - b) / twice, perp(a - c) / twice, perp(b - a) / twice};
}

Vec2 p1_gradient(const TriMesh& mesh, int t, std::span<const double> values) {
    const auto g = p1_basis_gradients(mesh, t);
    const auto& tr = mesh.triangle(t);
    return g[0] * values[tr[0]] + g[1] * values[tr[1]] + g[2] * values[tr[2]];
}

SpMat p1_stiffness(const TriMesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_triangles() * 9);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = p1_basis_gradients(mesh, t);
        const double area = mesh.triangle_area(t);
        const auto& tr = mesh.triangle(t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(tr[i], tr[j], area * dot(g[i], g[j]));
    }
    SpMat k(mesh.num_vertices(), mesh.num_vertices());
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
}

std::vector<double> lumped_mass(const TriMesh& mesh) {
    std::vector<double> m(mesh.num_vertices(), 0.0);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double a = mesh.triangle_area(t) / 3.0;
        for (int v : mesh.triangle(t)) m[v] += a;
    }
    return m;
}

void factorize(SpSolver& solver, const SpMat& a, const char* what) {
    solver.compute(a);
    if (solver.info() != Eigen::Success)
        throw Error(ErrorKind::SolverFailure, std::string("factorization failed: ") + what);
}

Partitioned partition(const SpMat& a, std::span<const int> keep_index, std::span<const int> drop_index) {
    int nk = 0, nd = 0;
    for (int x : keep_index) nk = std::max(nk, x + 1);
    for (int x : drop_index) nd = std::max(nd, x + 1);
    std::vector<Eigen::Triplet<double>> ti, tc;
    for (int col = 0; col < a.outerSize(); ++col) {
        for (SpMat::InnerIterator it(a, col); it; ++it) {
            const int r = keep_index[it.row()];
            if (r < 0) continue;
            if (keep_index[col] >= 0)
                ti.emplace_back(r, keep_index[col], it.value());
            else if (drop_index[col] >= 0)
                tc.emplace_back(r, drop_index[col], it.value());
        }
    }
    Partitioned p{SpMat(nk, nk), SpMat(nk, nd)};
    p.inner.setFromTriplets(ti.begin(), ti.end());
    p.coupling.setFromTriplets(tc.begin(), tc.end());
    return p;
}

}  // namespace quadforge
