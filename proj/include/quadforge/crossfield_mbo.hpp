#pragma once

#include <string>
#include <vector>

#include "quadforge/fem.hpp"
#include "quadforge/tri_mesh.hpp"

namespace quadforge {

// Per-vertex representation vector (cos 4a, sin 4a) of a cross with angle a.
struct RepresentationField {
    std::vector<Vec2> v;
    // Representation angle 4a in (-pi, pi].
    double angle(int vertex) const { return angle_of(v[vertex]); }
};

struct DiffusionSchedule {
    std::vector<double> alpha;      // strictly decreasing diffusivities (length^2)
    std::vector<double> tolerance;  // per-level stopping threshold on max |dv|
    int max_iterations = 200;
};

struct MboResult {
    RepresentationField field;
    bool converged = true;
    std::vector<int> iterations;  // per level
    // Diffuser::energy after each projection, per level.
    std::vector<std::vector<double>> energy;
};

// Representation of the boundary tangent, indexed by vertex id (zero for
// interior vertices). The two incident boundary edges are averaged in
// representation space.
std::vector<Vec2> boundary_alignment(const TriMesh& mesh);

DiffusionSchedule make_schedule(const TriMesh& mesh, int n_levels, std::vector<std::string>* warnings = nullptr,
                                double level_tol = 1e-3, double final_tol = 1e-5);

// Unit projection; vectors shorter than 1e-14 are left unchanged.
Vec2 project_unit(const Vec2& v);

// One implicit diffusion step (M + alpha K) v = M v_prev with the boundary held
// fixed. Reuses a single factorization.
class Diffuser {
public:
    Diffuser(const TriMesh& mesh, double alpha);
    void step(std::vector<Vec2>& v) const;
    // Heat-content energy (|v|^2 - v.A v)/alpha with A the step operator. The
    // diffuse-then-project iteration never increases it, and it tends to the
    // Dirichlet energy as alpha goes to 0.
    double energy(const std::vector<Vec2>& v) const;

private:
    const TriMesh& mesh_;
    std::vector<int> interior_;  // vertex -> interior index or -1
    std::vector<int> boundary_;  // vertex -> boundary index or -1
    std::vector<double> mass_;
    Partitioned parts_;
    SpMat boundary_block_;
    double alpha_;
    SpSolver solver_;
};

double dirichlet_energy(const TriMesh& mesh, const std::vector<Vec2>& v);

MboResult mbo_solve(const TriMesh& mesh, const DiffusionSchedule& schedule);

}  // namespace quadforge
