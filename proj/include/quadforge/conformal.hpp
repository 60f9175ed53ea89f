#pragma once

#include <array>
#include <optional>
#include <vector>

#include "quadforge/pattern.hpp"
#include "quadforge/tri_mesh.hpp"

namespace quadforge {

struct BranchCut {
    std::vector<int> edges;     // sorted edge ids
    std::vector<char> is_cut;   // per edge
    std::vector<int> anchors;   // singular vertices and one vertex per inner loop

    bool is_forest(const TriMesh& mesh) const;
    // V - E + F of the mesh cut open along the branch cut.
    int cut_open_euler(const TriMesh& mesh) const;
};

// Shortest-path forest from the outer boundary, pruned to the paths that reach
// the anchors.
BranchCut build_branch_cut(const TriMesh& mesh, const SingularityPattern& pattern);

struct HField {
    std::vector<double> values;  // per vertex, mass-weighted mean zero
    std::vector<double> rhs;     // assembled load vector
    double source_mass = 0.0;    // pi/2 times the pattern + corner balance
    double neumann_mass = 0.0;   // total turning
    double rhs_sum = 0.0;        // neumann_mass - source_mass, zero when compatible
    double residual = 0.0;       // relative residual of the linear solve
};

// Load vector: turning minus the quarter turns absorbed at the vertex.
std::vector<double> h_rhs(const TriMesh& mesh, const SingularityPattern& pattern);
HField solve_H(const TriMesh& mesh, const SingularityPattern& pattern);

struct ThetaField {
    std::vector<std::array<int, 3>> dof;  // per triangle and local edge
    std::vector<double> values;           // per dof
    std::vector<int> jump_quarters;       // per cut edge, parallel to BranchCut::edges
    double max_jump_error = 0.0;
    int anchor_edge = -1;
    double anchor_value = 0.0;
    double residual = 0.0;                // relative conjugacy residual over all triangles

    double at(int t, int local_edge) const { return values[dof[t][local_edge]]; }
};

// Longest outer-boundary edge (lowest id on ties).
int default_anchor_edge(const TriMesh& mesh);
ThetaField solve_theta(const TriMesh& mesh, const HField& h, const BranchCut& cut, int anchor_edge = -1);

struct CrossSample {
    int triangle = -1;
    double H = 0.0;
    double theta = 0.0;
};

// Cross-field reconstructed from (H, theta). Holds a reference to the mesh,
// which must outlive it.
class CrossField {
public:
    CrossField(const TriMesh& mesh, HField h, BranchCut cut, ThetaField theta);

    const TriMesh& mesh() const { return *mesh_; }
    const HField& h() const { return h_; }
    const BranchCut& cut() const { return cut_; }
    const ThetaField& theta() const { return theta_; }

    CrossSample sample(int triangle, const std::array<double, 3>& bary) const;
    CrossSample sample(const Vec2& p) const;
    // Four branches of common norm e^H, counter-clockwise from theta.
    static std::array<Vec2, 4> branches(const CrossSample& s);
    std::array<Vec2, 4> cross(const Vec2& p) const { return branches(sample(p)); }

    Vec2 grad_H(int t) const;
    Vec2 grad_theta(int t) const;
    // Theta at the centroid of t.
    double theta_centroid(int t) const;

    // sum A |grad theta - perp grad H|^2 / sum A |grad H|^2 over triangles
    // accepted by `keep` (all when empty).
    double conjugacy_residual(const std::vector<char>& keep = {}) const;

private:
    const TriMesh* mesh_;
    HField h_;
    BranchCut cut_;
    ThetaField theta_;
};

// Pattern read back from the reconstructed field: winding of 4 theta along the
// dual cycle around every vertex (interior), and the mismatch between boundary
// turning and theta rotation (boundary).
SingularityPattern redetect(const CrossField& field);

struct TangencyViolation {
    int edge = -1;
    Vec2 where;
    double deviation = 0.0;  // radians
    int loop = -1;
};

struct TangencyReport {
    bool meshable = true;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    std::vector<TangencyViolation> violations;
};

TangencyReport check_tangency(const CrossField& field, double tol_rad);

// Degrees to radians.
constexpr double deg(double d) { return d * kPi / 180.0; }

}  // namespace quadforge
