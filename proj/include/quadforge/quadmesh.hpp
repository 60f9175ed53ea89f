#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadforge/conformal.hpp"
#include "quadforge/layout.hpp"
#include "quadforge/msh_io.hpp"
#include "quadforge/point_locator.hpp"

namespace quadforge {

// Triangles of the input mesh that overlap one layout patch.
struct Submesh {
    std::vector<int> triangles;      // global triangle ids, ascending
    std::vector<int> vertices;       // global vertex ids, ascending
    std::vector<Tri> local;          // triangles in local vertex ids
    std::vector<Vec2> points;        // physical positions of the local vertices
};

Submesh extract_partition(const QuadLayout& layout, int patch, const TriMesh& mesh);

struct PartitionParam {
    int patch = -1;
    Submesh sub;
    std::vector<double> U, V;          // per local vertex
    std::vector<double> branch;        // lifted cross angle per local triangle
    std::vector<double> log_size;      // H per local triangle (vertex mean)
    double min_jacobian = 0.0;         // min signed area ratio UV / physical
    std::array<Vec2, 4> corner_uv{};   // patch corners in side order
    double max_circulation = 0.0;      // see circulation()

    Vec2 uv(int local_vertex) const { return {U[local_vertex], V[local_vertex]}; }
};

// Least-squares U, V with grad U = e^-H u and grad V = e^-H u rotated a
// quarter turn, u the lifted branch aligned with the patch's first side.
PartitionParam solve_UV(const Submesh& sub, const CrossField& field, const QuadLayout& layout, int patch);

// Circulation of the piecewise-constant field e^-H u around the dual cycle of
// every submesh vertex whose whole triangle fan lies in the submesh.
std::vector<double> circulation(const PartitionParam& param, const TriMesh& mesh);

struct EdgeDivisions {
    std::vector<double> ideal;   // per layout edge: integral of e^-H dl / target
    std::vector<int> count;      // per layout edge, consistent across chords
    std::vector<int> chord;      // class id per layout edge
};

EdgeDivisions discretize_edges(const QuadLayout& layout, const CrossField& field, double target_size);

struct QuadMesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 4>> quads;   // counter-clockwise
    std::vector<int> patch;                  // per quad
    std::vector<int> valence;                // quads per vertex
    std::vector<char> boundary;              // per vertex

    // Interior vertices whose valence is not 4.
    std::vector<int> irregular() const;
    // Every interior edge in exactly two quads, boundary edges in one.
    bool conforming() const;
    double min_signed_area() const;
    // Smallest corner triangle; zero at a flat corner, negative when inverted.
    double min_corner_area() const;
};

// Bilinear TFI in each patch's UV box, mapped back through the submesh.
// Layout nodes and layout-edge nodes are created once and shared by index.
QuadMesh tfi_and_map(const QuadLayout& layout, const std::vector<PartitionParam>& params,
                     const EdgeDivisions& divisions, const CrossField& field);

// Per-corner scaled Jacobian minimum, clamped at zero.
double quad_quality(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

struct QualityReport {
    double mean = 0.0;     // eta bar
    double worst = 0.0;    // eta omega
    double tau = 0.0;      // percentage with eta > 0.9
    int elements = 0;
    std::vector<double> eta;
};

QualityReport quality(const QuadMesh& q);
nlohmann::json to_json(const QualityReport& r);
std::string quality_table(const QualityReport& r, double edge_length);

// Winslow relaxation of regular interior vertices (edge-neighbour mean at
// irregular ones); moves that would fold a quad are skipped.
void smooth_winslow(QuadMesh& q, int iterations = 20);

MshData msh_from_quads(const QuadMesh& q);
QuadMesh quads_from_msh(const MshData& data);
void draw_quads(SvgCanvas& svg, const QuadMesh& q);

}  // namespace quadforge
