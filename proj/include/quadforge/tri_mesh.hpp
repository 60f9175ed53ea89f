#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "quadforge/geometry.hpp"
#include "quadforge/point_locator.hpp"

namespace quadforge {

using Tri = std::array<int, 3>;

struct Edge {
    std::array<int, 2> v{-1, -1};   // v[0] < v[1]
    std::array<int, 2> tri{-1, -1}; // tri[1] == -1 on the boundary
    bool is_boundary() const { return tri[1] < 0; }
};

struct BoundaryLoop {
    std::vector<int> vertices;     // in traversal order, domain on the left
    bool outer = false;            // outer loop is CCW, holes are CW
    double signed_area = 0.0;
};

struct BuildReport {
    int reoriented = 0;
    int dropped_vertices = 0;
};

// Planar triangulation. Immutable once built; every invariant is checked by
// TriMesh::build and violations throw quadforge::Error.
class TriMesh {
public:
    TriMesh() = default;

    static TriMesh build(std::vector<Vec2> vertices, std::vector<Tri> triangles,
                         BuildReport* report = nullptr);

    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_triangles() const { return static_cast<int>(triangles_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<Tri>& triangles() const { return triangles_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Vec2& vertex(int v) const { return vertices_[v]; }
    const Tri& triangle(int t) const { return triangles_[t]; }
    const Edge& edge(int e) const { return edges_[e]; }

    // Local edge i of triangle t joins triangle(t)[i] and triangle(t)[(i+1)%3].
    const std::array<int, 3>& triangle_edges(int t) const { return tri_edges_[t]; }
    // Triangle across local edge i of t, or -1.
    int neighbor(int t, int i) const;
    // Global edge id joining a and b, or -1.
    int find_edge(int a, int b) const;

    std::span<const int> vertex_triangles(int v) const;
    std::span<const int> vertex_neighbors(int v) const;
    bool is_boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }
    // Loop index for boundary vertices, -1 for interior ones.
    int boundary_loop_of(int v) const { return vertex_loop_[v]; }

    const std::vector<BoundaryLoop>& boundary_loops() const { return loops_; }
    int num_inner_loops() const { return static_cast<int>(loops_.size()) - 1; }
    // Euler characteristic from the boundary-loop count (1 - #holes).
    int euler_characteristic() const { return 1 - num_inner_loops(); }
    // V - E + F computed from the combinatorics.
    int combinatorial_euler() const { return num_vertices() - num_edges() + num_triangles(); }

    double triangle_area(int t) const;
    Vec2 triangle_centroid(int t) const;
    // Interior angle of triangle t at its local corner i.
    double corner_angle(int t, int i) const;

    const BBox& bbox() const { return bbox_; }
    double bbox_diagonal() const { return bbox_.diagonal(); }
    double min_edge_length() const { return min_edge_; }
    double mean_edge_length() const { return mean_edge_; }
    double edge_length(int e) const;
    // Mean length of the edges incident to v.
    double local_edge_length(int v) const;

    // Walk-based point location; see PointLocator.
    PointLocation locate(const Vec2& p) const;
    const PointLocator& locator() const;

private:
    std::vector<Vec2> vertices_;
    std::vector<Tri> triangles_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> tri_edges_;
    std::unordered_map<std::uint64_t, int> edge_lookup_;
    std::vector<int> vt_offsets_, vt_data_;
    std::vector<int> vv_offsets_, vv_data_;
    std::vector<std::uint8_t> boundary_vertex_;
    std::vector<int> vertex_loop_;
    std::vector<BoundaryLoop> loops_;
    BBox bbox_;
    double min_edge_ = 0.0;
    double mean_edge_ = 0.0;
    std::shared_ptr<const PointLocator> locator_;
};

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

// Per-boundary-vertex turning angle pi - (sum of incident interior angles).
// Indexed by vertex id; zero for interior vertices.
std::vector<double> turning_angles(const TriMesh& mesh);

// Quarter-turn count of a turning angle: round(turning / (pi/2)).
int corner_quarters(double turning);

}  // namespace quadforge
