#pragma once

#include <array>
#include <optional>
#include <vector>

#include "quadforge/geometry.hpp"

namespace quadforge {

struct PointLocation {
    int triangle = -1;
    std::array<double, 3> bary{0.0, 0.0, 0.0};
    bool snapped = false;  // p was outside and was moved onto the nearest boundary point
};

// Point location in an arbitrary planar triangulation given as raw arrays:
// a triangle walk seeded from a uniform grid bucket, with the bucket's
// triangle list as fallback. Points within eps of the triangulation are
// snapped to its nearest boundary point; eps = 1e-9 * bbox diagonal.
class PointLocator {
public:
    PointLocator(std::vector<Vec2> points, std::vector<std::array<int, 3>> triangles);

    std::optional<PointLocation> try_locate(const Vec2& p) const;
    // Throws Error(OutsideMesh) when p is farther than eps from every triangle.
    PointLocation locate(const Vec2& p) const;

    double epsilon() const { return eps_; }
    const BBox& bbox() const { return bbox_; }
    const std::vector<Vec2>& points() const { return points_; }
    const std::vector<std::array<int, 3>>& triangles() const { return tris_; }

    // Barycentric coordinates of p with respect to triangle t (sum to 1).
    std::array<double, 3> barycentric(int t, const Vec2& p) const;
    Vec2 interpolate(const PointLocation& loc, const std::array<Vec2, 3>& values) const;

private:
    int cell_of(const Vec2& p) const;
    std::optional<PointLocation> walk(int start, const Vec2& p) const;
    std::optional<PointLocation> snap(const Vec2& p) const;

    std::vector<Vec2> points_;
    std::vector<std::array<int, 3>> tris_;
    std::vector<std::array<int, 3>> adjacency_;  // across local edge i = (v[i], v[i+1])
    BBox bbox_;
    double eps_ = 0.0;
    int nx_ = 1, ny_ = 1;
    double cell_w_ = 1.0, cell_h_ = 1.0;
    std::vector<int> cell_offsets_;
    std::vector<int> cell_tris_;
};

}  // namespace quadforge
