#pragma once

#include <span>
#include <string>
#include <vector>

#include "quadforge/geometry.hpp"
#include "quadforge/tri_mesh.hpp"

namespace quadforge {

// Minimal SVG canvas for debug overlays. World coordinates are mapped into a
// square viewport with y pointing up.
class SvgCanvas {
public:
    SvgCanvas(const BBox& world, double size_px = 800.0);

    void line(const Vec2& a, const Vec2& b, const std::string& color, double width = 1.0);
    void polyline(std::span<const Vec2> pts, const std::string& color, double width = 1.0, bool closed = false);
    void polygon(std::span<const Vec2> pts, const std::string& fill, const std::string& stroke = "none",
                 double opacity = 1.0);
    void circle(const Vec2& c, double radius_px, const std::string& fill);
    void text(const Vec2& p, const std::string& s, double size_px = 10.0);

    std::string str() const;
    void save(const std::string& path) const;

private:
    Vec2 map(const Vec2& p) const;
    BBox world_;
    double scale_ = 1.0;
    double size_ = 800.0;
    std::string body_;
};

void draw_wireframe(SvgCanvas& svg, const TriMesh& mesh, const std::string& color = "#bbbbbb");
// Isolines of a per-vertex P1 field at `levels` equally spaced values.
void draw_isolines(SvgCanvas& svg, const TriMesh& mesh, std::span<const double> field, int levels,
                   const std::string& color);
// Colour used for a singular vertex of the given valence.
std::string valence_color(int valence);

}  // namespace quadforge
