#include "quadforge/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "quadforge/error.hpp"

namespace quadforge {

namespace {
std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}
}  // namespace

SvgCanvas::SvgCanvas(const BBox& world, double size_px) : world_(world), size_(size_px) {
    const double w = std::max(world.hi.x - world.lo.x, world.hi.y - world.lo.y);
    scale_ = w > 0 ? (size_px - 20.0) / w : 1.0;
}

Vec2 SvgCanvas::map(const Vec2& p) const {
    return {10.0 + (p.x - world_.lo.x) * scale_, size_ - 10.0 - (p.y - world_.lo.y) * scale_};
}

void SvgCanvas::line(const Vec2& a, const Vec2& b, const std::string& color, double width) {
    const Vec2 p = map(a), q = map(b);
    body_ += "<line x1=\"" + num(p.x) + "\" y1=\"" + num(p.y) + "\" x2=\"" + num(q.x) + "\" y2=\"" + num(q.y) +
             "\" stroke=\"" + color + "\" stroke-width=\"" + num(width) + "\"/>\n";
}

void SvgCanvas::polyline(std::span<const Vec2> pts, const std::string& color, double width, bool closed) {
    if (pts.empty()) return;
    body_ += closed ? "<polygon fill=\"none\" points=\"" : "<polyline fill=\"none\" points=\"";
    for (const auto& p : pts) {
        const Vec2 q = map(p);
        body_ += num(q.x) + "," + num(q.y) + " ";
    }
    body_ += "\" stroke=\"" + color + "\" stroke-width=\"" + num(width) + "\"/>\n";
}

void SvgCanvas::polygon(std::span<const Vec2> pts, const std::string& fill, const std::string& stroke, double opacity) {
    body_ += "<polygon points=\"";
    for (const auto& p : pts) {
        const Vec2 q = map(p);
        body_ += num(q.x) + "," + num(q.y) + " ";
    }
    body_ += "\" fill=\"" + fill + "\" fill-opacity=\"" + num(opacity) + "\" stroke=\"" + stroke + "\"/>\n";
}

void SvgCanvas::circle(const Vec2& c, double radius_px, const std::string& fill) {
    const Vec2 p = map(c);
    body_ += "<circle cx=\"" + num(p.x) + "\" cy=\"" + num(p.y) + "\" r=\"" + num(radius_px) + "\" fill=\"" + fill + "\"/>\n";
}

void SvgCanvas::text(const Vec2& p, const std::string& s, double size_px) {
    const Vec2 q = map(p);
    body_ += "<text x=\"" + num(q.x) + "\" y=\"" + num(q.y) + "\" font-size=\"" + num(size_px) + "\">" + s + "</text>\n";
}

std::string SvgCanvas::str() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(size_) + "\" height=\"" + num(size_) +
           "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
}

void SvgCanvas::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
    f << str();
}

void draw_wireframe(SvgCanvas& svg, const TriMesh& mesh, const std::string& color) {
    for (const auto& e : mesh.edges())
        svg.line(mesh.vertex(e.v[0]), mesh.vertex(e.v[1]), e.is_boundary() ? "#000000" : color,
                 e.is_boundary() ? 1.5 : 0.4);
}

void draw_isolines(SvgCanvas& svg, const TriMesh& mesh, std::span<const double> field, int levels,
                   const std::string& color) {
    if (levels < 1 || field.empty()) return;
    const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return;
    for (int l = 1; l <= levels; ++l) {
        const double c = lo + (hi - lo) * l / (levels + 1);
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const auto& tr = mesh.triangle(t);
            Vec2 hits[3];
            int n = 0;
            for (int i = 0; i < 3 && n < 3; ++i) {
                const double a = field[tr[i]] - c;
                const double b = field[tr[(i + 1) % 3]] - c;
                if ((a < 0) != (b < 0)) {
                    const double s = a / (a - b);
                    hits[n++] = mesh.vertex(tr[i]) + (mesh.vertex(tr[(i + 1) % 3]) - mesh.vertex(tr[i])) * s;
                }
            }
            if (n == 2) svg.line(hits[0], hits[1], color, 0.8);
        }
    }
}

std::string valence_color(int valence) {
    switch (valence) {
        case 3: return "#1f4fff";
        case 5: return "#e02020";
        case 6: return "#ff8c00";
        case 8: return "#f0d000";
        default: return "#808080";
    }
}

}  // namespace quadforge
