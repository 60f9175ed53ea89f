#include "quadforge/domains.hpp"

#include <cmath>
#include <unordered_map>

#include "quadforge/error.hpp"

namespace quadforge {

namespace {

void add_quad(std::vector<Tri>& tris, int a, int b, int c, int d, bool flip) {
    // a-b-c-d counter-clockwise
    if (flip) {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
    } else {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
    }
}

}  // namespace

TriMesh make_square(int n, double side, Vec2 origin) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "square needs n >= 1");
    std::vector<Vec2> pts;
    std::vector<Tri> tris;
    const double h = side / n;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) pts.emplace_back(origin.x + (i == n ? side : i * h), origin.y + (j == n ? side : j * h));
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            // Diagonals radiate from the square centre so the mesh is symmetric.
            const bool flip = (2 * i + 1 < n) != (2 * j + 1 < n);
            add_quad(tris, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1), flip);
        }
    return TriMesh::build(std::move(pts), std::move(tris));
}

TriMesh make_disk(int rings, double radius, Vec2 center) {
    if (rings < 1) throw Error(ErrorKind::InvalidArgument, "disk needs rings >= 1");
    std::vector<Vec2> pts{center};
    std::vector<Tri> tris;
    std::vector<int> prev{0};
    for (int r = 1; r <= rings; ++r) {
        const int m = 6 * r;
        const double rad = radius * r / rings;
        std::vector<int> cur;
        for (int k = 0; k < m; ++k) {
            const double a = kTwoPi * k / m;
            cur.push_back(static_cast<int>(pts.size()));
            pts.push_back(center + from_angle(a) * rad);
        }
        if (r == 1) {
            for (int k = 0; k < m; ++k) tris.push_back({0, cur[k], cur[(k + 1) % m]});
        } else {
            // Zipper between two rings by angle.
            const int pm = static_cast<int>(prev.size());
            int i = 0, j = 0;
            while (i < pm || j < m) {
                const double ai = kTwoPi * (i + 1) / pm;
                const double aj = kTwoPi * (j + 1) / m;
                if (j < m && (i >= pm || aj <= ai)) {
                    tris.push_back({prev[i % pm], cur[j], cur[(j + 1) % m]});
                    ++j;
                } else {
                    tris.push_back({prev[i % pm], cur[j % m], prev[(i + 1) % pm]});
                    ++i;
                }
            }
        }
        prev = std::move(cur);
    }
    return TriMesh::build(std::move(pts), std::move(tris));
}

TriMesh make_annulus(int n_theta, int n_r, double r_in, double r_out, Vec2 center) {
    if (n_theta < 3 || n_r < 1 || !(r_in > 0.0 && r_out > r_in))
        throw Error(ErrorKind::InvalidArgument, "bad annulus parameters");
    std::vector<Vec2> pts;
    std::vector<Tri> tris;
    for (int j = 0; j <= n_r; ++j) {
        const double r = r_in + (r_out - r_in) * j / n_r;
        for (int k = 0; k < n_theta; ++k) pts.push_back(center + from_angle(kTwoPi * k / n_theta) * r);
    }
    auto id = [n_theta](int k, int j) { return j * n_theta + (k % n_theta); };
    for (int j = 0; j < n_r; ++j)
        for (int k = 0; k < n_theta; ++k) add_quad(tris, id(k, j), id(k + 1, j), id(k + 1, j + 1), id(k, j + 1), (k + j) % 2 == 1);
    return TriMesh::build(std::move(pts), std::move(tris));
}

TriMesh make_square_minus_disk(int n, int n_r, double hole_radius) {
    if (n < 2 || n % 2 != 0 || n_r < 1 || !(hole_radius > 0.0 && hole_radius < 0.5))
        throw Error(ErrorKind::InvalidArgument, "bad square-minus-disk parameters");
    const Vec2 c{0.5, 0.5};
    const int m = 4 * n;
    std::vector<Vec2> outer;
    // Perimeter walk of length 4 starting at the midpoint of the right side.
    for (int k = 0; k < m; ++k) {
        double t = 4.0 * k / m + 0.5;  // offset so the walk starts at (1, 0.5)
        t = std::fmod(t, 4.0);
        Vec2 p;
        if (t < 1.0) p = {1.0, t};
        else if (t < 2.0) p = {2.0 - t, 1.0};
        else if (t < 3.0) p = {0.0, 3.0 - t};
        else p = {t - 3.0, 0.0};
        outer.push_back(p);
    }
    std::vector<Vec2> pts;
    std::vector<Tri> tris;
    for (int j = 0; j <= n_r; ++j) {
        const double s = static_cast<double>(j) / n_r;
        for (int k = 0; k < m; ++k) {
            const Vec2 dir = normalized(outer[k] - c);
            const Vec2 inner = c + dir * hole_radius;
            pts.push_back(j == n_r ? outer[k] : inner + (outer[k] - inner) * s);
        }
    }
    auto id = [m](int k, int j) { return j * m + (k % m); };
    for (int j = 0; j < n_r; ++j)
        for (int k = 0; k < m; ++k) add_quad(tris, id(k, j), id(k + 1, j), id(k + 1, j + 1), id(k, j + 1), ((k / (n / 2)) % 2 == 1));
    return TriMesh::build(std::move(pts), std::move(tris));
}

TriMesh refine_uniform(const TriMesh& mesh) {
    std::vector<Vec2> pts = mesh.vertices();
    std::vector<int> mid(mesh.num_edges());
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& ed = mesh.edge(e);
        mid[e] = static_cast<int>(pts.size());
        pts.push_back((mesh.vertex(ed.v[0]) + mesh.vertex(ed.v[1])) * 0.5);
    }
    std::vector<Tri> tris;
    tris.reserve(mesh.num_triangles() * 4);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangle(t);
        const auto& te = mesh.triangle_edges(t);
        const int m01 = mid[te[0]], m12 = mid[te[1]], m20 = mid[te[2]];
        tris.push_back({v[0], m01, m20});
        tris.push_back({v[1], m12, m01});
        tris.push_back({v[2], m20, m12});
        tris.push_back({m01, m12, m20});
    }
    return TriMesh::build(std::move(pts), std::move(tris));
}

}  // namespace quadforge
