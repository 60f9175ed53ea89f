#include "quadforge/detect.hpp"

#include <cmath>
#include <map>

#include "quadforge/error.hpp"

namespace quadforge {

std::vector<int> triangle_windings(const TriMesh& mesh, std::span<const double> rep_angle) {
    std::vector<int> w(mesh.num_triangles(), 0);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tr = mesh.triangle(t);
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += principal_angle(rep_angle[tr[(i + 1) % 3]] - rep_angle[tr[i]]);
        const double turns = s / kTwoPi;
        const double r = std::round(turns);
        if (std::abs(turns - r) > 1e-3)
            throw Error(ErrorKind::UnderResolved,
                        "winding " + std::to_string(turns) + " in triangle " + std::to_string(t) +
                            " is not a whole turn");
        w[t] = static_cast<int>(r);
    }
    return w;
}

namespace {

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 ab = b - a, ac = c - a;
    const double d = 2.0 * cross(ab, ac);
    const double l1 = norm2(ab), l2 = norm2(ac);
    return a + Vec2{ac.y * l1 - ab.y * l2, ab.x * l2 - ac.x * l1} / d;
}

}  // namespace

SingularityPattern pattern_from_windings(const TriMesh& mesh, std::span<const int> windings) {
    // Strong singularities alias their winding across neighbouring triangles, so
    // nearby singular triangles are clustered and their windings summed.
    const int nt = mesh.num_triangles();
    std::vector<int> parent(nt);
    for (int t = 0; t < nt; ++t) parent[t] = t;
    auto root = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    // Triangles touching a vertex or one of its neighbours belong together.
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        int first = -1;
        auto visit = [&](int u) {
            for (int t : mesh.vertex_triangles(u)) {
                if (windings[t] == 0) continue;
                if (first < 0) first = t;
                else parent[root(t)] = root(first);
            }
        };
        visit(v);
        for (int u : mesh.vertex_neighbors(v)) visit(u);
    }
    std::map<int, std::vector<int>> clusters;
    for (int t = 0; t < nt; ++t)
        if (windings[t] != 0) clusters[root(t)].push_back(t);

    const auto tags = corner_tags(mesh);
    std::map<int, int> acc;
    for (const auto& [r, tris] : clusters) {
        int total = 0, weight = 0;
        Vec2 center{};
        for (int t : tris) {
            const auto& tr = mesh.triangle(t);
            const int w = std::abs(windings[t]);
            total += windings[t];
            weight += w;
            center += circumcenter(mesh.vertex(tr[0]), mesh.vertex(tr[1]), mesh.vertex(tr[2])) * w;
        }
        if (total == 0) continue;
        center = center / weight;
        int best = -1;
        double best_d = 0.0;
        for (int pass = 0; pass < 2 && best < 0; ++pass) {
            for (int t : tris) {
                for (int v : mesh.triangle(t)) {
                    if (pass == 0 && mesh.is_boundary_vertex(v)) continue;
                    const double d = distance(center, mesh.vertex(v));
                    if (best < 0 || d < best_d || (d == best_d && v < best)) best = v, best_d = d;
                }
            }
        }
        acc[best] += total;
    }
    SingularityPattern p;
    p.chi = mesh.euler_characteristic();
    for (const auto& [v, t] : acc) {
        Singularity s;
        s.vertex = v;
        s.position = mesh.vertex(v);
        s.boundary = mesh.is_boundary_vertex(v);
        // A boundary vertex inherits its corner tag so the balance is unchanged.
        s.t = s.boundary ? t + tags[v] : t;
        s.valence = valence_from_t(s.t, s.boundary);
        if (!s.boundary && s.t == 0) continue;
        if (s.boundary && s.t == tags[v]) continue;
        p.singularities.push_back(s);
    }
    return p;
}

SingularityPattern detect(const TriMesh& mesh, const RepresentationField& field) {
    std::vector<double> a(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) a[v] = field.angle(v);
    return pattern_from_windings(mesh, triangle_windings(mesh, a));
}

}  // namespace quadforge
