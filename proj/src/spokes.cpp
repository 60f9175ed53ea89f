#include "quadforge/spokes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "quadforge/error.hpp"

namespace quadforge {

namespace {

struct Region {
    std::vector<char> tri_in;       // per triangle
    std::vector<char> remove;       // per vertex
    std::vector<int> loop;          // region boundary, CCW; starts after s for boundary s
    double clearance = 0.0;         // distance from s to boundary edges not touching s
};

// k-ring region around s, or nullopt if it is not a simple star-shaped
// polygon free of other singular vertices and locked triangles.
std::optional<Region> make_region(const TriMesh& m, int s, int k, const std::vector<char>& singular,
                                  const std::vector<char>& locked) {
    const int nv = m.num_vertices();
    std::vector<int> dist(nv, -1);
    std::vector<int> frontier{s};
    dist[s] = 0;
    for (int d = 1; d < k; ++d) {
        std::vector<int> next;
        for (int v : frontier)
            for (int u : m.vertex_neighbors(v))
                if (dist[u] < 0) dist[u] = d, next.push_back(u);
        frontier = std::move(next);
    }
    Region r;
    r.tri_in.assign(m.num_triangles(), 0);
    for (int v = 0; v < nv; ++v) {
        if (dist[v] < 0) continue;
        if (singular[v] && v != s) return std::nullopt;
        for (int t : m.vertex_triangles(v)) {
            if (locked[t]) return std::nullopt;
            r.tri_in[t] = 1;
        }
    }
    // Directed boundary edges of the region (region on the left).
    std::map<int, int> next;
    std::vector<char> on_loop(nv, 0);
    for (int t = 0; t < m.num_triangles(); ++t) {
        if (!r.tri_in[t]) continue;
        for (int i = 0; i < 3; ++i) {
            const int nb = m.neighbor(t, i);
            if (nb >= 0 && r.tri_in[nb]) continue;
            const int a = m.triangle(t)[i], b = m.triangle(t)[(i + 1) % 3];
            if (next.count(a)) return std::nullopt;  // pinched
            next[a] = b;
            on_loop[a] = on_loop[b] = 1;
        }
    }
    const bool bnd = m.is_boundary_vertex(s);
    if (bnd != static_cast<bool>(on_loop[s])) return std::nullopt;
    int start = bnd ? next[s] : next.begin()->first;
    int cur = start;
    do {
        r.loop.push_back(cur);
        auto it = next.find(cur);
        if (it == next.end()) return std::nullopt;
        cur = it->second;
        if (r.loop.size() > next.size()) return std::nullopt;
    } while (cur != start);
    if (r.loop.size() != next.size()) return std::nullopt;  // more than one loop
    if (bnd) {
        // Rotate so the loop reads b1 ... b_-1 and drop s itself.
        auto it = std::find(r.loop.begin(), r.loop.end(), s);
        std::rotate(r.loop.begin(), it + 1, r.loop.end());
        r.loop.pop_back();
    }
    for (int v : r.loop)
        if (singular[v] && v != s) return std::nullopt;
    // Star-shaped with respect to s, with some margin.
    const Vec2 c = m.vertex(s);
    r.clearance = 1e300;
    const size_t nl = r.loop.size();
    const size_t edges = bnd ? nl - 1 : nl;
    for (size_t i = 0; i < edges; ++i) {
        const Vec2& a = m.vertex(r.loop[i]);
        const Vec2& b = m.vertex(r.loop[(i + 1) % nl]);
        if (orient2d(c, a, b) <= 1e-12 * norm2(b - a)) return std::nullopt;
        r.clearance = std::min(r.clearance, distance(c, closest_point_on_segment(c, a, b)));
    }
    r.remove.assign(nv, 0);
    for (int v = 0; v < nv; ++v)
        if (dist[v] >= 0 && v != s && !on_loop[v]) r.remove[v] = 1;
    return r;
}

// Angle of v around c measured CCW from `base`, in [0, 2pi).
double angle_from(const Vec2& c, const Vec2& v, double base) {
    double a = angle_of(v - c) - base;
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

struct Patch {
    std::vector<Vec2> points;   // new vertices
    std::vector<Tri> tris;      // ids: >= 0 existing vertex, < 0 new point -(i+1)
};

// Builds the ring/spoke triangulation inside `r` for radius `radius`.
std::optional<Patch> build_patch(const TriMesh& m, int s, const Region& r, double radius, int rings, int spokes) {
    const Vec2 c = m.vertex(s);
    const bool bnd = m.is_boundary_vertex(s);
    const auto& loop = r.loop;
    const int nl = static_cast<int>(loop.size());
    const double base = angle_of(m.vertex(loop[0]) - c);

    // Unwrapped loop angles.
    std::vector<double> la(nl);
    la[0] = 0.0;
    for (int i = 1; i < nl; ++i) {
        double d = angle_from(c, m.vertex(loop[i]), base) - std::fmod(la[i - 1], kTwoPi);
        if (d <= 0) d += kTwoPi;
        la[i] = la[i - 1] + d;
    }
    const double span = bnd ? la[nl - 1] : kTwoPi;
    if (!bnd && !(la[nl - 1] < kTwoPi)) return std::nullopt;

    int nseg = spokes;
    if (bnd) nseg = std::max(2, static_cast<int>(std::lround(spokes * span / kTwoPi)));
    const int per_ring = bnd ? nseg + 1 : nseg;

    Patch p;
    auto ring_point = [&](int ring, int j) { return -(1 + ring * per_ring + j); };
    for (int ring = 0; ring < rings; ++ring) {
        const double rr = radius * (ring + 1) / rings;
        for (int j = 0; j < per_ring; ++j) {
            Vec2 q;
            if (bnd && j == 0) {
                const Vec2 d = m.vertex(loop[0]) - c;
                q = c + d * (rr / norm(d));
            } else if (bnd && j == nseg) {
                const Vec2 d = m.vertex(loop[nl - 1]) - c;
                q = c + d * (rr / norm(d));
            } else {
                q = c + from_angle(base + span * j / nseg) * rr;
            }
            p.points.push_back(q);
        }
    }
    auto at = [&](int ring, int j) { return ring_point(ring, bnd ? j : j % nseg); };
    for (int j = 0; j < nseg; ++j) p.tris.push_back({s, at(0, j), at(0, j + 1)});
    for (int ring = 0; ring + 1 < rings; ++ring)
        for (int j = 0; j < nseg; ++j) {
            p.tris.push_back({at(ring, j), at(ring + 1, j), at(ring + 1, j + 1)});
            p.tris.push_back({at(ring, j), at(ring + 1, j + 1), at(ring, j + 1)});
        }
    // Zipper between the outer ring and the region boundary, merging by angle.
    const int outer = rings - 1;
    const int na = nseg, nb = bnd ? nl - 1 : nl;
    int i = 0, j = 0;
    while (i < na || j < nb) {
        const double a_next = span * (i + 1) / nseg;
        const double b_cur = la[std::min(j, nl - 1)];
        const double b_next = j + 1 < nl ? la[j + 1] : kTwoPi;
        const int bj = loop[j % nl], bj1 = loop[(j + 1) % nl];
        // Each ring point joins the loop vertex it is angularly closest to.
        if (i < na && (j >= nb || a_next <= 0.5 * (b_cur + b_next))) {
            p.tris.push_back({at(outer, i), bj, at(outer, i + 1)});
            ++i;
        } else {
            p.tris.push_back({at(outer, i), bj, bj1});
            ++j;
        }
    }
    // Orientation check with margin.
    auto pos = [&](int id) { return id >= 0 ? m.vertex(id) : p.points[-id - 1]; };
    const double tiny = 1e-12 * radius * radius;
    for (const auto& t : p.tris)
        if (orient2d(pos(t[0]), pos(t[1]), pos(t[2])) <= tiny) return std::nullopt;
    return p;
}

}  // namespace

SpokeResult refine_spokes(const TriMesh& mesh, const SingularityPattern& pattern, const SpokeParams& params) {
    if (params.rings < 1 || params.sectors_per_quadrant < 1 || !(params.radius_factor > 0))
        throw Error(ErrorKind::InvalidArgument, "invalid spoke parameters");
    SpokeResult res;
    res.pattern = pattern;
    res.vertex_map.resize(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) res.vertex_map[v] = v;
    res.mesh = mesh;
    if (pattern.singularities.empty()) return res;

    // Adjacent singular vertices cannot get separate disks.
    for (const auto& a : pattern.singularities)
        for (int u : mesh.vertex_neighbors(a.vertex))
            if (pattern.find(u))
                throw Error(ErrorKind::InvalidArgument, "singular vertices " + std::to_string(a.vertex) + " and " +
                                                            std::to_string(u) + " are adjacent");

    std::vector<char> locked(mesh.num_triangles(), 0);
    TriMesh cur = mesh;
    for (size_t si = 0; si < pattern.singularities.size(); ++si) {
        const int s = res.vertex_map[pattern.singularities[si].vertex];
        std::vector<char> singular(cur.num_vertices(), 0);
        for (const auto& x : pattern.singularities) singular[res.vertex_map[x.vertex]] = 1;

        double near = 1e300;
        for (const auto& x : pattern.singularities)
            if (x.vertex != pattern.singularities[si].vertex)
                near = std::min(near, distance(cur.vertex(s), cur.vertex(res.vertex_map[x.vertex])));

        const int valence = pattern.singularities[si].valence;
        const int spokes = std::max(valence, 4) * params.sectors_per_quadrant;
        // Smallest ring depth whose region fits the requested radius; otherwise
        // the roomiest valid one.
        const double wanted = std::min(params.radius_factor * cur.local_edge_length(s), 0.5 * near);
        std::optional<Region> region;
        int depth = 0;
        for (int k = 1; k <= 3; ++k) {
            auto r = make_region(cur, s, k, singular, locked);
            if (!r) continue;
            const bool fits = 0.8 * r->clearance >= wanted;
            if (!region || r->clearance > region->clearance) region = std::move(r), depth = k;
            if (fits) break;
        }
        std::optional<Patch> patch;
        double radius = 0.0;
        if (region) {
            radius = std::min(wanted, 0.8 * region->clearance);
            for (int attempt = 0; attempt < 6 && !patch; ++attempt) {
                patch = build_patch(cur, s, *region, radius, params.rings, spokes);
                if (!patch) radius *= 0.6;
            }
        }
        if (!patch)
            throw Error(ErrorKind::InvalidArgument,
                        "no valid spoke disk around vertex " + std::to_string(pattern.singularities[si].vertex));

        // Assemble the new mesh: surviving vertices in order, then ring points.
        std::vector<int> remap(cur.num_vertices(), -1);
        std::vector<Vec2> verts;
        for (int v = 0; v < cur.num_vertices(); ++v)
            if (!region->remove[v]) remap[v] = static_cast<int>(verts.size()), verts.push_back(cur.vertex(v));
        const int first_new = static_cast<int>(verts.size());
        verts.insert(verts.end(), patch->points.begin(), patch->points.end());
        std::vector<Tri> tris;
        std::vector<char> lock2;
        for (int t = 0; t < cur.num_triangles(); ++t) {
            if (region->tri_in[t]) continue;
            const auto& tr = cur.triangle(t);
            tris.push_back({remap[tr[0]], remap[tr[1]], remap[tr[2]]});
            lock2.push_back(locked[t]);
        }
        for (const auto& t : patch->tris) {
            Tri nt;
            for (int k = 0; k < 3; ++k) nt[k] = t[k] >= 0 ? remap[t[k]] : first_new - t[k] - 1;
            tris.push_back(nt);
            lock2.push_back(1);
        }
        for (auto& v : res.vertex_map)
            if (v >= 0) v = remap[v];
        BuildReport rep;
        cur = TriMesh::build(std::move(verts), std::move(tris), &rep);
        if (rep.reoriented != 0 || rep.dropped_vertices != 0)
            throw Error(ErrorKind::InvalidArgument, "spoke refinement produced an inconsistent mesh");
        locked = std::move(lock2);

        SpokeDisk d;
        d.vertex = remap[s];
        d.radius = radius;
        d.inner_radius = radius / params.rings;
        d.spokes = spokes;
        d.ring_depth = depth;
        res.disks.push_back(d);
    }
    // Disk vertex ids were recorded mid-way; bring them up to date.
    for (size_t i = 0; i < res.disks.size(); ++i)
        res.disks[i].vertex = res.vertex_map[pattern.singularities[i].vertex];
    res.mesh = std::move(cur);
    for (auto& x : res.pattern.singularities) {
        x.vertex = res.vertex_map[x.vertex];
        x.position = res.mesh.vertex(x.vertex);
    }
    sort_pattern(res.pattern);
    return res;
}

}  // namespace quadforge
