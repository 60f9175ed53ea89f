#include "quadforge/quadmesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>

#include "quadforge/error.hpp"
#include "quadforge/fem.hpp"

namespace quadforge {

namespace {

bool inside_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
    bool in = false;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

bool strictly_inside_triangle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
    return orient2d(a, b, p) > 0.0 && orient2d(b, c, p) > 0.0 && orient2d(c, a, p) > 0.0;
}

bool proper_crossing(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double o1 = orient2d(a, b, c), o2 = orient2d(a, b, d);
    const double o3 = orient2d(c, d, a), o4 = orient2d(c, d, b);
    return ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0));
}

std::array<Vec2, 3> gradients(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
    const double a2 = orient2d(p0, p1, p2);
    return {perp(p2 - p1) / a2, perp(p0 - p2) / a2, perp(p1 - p0) / a2};
}

struct SideNodes {
    std::vector<int> ids;
    std::vector<Vec2> pos;
};

}  // namespace

Submesh extract_partition(const QuadLayout& layout, int patch, const TriMesh& mesh) {
    const auto poly = layout.patches.at(patch).polygon(layout.edges);
    BBox box;
    for (const auto& p : poly) box.expand(p);
    std::vector<BBox> seg_box(poly.size());
    for (size_t i = 0; i < poly.size(); ++i) {
        seg_box[i].expand(poly[i]);
        seg_box[i].expand(poly[(i + 1) % poly.size()]);
    }
    Submesh s;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        const Vec2 a = mesh.vertex(tri[0]), b = mesh.vertex(tri[1]), c = mesh.vertex(tri[2]);
        BBox tb;
        tb.expand(a);
        tb.expand(b);
        tb.expand(c);
        if (!tb.overlaps(box)) continue;
        bool hit = inside_polygon(poly, mesh.triangle_centroid(t));
        for (size_t i = 0; i < poly.size() && !hit; ++i) {
            if (!seg_box[i].overlaps(tb)) continue;
            const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
            hit = strictly_inside_triangle(a, b, c, p) || proper_crossing(p, q, a, b) || proper_crossing(p, q, b, c) ||
                  proper_crossing(p, q, c, a);
        }
        if (hit) s.triangles.push_back(t);
    }
    if (s.triangles.empty()) throw Error(ErrorKind::Layout, "patch " + std::to_string(patch) + " overlaps no triangle");
    std::map<int, int> local;
    for (int t : s.triangles)
        for (int v : mesh.triangle(t)) local.emplace(v, 0);
    for (auto& [v, id] : local) {
        id = static_cast<int>(s.vertices.size());
        s.vertices.push_back(v);
        s.points.push_back(mesh.vertex(v));
    }
    for (int t : s.triangles) {
        const auto& tri = mesh.triangle(t);
        s.local.push_back({local[tri[0]], local[tri[1]], local[tri[2]]});
    }
    // connectivity through shared edges
    std::map<int, int> index;
    for (size_t i = 0; i < s.triangles.size(); ++i) index[s.triangles[i]] = static_cast<int>(i);
    std::vector<char> seen(s.triangles.size(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    size_t reached = 1;
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        for (int k = 0; k < 3; ++k) {
            const int n = mesh.neighbor(s.triangles[i], k);
            const auto it = n < 0 ? index.end() : index.find(n);
            if (it == index.end() || seen[it->second]) continue;
            seen[it->second] = 1;
            ++reached;
            queue.push_back(it->second);
        }
    }
    if (reached != s.triangles.size())
        throw Error(ErrorKind::Layout, "overlap set of patch " + std::to_string(patch) + " is disconnected");
    return s;
}

PartitionParam solve_UV(const Submesh& sub, const CrossField& field, const QuadLayout& layout, int patch) {
    const TriMesh& mesh = field.mesh();
    const int nt = static_cast<int>(sub.triangles.size());
    const int nv = static_cast<int>(sub.vertices.size());
    PartitionParam out;
    out.patch = patch;
    out.sub = sub;

    // lift the cross to one branch over the whole submesh
    std::map<int, int> index;
    for (int i = 0; i < nt; ++i) index[sub.triangles[i]] = i;
    std::vector<double> raw(nt);
    for (int i = 0; i < nt; ++i) raw[i] = field.theta_centroid(sub.triangles[i]);
    out.branch.assign(nt, 0.0);
    std::vector<char> done(nt, 0);
    std::deque<int> queue{0};
    out.branch[0] = raw[0];
    done[0] = 1;
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        for (int k = 0; k < 3; ++k) {
            const int n = mesh.neighbor(sub.triangles[i], k);
            const auto it = n < 0 ? index.end() : index.find(n);
            if (it == index.end() || done[it->second]) continue;
            const int j = it->second;
            out.branch[j] = raw[j] + kHalfPi * std::round((out.branch[i] - raw[j]) / kHalfPi);
            done[j] = 1;
            queue.push_back(j);
        }
    }
    for (int i = 0; i < nt; ++i) {
        for (int k = 0; k < 3; ++k) {
            const int n = mesh.neighbor(sub.triangles[i], k);
            const auto it = n < 0 ? index.end() : index.find(n);
            if (it == index.end()) continue;
            if (std::abs(out.branch[i] - out.branch[it->second]) >= 0.25 * kPi)
                throw Error(ErrorKind::Parameterization,
                            "lifting failure in patch " + std::to_string(patch) +
                                ": quarter-turn mismatch between triangles " + std::to_string(sub.triangles[i]) +
                                " and " + std::to_string(n));
        }
    }

    // rotate the branch so that U runs along the first side
    const auto& P = layout.patches.at(patch);
    const auto sides = P.sides();
    if (sides.size() != 4)
        throw Error(ErrorKind::Parameterization, "patch " + std::to_string(patch) + " is not four-sided");
    {
        const auto& e = layout.edges[P.edges[sides[0][0]]];
        std::vector<Vec2> pts = e.poly;
        if (!P.forward[sides[0][0]]) std::reverse(pts.begin(), pts.end());
        const size_t m = pts.size() / 2;
        const Vec2 mid = pts.size() % 2 ? pts[m] : 0.5 * (pts[m - 1] + pts[m]);
        const Vec2 tangent = normalized(pts.size() > 2 ? pts[std::min(m + 1, pts.size() - 1)] - pts[m - (m > 0)]
                                                       : pts.back() - pts.front());
        // triangle of the submesh nearest to the side midpoint
        int best = 0;
        double bd = 1e300;
        for (int i = 0; i < nt; ++i) {
            const double d = distance(mesh.triangle_centroid(sub.triangles[i]), mid);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        const double shift = kHalfPi * std::round((angle_of(tangent) - out.branch[best]) / kHalfPi);
        for (auto& b : out.branch) b += shift;
    }

    out.log_size.resize(nt);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd fu = Eigen::VectorXd::Zero(nv), fv = Eigen::VectorXd::Zero(nv);
    for (int i = 0; i < nt; ++i) {
        const auto& tri = sub.local[i];
        const auto& g = mesh.triangle(sub.triangles[i]);
        const double h = (field.h().values[g[0]] + field.h().values[g[1]] + field.h().values[g[2]]) / 3.0;
        out.log_size[i] = h;
        const Vec2 gu = from_angle(out.branch[i]) * std::exp(-h);
        const Vec2 gv = perp(gu);
        const auto grad = gradients(sub.points[tri[0]], sub.points[tri[1]], sub.points[tri[2]]);
        const double area = 0.5 * orient2d(sub.points[tri[0]], sub.points[tri[1]], sub.points[tri[2]]);
        for (int a = 0; a < 3; ++a) {
            fu[tri[a]] += area * dot(grad[a], gu);
            fv[tri[a]] += area * dot(grad[a], gv);
            for (int b = 0; b < 3; ++b) trip.emplace_back(tri[a], tri[b], area * dot(grad[a], grad[b]));
        }
    }
    SpMat k(nv, nv);
    k.setFromTriplets(trip.begin(), trip.end());
    std::vector<int> keep(nv), drop(nv, -1);
    keep[0] = -1;
    drop[0] = 0;
    for (int v = 1; v < nv; ++v) keep[v] = v - 1;
    const Partitioned parts = partition(k, keep, drop);
    SpSolver solver;
    factorize(solver, parts.inner, "UV stiffness");
    const Eigen::VectorXd su = solver.solve(fu.tail(nv - 1));
    const Eigen::VectorXd sv = solver.solve(fv.tail(nv - 1));
    out.U.assign(nv, 0.0);
    out.V.assign(nv, 0.0);
    for (int v = 1; v < nv; ++v) {
        out.U[v] = su[v - 1];
        out.V[v] = sv[v - 1];
    }

    out.min_jacobian = 1e300;
    for (int i = 0; i < nt; ++i) {
        const auto& tri = sub.local[i];
        const double j = orient2d(out.uv(tri[0]), out.uv(tri[1]), out.uv(tri[2])) /
                         orient2d(sub.points[tri[0]], sub.points[tri[1]], sub.points[tri[2]]);
        out.min_jacobian = std::min(out.min_jacobian, j);
    }
    if (!(out.min_jacobian > 0.0))
        throw Error(ErrorKind::Parameterization, "non-positive UV Jacobian in patch " + std::to_string(patch) + " (" +
                                                     std::to_string(out.min_jacobian) + ")");

    const PointLocator phys(sub.points, sub.local);
    for (int c = 0; c < 4; ++c) {
        const Vec2 p = layout.nodes[P.nodes[sides[c][0]]].p;
        const auto loc = phys.locate(p);
        const auto& tri = sub.local[loc.triangle];
        out.corner_uv[c] = out.uv(tri[0]) * loc.bary[0] + out.uv(tri[1]) * loc.bary[1] + out.uv(tri[2]) * loc.bary[2];
    }
    const auto circ = circulation(out, mesh);
    for (double c : circ) out.max_circulation = std::max(out.max_circulation, std::abs(c));
    return out;
}

std::vector<double> circulation(const PartitionParam& param, const TriMesh& mesh) {
    const auto& sub = param.sub;
    std::map<int, int> index;
    for (size_t i = 0; i < sub.triangles.size(); ++i) index[sub.triangles[i]] = static_cast<int>(i);
    std::vector<double> out;
    for (int v : sub.vertices) {
        if (mesh.is_boundary_vertex(v)) continue;
        double c = 0.0;
        bool whole = true;
        for (int t : mesh.vertex_triangles(v)) {
            const auto it = index.find(t);
            if (it == index.end()) {
                whole = false;
                break;
            }
            const auto& tri = mesh.triangle(t);
            const int k = tri[0] == v ? 0 : tri[1] == v ? 1 : 2;
            const Vec2 pv = mesh.vertex(v);
            const Vec2 ma = 0.5 * (pv + mesh.vertex(tri[(k + 1) % 3]));
            const Vec2 mb = 0.5 * (pv + mesh.vertex(tri[(k + 2) % 3]));
            const Vec2 g = from_angle(param.branch[it->second]) * std::exp(-param.log_size[it->second]);
            c += dot(g, mb - ma);
        }
        if (whole) out.push_back(c);
    }
    return out;
}

EdgeDivisions discretize_edges(const QuadLayout& layout, const CrossField& field, double target_size) {
    if (!(target_size > 0.0)) throw Error(ErrorKind::InvalidArgument, "target size must be positive");
    const int ne = static_cast<int>(layout.edges.size());
    EdgeDivisions d;
    d.ideal.assign(ne, 0.0);
    d.count.assign(ne, 0);
    for (int e = 0; e < ne; ++e) {
        const auto& poly = layout.edges[e].poly;
        double w = 0.0;
        for (size_t i = 1; i < poly.size(); ++i)
            w += std::exp(-field.sample(0.5 * (poly[i - 1] + poly[i])).H) * distance(poly[i - 1], poly[i]);
        d.ideal[e] = w / target_size;
    }
    std::vector<int> parent(ne);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (size_t p = 0; p < layout.patches.size(); ++p) {
        const auto& P = layout.patches[p];
        const auto sides = P.sides();
        if (sides.size() != 4)
            throw Error(ErrorKind::Layout, "patch " + std::to_string(p) + " is not four-sided");
        for (const auto& s : sides)
            if (s.size() != 1)
                throw Error(ErrorKind::Layout, "patch " + std::to_string(p) + " has a side made of several layout edges");
        for (int k = 0; k < 2; ++k) {
            const int a = find(P.edges[sides[k][0]]), b = find(P.edges[sides[k + 2][0]]);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::map<int, std::pair<double, int>> classes;
    for (int e = 0; e < ne; ++e) {
        auto& c = classes[find(e)];
        c.first += d.ideal[e];
        c.second += 1;
    }
    d.chord.resize(ne);
    for (int e = 0; e < ne; ++e) {
        const int r = find(e);
        d.chord[e] = r;
        const auto& c = classes[r];
        d.count[e] = std::max(1, static_cast<int>(std::lround(c.first / c.second)));
    }
    for (size_t p = 0; p < layout.patches.size(); ++p) {
        const auto& P = layout.patches[p];
        const auto sides = P.sides();
        for (int k = 0; k < 2; ++k)
            if (d.count[P.edges[sides[k][0]]] != d.count[P.edges[sides[k + 2][0]]])
                throw Error(ErrorKind::Layout, "contradictory division counts in patch " + std::to_string(p));
    }
    return d;
}

namespace {

// Points on the polyline at equal increments of the integral of e^-H dl.
std::vector<Vec2> split_weighted(const std::vector<Vec2>& poly, const CrossField& field, int n) {
    std::vector<double> cum(poly.size(), 0.0);
    for (size_t i = 1; i < poly.size(); ++i)
        cum[i] = cum[i - 1] + std::exp(-field.sample(0.5 * (poly[i - 1] + poly[i])).H) * distance(poly[i - 1], poly[i]);
    std::vector<Vec2> out;
    for (int k = 1; k < n; ++k) {
        const double target = cum.back() * k / n;
        const size_t i = static_cast<size_t>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
        const size_t j = std::clamp<size_t>(i, 1, poly.size() - 1);
        const double span = cum[j] - cum[j - 1];
        const double w = span > 0.0 ? (target - cum[j - 1]) / span : 0.0;
        out.push_back(poly[j - 1] + (poly[j] - poly[j - 1]) * w);
    }
    return out;
}

}  // namespace

QuadMesh tfi_and_map(const QuadLayout& layout, const std::vector<PartitionParam>& params,
                     const EdgeDivisions& divisions, const CrossField& field) {
    QuadMesh q;
    std::vector<int> node_id(layout.nodes.size(), -1);
    auto add_vertex = [&](const Vec2& p, bool boundary) {
        q.vertices.push_back(p);
        q.boundary.push_back(boundary);
        return static_cast<int>(q.vertices.size()) - 1;
    };
    // layout nodes and layout-edge interior nodes, created once
    std::vector<std::vector<int>> edge_nodes(layout.edges.size());
    for (const auto& P : layout.patches)
        for (int n : P.nodes)
            if (node_id[n] < 0) node_id[n] = add_vertex(layout.nodes[n].p, layout.nodes[n].boundary());
    for (size_t e = 0; e < layout.edges.size(); ++e) {
        const auto& E = layout.edges[e];
        if (node_id[E.a] < 0 || node_id[E.b] < 0) continue;
        const auto pts = split_weighted(E.poly, field, divisions.count[e]);
        auto& ids = edge_nodes[e];
        ids.push_back(node_id[E.a]);
        for (const auto& p : pts) ids.push_back(add_vertex(p, E.loop >= 0));
        ids.push_back(node_id[E.b]);
    }

    for (const auto& param : params) {
        const auto& P = layout.patches.at(param.patch);
        const auto sides = P.sides();
        std::array<std::vector<int>, 4> side_ids;
        for (int s = 0; s < 4; ++s) {
            const int pos = sides[s][0];
            side_ids[s] = edge_nodes[P.edges[pos]];
            if (!P.forward[pos]) std::reverse(side_ids[s].begin(), side_ids[s].end());
        }
        const int n0 = static_cast<int>(side_ids[0].size()) - 1, n1 = static_cast<int>(side_ids[1].size()) - 1;
        if (static_cast<int>(side_ids[2].size()) - 1 != n0 || static_cast<int>(side_ids[3].size()) - 1 != n1)
            throw Error(ErrorKind::Layout, "opposite sides of patch " + std::to_string(param.patch) +
                                               " have different division counts");
        std::vector<int> grid(static_cast<size_t>(n0 + 1) * (n1 + 1), -1);
        auto at = [&](int i, int j) -> int& { return grid[static_cast<size_t>(j) * (n0 + 1) + i]; };
        for (int i = 0; i <= n0; ++i) {
            at(i, 0) = side_ids[0][i];
            at(n0 - i, n1) = side_ids[2][i];
        }
        for (int j = 0; j <= n1; ++j) {
            at(n0, j) = side_ids[1][j];
            at(0, n1 - j) = side_ids[3][j];
        }
        const auto& sub = param.sub;
        const PointLocator phys(sub.points, sub.local);
        std::vector<Vec2> uvp(sub.points.size());
        for (size_t v = 0; v < uvp.size(); ++v) uvp[v] = param.uv(static_cast<int>(v));
        const PointLocator uvl(uvp, sub.local);
        auto to_uv = [&](const Vec2& x) {
            const auto loc = phys.locate(x);
            const auto& t = sub.local[loc.triangle];
            return uvp[t[0]] * loc.bary[0] + uvp[t[1]] * loc.bary[1] + uvp[t[2]] * loc.bary[2];
        };
        std::vector<Vec2> bottom(n0 + 1), top(n0 + 1), left(n1 + 1), right(n1 + 1);
        for (int i = 0; i <= n0; ++i) {
            bottom[i] = to_uv(q.vertices[at(i, 0)]);
            top[i] = to_uv(q.vertices[at(i, n1)]);
        }
        for (int j = 0; j <= n1; ++j) {
            left[j] = to_uv(q.vertices[at(0, j)]);
            right[j] = to_uv(q.vertices[at(n0, j)]);
        }
        for (int j = 1; j < n1; ++j) {
            const double t = static_cast<double>(j) / n1;
            for (int i = 1; i < n0; ++i) {
                const double s = static_cast<double>(i) / n0;
                const Vec2 uv = bottom[i] * (1 - t) + top[i] * t + left[j] * (1 - s) + right[j] * s -
                                (bottom[0] * ((1 - s) * (1 - t)) + bottom[n0] * (s * (1 - t)) +
                                 top[0] * ((1 - s) * t) + top[n0] * (s * t));
                const auto loc = uvl.try_locate(uv);
                if (!loc) {
                    std::ostringstream msg;
                    msg << "UV node (" << uv.x << ", " << uv.y << ") of patch " << param.patch
                        << " lies outside the submesh image";
                    throw Error(ErrorKind::Parameterization, msg.str());
                }
                const auto& tri = sub.local[loc->triangle];
                const Vec2 x = sub.points[tri[0]] * loc->bary[0] + sub.points[tri[1]] * loc->bary[1] +
                               sub.points[tri[2]] * loc->bary[2];
                at(i, j) = add_vertex(x, false);
            }
        }
        for (int j = 0; j < n1; ++j)
            for (int i = 0; i < n0; ++i) {
                q.quads.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)});
                q.patch.push_back(param.patch);
            }
    }
    q.valence.assign(q.vertices.size(), 0);
    for (const auto& quad : q.quads)
        for (int v : quad) ++q.valence[v];
    return q;
}

std::vector<int> QuadMesh::irregular() const {
    std::vector<int> out;
    for (size_t v = 0; v < vertices.size(); ++v)
        if (!boundary[v] && valence[v] != 4) out.push_back(static_cast<int>(v));
    return out;
}

bool QuadMesh::conforming() const {
    std::map<std::pair<int, int>, int> uses;
    for (const auto& quad : quads)
        for (int k = 0; k < 4; ++k) {
            int a = quad[k], b = quad[(k + 1) % 4];
            if (a > b) std::swap(a, b);
            ++uses[{a, b}];
        }
    for (const auto& [e, n] : uses) {
        const bool bnd = boundary[e.first] && boundary[e.second];
        if (n > 2 || (n == 1 && !bnd)) return false;
    }
    return true;
}

double QuadMesh::min_signed_area() const {
    double m = 1e300;
    for (const auto& quad : quads) {
        double a = 0.0;
        for (int k = 0; k < 4; ++k) a += cross(vertices[quad[k]], vertices[quad[(k + 1) % 4]]);
        m = std::min(m, 0.5 * a);
    }
    return m;
}

double QuadMesh::min_corner_area() const {
    double m = 1e300;
    for (const auto& quad : quads) {
        for (int k = 0; k < 4; ++k)
            m = std::min(m, 0.5 * orient2d(vertices[quad[(k + 3) % 4]], vertices[quad[k]], vertices[quad[(k + 1) % 4]]));
    }
    return m;
}

double quad_quality(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const std::array<Vec2, 4> p{a, b, c, d};
    double eta = 1.0;
    for (int k = 0; k < 4; ++k) {
        const Vec2 e1 = p[(k + 1) % 4] - p[k];
        const Vec2 e2 = p[(k + 3) % 4] - p[k];
        const double l = norm(e1) * norm(e2);
        eta = std::min(eta, l > 0.0 ? cross(e1, e2) / l : 0.0);
    }
    return std::max(0.0, eta);
}

QualityReport quality(const QuadMesh& q) {
    QualityReport r;
    r.elements = static_cast<int>(q.quads.size());
    if (q.quads.empty()) return r;
    r.worst = 1.0;
    int good = 0;
    for (const auto& quad : q.quads) {
        const double e = quad_quality(q.vertices[quad[0]], q.vertices[quad[1]], q.vertices[quad[2]], q.vertices[quad[3]]);
        r.eta.push_back(e);
        r.mean += e;
        r.worst = std::min(r.worst, e);
        good += e > 0.9;
    }
    r.mean /= static_cast<double>(r.elements);
    r.tau = 100.0 * good / r.elements;
    return r;
}

nlohmann::json to_json(const QualityReport& r) {
    return {{"elements", r.elements}, {"eta_mean", r.mean}, {"eta_worst", r.worst}, {"tau_percent", r.tau}};
}

std::string quality_table(const QualityReport& r, double edge_length) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %-10s %-8s %-8s %-8s\n%-12.4g %-10d %-8.3f %-8.3f %-8.2f\n", "edge_length",
                  "elements", "eta_bar", "eta_w", "tau", edge_length, r.elements, r.mean, r.worst, r.tau);
    return buf;
}

void smooth_winslow(QuadMesh& q, int iterations) {
    const int nv = static_cast<int>(q.vertices.size());
    std::vector<std::vector<std::pair<int, int>>> incident(nv);  // (quad, corner)
    for (size_t k = 0; k < q.quads.size(); ++k)
        for (int c = 0; c < 4; ++c) incident[q.quads[k][c]].push_back({static_cast<int>(k), c});
    // Regular interior vertices get the 8-neighbour ring E,NE,N,NW,W,SW,S,SE;
    // irregular ones fall back to the mean of their edge neighbours.
    std::vector<std::array<int, 8>> ring(nv);
    std::vector<char> regular(nv, 0);
    std::vector<std::vector<int>> star(nv);
    for (int v = 0; v < nv; ++v) {
        if (q.boundary[v]) continue;
        for (const auto& [k, c] : incident[v]) star[v].push_back(q.quads[k][(c + 1) % 4]);
        if (incident[v].size() != 4) continue;
        auto next_of = [&](int n) {
            for (const auto& [k, c] : incident[v])
                if (q.quads[k][(c + 1) % 4] == n) return std::make_pair(k, c);
            return std::make_pair(-1, -1);
        };
        int n = q.quads[incident[v][0].first][(incident[v][0].second + 1) % 4];
        bool ok = true;
        for (int i = 0; i < 4 && ok; ++i) {
            const auto [k, c] = next_of(n);
            if (k < 0) {
                ok = false;
                break;
            }
            ring[v][2 * i] = n;
            ring[v][2 * i + 1] = q.quads[k][(c + 2) % 4];
            n = q.quads[k][(c + 3) % 4];
        }
        regular[v] = ok && n == ring[v][0];
    }
    auto folds = [&](int v) {
        for (const auto& [k, c] : incident[v]) {
            const auto& quad = q.quads[k];
            for (int i = 0; i < 4; ++i)
                if (orient2d(q.vertices[quad[(i + 3) % 4]], q.vertices[quad[i]], q.vertices[quad[(i + 1) % 4]]) <= 0.0)
                    return true;
        }
        return false;
    };
    for (int it = 0; it < iterations; ++it) {
        for (int v = 0; v < nv; ++v) {
            if (q.boundary[v] || star[v].empty()) continue;
            Vec2 next;
            if (regular[v]) {
                const auto& r = ring[v];
                const Vec2 E = q.vertices[r[0]], NE = q.vertices[r[1]], N = q.vertices[r[2]], NW = q.vertices[r[3]];
                const Vec2 W = q.vertices[r[4]], SW = q.vertices[r[5]], S = q.vertices[r[6]], SE = q.vertices[r[7]];
                const Vec2 xi = (E - W) * 0.5, eta = (N - S) * 0.5;
                const double alpha = norm2(eta), beta = dot(xi, eta), gamma = norm2(xi);
                if (alpha + gamma <= 0.0) continue;
                next = ((E + W) * alpha + (N + S) * gamma - (NE - NW + SW - SE) * (0.5 * beta)) / (2.0 * (alpha + gamma));
            } else {
                for (int u : star[v]) next += q.vertices[u];
                next = next / static_cast<double>(star[v].size());
            }
            const Vec2 old = q.vertices[v];
            q.vertices[v] = next;
            if (folds(v)) q.vertices[v] = old;
        }
    }
}

MshData msh_from_quads(const QuadMesh& q) {
    if (q.quads.empty()) throw Error(ErrorKind::Io, "refusing to export an empty quad mesh");
    MshData d;
    d.nodes = q.vertices;
    for (size_t k = 0; k < q.quads.size(); ++k) {
        MshElement e;
        e.type = kMshQuad;
        e.physical = q.patch[k] + 1;
        e.elementary = q.patch[k] + 1;
        e.nodes.assign(q.quads[k].begin(), q.quads[k].end());
        d.elements.push_back(std::move(e));
    }
    return d;
}

QuadMesh quads_from_msh(const MshData& data) {
    QuadMesh q;
    q.vertices = data.nodes;
    for (const auto& e : data.elements) {
        if (e.type != kMshQuad) continue;
        q.quads.push_back({e.nodes[0], e.nodes[1], e.nodes[2], e.nodes[3]});
        q.patch.push_back(e.physical - 1);
    }
    q.valence.assign(q.vertices.size(), 0);
    for (const auto& quad : q.quads)
        for (int v : quad) ++q.valence[v];
    std::map<std::pair<int, int>, int> uses;
    for (const auto& quad : q.quads)
        for (int k = 0; k < 4; ++k) {
            int a = quad[k], b = quad[(k + 1) % 4];
            if (a > b) std::swap(a, b);
            ++uses[{a, b}];
        }
    q.boundary.assign(q.vertices.size(), 0);
    for (const auto& [e, n] : uses)
        if (n == 1) q.boundary[e.first] = q.boundary[e.second] = 1;
    return q;
}

void draw_quads(SvgCanvas& svg, const QuadMesh& q) {
    for (const auto& quad : q.quads) {
        const std::array<Vec2, 4> p{q.vertices[quad[0]], q.vertices[quad[1]], q.vertices[quad[2]], q.vertices[quad[3]]};
        svg.polygon(p, "#f4f4f4", "#333333");
    }
    for (size_t v = 0; v < q.vertices.size(); ++v) {
        if (q.boundary[v] || q.valence[v] == 4) continue;
        svg.circle(q.vertices[v], 4.0, valence_color(q.valence[v]));
    }
}

}  // namespace quadforge
