#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "quadforge/error.hpp"
#include "quadforge/layout.hpp"

namespace quadforge {

namespace {

// Moves the last point of c onto target, dragging the tail along linearly.
void move_end(Separatrix& c, const Vec2& target) {
    const Vec2 delta = target - c.points.back();
    if (norm(delta) == 0.0) return;
    const double blend = std::min(std::max(3.0 * norm(delta), 1e-12), 0.5 * c.length());
    double d = 0.0;
    for (size_t i = c.points.size(); i-- > 0;) {
        if (i + 1 < c.points.size()) d += distance(c.points[i], c.points[i + 1]);
        if (d >= blend) break;
        c.points[i] += delta * (1.0 - d / blend);
    }
    c.points.back() = target;
}

struct OnCurve {
    int curve = -1;
    double dist = 1e300;
    Vec2 p;
    Vec2 tangent;
};

OnCurve closest_on_curves(const std::vector<Separatrix>& curves, const Vec2& p, int skip) {
    OnCurve best;
    for (size_t c = 0; c < curves.size(); ++c) {
        if (static_cast<int>(c) == skip) continue;
        const auto& pts = curves[c].points;
        for (size_t i = 0; i + 1 < pts.size(); ++i) {
            const Vec2 q = closest_point_on_segment(p, pts[i], pts[i + 1]);
            const double d = distance(p, q);
            if (d < best.dist) best = {static_cast<int>(c), d, q, normalized(pts[i + 1] - pts[i])};
        }
    }
    return best;
}

struct Hit {
    double s = 2.0;
    Vec2 p;
    int curve = -1;   // -1 for the domain boundary
};

// First crossing of segment [a, b] with any curve other than `self` or the boundary.
Hit first_crossing(const std::vector<Separatrix>& curves, const TriMesh& m, const Vec2& a, const Vec2& b, int self,
                   size_t own_prefix, double skip_near, const Vec2& start) {
    Hit best;
    auto consider = [&](const Vec2& c, const Vec2& d, int curve) {
        double s, t;
        if (!segment_intersection(a, b, c, d, s, t)) return;
        if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0) return;
        const Vec2 p = a + (b - a) * s;
        if (distance(p, start) < skip_near) return;
        if (s < best.s) best = {s, p, curve};
    };
    for (size_t c = 0; c < curves.size(); ++c) {
        const auto& pts = curves[c].points;
        // own curve: only the part before the extension started
        const size_t n = static_cast<int>(c) == self ? std::min(pts.size(), own_prefix) : pts.size();
        for (size_t i = 0; i + 1 < n; ++i) consider(pts[i], pts[i + 1], static_cast<int>(c));
    }
    for (const auto& e : m.edges())
        if (e.is_boundary()) consider(m.vertex(e.v[0]), m.vertex(e.v[1]), -1);
    return best;
}

// Continues curve `c` from its last point in direction `dir` until it meets
// another curve or the boundary.
bool extend(std::vector<Separatrix>& curves, int c, const TriMesh& m, const CrossField* field,
            const std::vector<Capture>& caps, double step) {
    Separatrix& cur = curves[c];
    const Vec2 start = cur.points.back();
    const Vec2 dir = normalized(cur.points.back() - cur.points[cur.points.size() - 2]);
    std::vector<Vec2> path;
    if (field) {
        TraceParams tp;
        path = trace_curve(*field, start, dir, caps, tp, -1).points;
    } else {
        path.push_back(start);
        const long n = static_cast<long>(4.0 * m.bbox_diagonal() / step) + 2;
        for (long i = 1; i <= n; ++i) path.push_back(start + dir * (step * static_cast<double>(i)));
    }
    const double skip = 1e-9 * m.bbox_diagonal();
    const size_t own = cur.points.size() - 1;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        const Hit h = first_crossing(curves, m, path[i], path[i + 1], c, own, skip, start);
        if (h.s <= 1.0) {
            cur.points.push_back(h.p);
            cur.end = h.curve < 0 ? Termination::Boundary : Termination::Cut;
            cur.host = h.curve;
            return true;
        }
        cur.points.push_back(path[i + 1]);
    }
    // the traced path may stop a hair short of the boundary
    cur.end = Termination::Boundary;
    return true;
}

struct TInfo {
    int node = -1;
    int hanging = -1;
    int host = -1;
    double side = 0.0;   // sign of the hanging end relative to the host tangent
};

}  // namespace

QuadLayout fix_tjunctions(const QuadLayout& layout, const TriMesh& mesh, const SingularityPattern& pattern,
                          const CrossField* field, TFixReport* report, const LayoutParams& params,
                          int max_rounds) {
    TFixReport rep;
    const double merge_tol = 2.0 * mesh.mean_edge_length();
    const double tol = params.cluster_factor * mesh.mean_edge_length();
    const auto caps = captures_from(launch_sites(mesh, pattern), {}, mesh);
    QuadLayout cur = layout;
    for (; rep.rounds < max_rounds; ++rep.rounds) {
        const auto ts = cur.tjunctions();
        if (ts.empty()) {
            rep.resolved = true;
            break;
        }
        auto curves = cur.curves;
        std::vector<TInfo> info;
        for (int t : ts) {
            const Vec2 p = cur.nodes[t].p;
            TInfo ti;
            ti.node = t;
            for (size_t c = 0; c < curves.size(); ++c) {
                auto& cv = curves[c];
                if (distance(cv.points.back(), p) < tol) ti.hanging = static_cast<int>(c);
                else if (cv.origin < 0 && distance(cv.points.front(), p) < tol) {
                    std::reverse(cv.points.begin(), cv.points.end());
                    ti.hanging = static_cast<int>(c);
                }
            }
            if (ti.hanging < 0) continue;
            const auto on = closest_on_curves(curves, p, ti.hanging);
            ti.host = on.curve;
            const auto& hp = curves[ti.hanging].points;
            ti.side = cross(on.tangent, hp.back() - hp[hp.size() - 2]);
            info.push_back(ti);
        }
        std::sort(info.begin(), info.end(), [&](const TInfo& a, const TInfo& b) {
            return curves[a.hanging].length() < curves[b.hanging].length();
        });
        std::set<int> done;
        for (const auto& ti : info) {
            if (done.count(ti.hanging)) continue;
            const Vec2 p = curves[ti.hanging].points.back();
            // opposing T on the same host
            const TInfo* partner = nullptr;
            double pd = merge_tol;
            for (const auto& o : info) {
                if (o.hanging == ti.hanging || done.count(o.hanging) || o.host != ti.host) continue;
                if (o.side * ti.side >= 0.0) continue;
                const double d = distance(curves[o.hanging].points.back(), p);
                if (d < pd) {
                    pd = d;
                    partner = &o;
                }
            }
            if (partner) {
                const Vec2 mid = 0.5 * (p + curves[partner->hanging].points.back());
                const Vec2 target = closest_on_curves(curves, mid, ti.hanging).p;
                move_end(curves[ti.hanging], target);
                move_end(curves[partner->hanging], target);
                done.insert(ti.hanging);
                done.insert(partner->hanging);
                ++rep.merged;
                continue;
            }
            // admissible node on the host: not on the boundary, not itself a T
            int best = -1;
            double bd = merge_tol;
            for (const auto& e : cur.edges) {
                if (e.curve != ti.host) continue;
                for (int n : {e.a, e.b}) {
                    const auto& nd = cur.nodes[n];
                    if (nd.boundary() || n == ti.node || std::find(ts.begin(), ts.end(), n) != ts.end()) continue;
                    const double d = distance(nd.p, p);
                    if (d < bd) {
                        bd = d;
                        best = n;
                    }
                }
            }
            if (best >= 0) {
                move_end(curves[ti.hanging], cur.nodes[best].p);
                done.insert(ti.hanging);
                ++rep.merged;
                continue;
            }
            extend(curves, ti.hanging, mesh, field, caps, 0.5 * mesh.mean_edge_length());
            // snap the new end onto a nearby node of the curve it reached
            auto& hc = curves[ti.hanging];
            if (hc.end == Termination::Cut) {
                for (const auto& nd : cur.nodes) {
                    if (nd.boundary() || distance(nd.p, hc.points.back()) >= merge_tol) continue;
                    if (distance(nd.p, hc.points.back()) < tol) continue;
                    if (closest_on_curves(curves, nd.p, ti.hanging).dist < tol) {
                        move_end(hc, nd.p);
                        break;
                    }
                }
            }
            done.insert(ti.hanging);
            ++rep.extended;
        }
        cur = build_partitions(mesh, pattern, std::move(curves), params);
    }
    if (!rep.resolved && cur.tjunctions().empty()) rep.resolved = true;
    if (report) *report = rep;
    return cur;
}

QuadLayout split_valence2(const QuadLayout& layout, const TriMesh& mesh, const SingularityPattern& pattern,
                          SplitReport* report, const LayoutParams& params) {
    SplitReport rep;
    SingularityPattern pat = pattern;
    auto curves = layout.curves;
    const double tol = params.cluster_factor * mesh.mean_edge_length();
    const double step = 0.5 * mesh.mean_edge_length();
    std::vector<Vec2> midpoints;
    for (const auto& patch : layout.patches) {
        if (patch.num_corners() != 3) continue;
        const auto poly = patch.polygon(layout.edges);
        double a = 0.0;
        Vec2 c{};
        for (size_t i = 0; i < poly.size(); ++i) {
            const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
            const double w = cross(p, q);
            a += w;
            c += (p + q) * w;
        }
        c = c / (3.0 * a);
        const auto loc = mesh.locate(c);
        int v = -1;
        double bd = 1e300;
        for (int k : mesh.triangle(loc.triangle)) {
            if (mesh.is_boundary_vertex(k) || pat.find(k)) continue;
            if (distance(mesh.vertex(k), c) < bd) {
                bd = distance(mesh.vertex(k), c);
                v = k;
            }
        }
        if (v < 0) throw Error(ErrorKind::Layout, "no interior vertex for the centre of a three-sided patch");
        pat.singularities.push_back(make_singularity(mesh, v, 3));
        const Vec2 cv = mesh.vertex(v);
        for (const auto& side : patch.sides()) {
            // midpoint by arc length along the side
            std::vector<Vec2> pts;
            for (int pos : side) {
                const auto& e = layout.edges[patch.edges[pos]];
                std::vector<Vec2> poly2 = e.poly;
                if (!patch.forward[pos]) std::reverse(poly2.begin(), poly2.end());
                pts.insert(pts.end(), poly2.begin() + (pts.empty() ? 0 : 1), poly2.end());
            }
            double len = 0.0;
            for (size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
            Vec2 mid = pts.front();
            double s = 0.0;
            for (size_t i = 1; i < pts.size(); ++i) {
                const double l = distance(pts[i - 1], pts[i]);
                if (s + l >= 0.5 * len) {
                    mid = pts[i - 1] + (pts[i] - pts[i - 1]) * ((0.5 * len - s) / l);
                    break;
                }
                s += l;
            }
            for (const auto& m : midpoints)
                if (distance(m, mid) < 2.0 * tol) mid = m;
            midpoints.push_back(mid);
            Separatrix sp;
            sp.origin = v;
            const int n = std::max(2, static_cast<int>(distance(cv, mid) / step));
            for (int i = 0; i <= n; ++i) sp.points.push_back(cv + (mid - cv) * (static_cast<double>(i) / n));
            sp.end = Termination::Cut;
            curves.push_back(std::move(sp));
        }
        ++rep.split;
    }
    sort_pattern(pat);
    QuadLayout out = build_partitions(mesh, pat, std::move(curves), params);
    rep.pattern = implied_pattern(out, mesh);
    if (report) *report = std::move(rep);
    return out;
}

SingularityPattern implied_pattern(const QuadLayout& layout, const TriMesh& mesh) {
    SingularityPattern out;
    out.chi = mesh.euler_characteristic();
    const auto counts = layout.patch_counts();
    const auto turning = turning_angles(mesh);
    for (size_t i = 0; i < layout.nodes.size(); ++i) {
        const auto& n = layout.nodes[i];
        int v = n.vertex;
        if (v < 0) {
            double bd = 1e300;
            for (int k = 0; k < mesh.num_vertices(); ++k) {
                if (mesh.is_boundary_vertex(k) != n.boundary()) continue;
                const double d = distance(mesh.vertex(k), n.p);
                if (d < bd) {
                    bd = d;
                    v = k;
                }
            }
        }
        const int valence = counts[i];
        if (n.boundary()) {
            const int c = corner_quarters(turning[v]);
            if (2 - valence == c) continue;
        } else if (valence == 4) {
            continue;
        }
        if (valence < 1 || valence > 8 || out.find(v)) continue;
        out.singularities.push_back(make_singularity(mesh, v, valence));
    }
    sort_pattern(out);
    return out;
}

}  // namespace quadforge
