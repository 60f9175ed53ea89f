#include "quadforge/layout.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "quadforge/error.hpp"

namespace quadforge {

const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Singularity: return "singularity";
        case NodeKind::BoundarySingularity: return "boundary_singularity";
        case NodeKind::Corner: return "corner";
        case NodeKind::BoundaryHit: return "boundary_hit";
        case NodeKind::Crossing: return "crossing";
        case NodeKind::Free: return "free";
    }
    return "?";
}

double LayoutEdge::length() const {
    double l = 0.0;
    for (size_t i = 1; i < poly.size(); ++i) l += distance(poly[i - 1], poly[i]);
    return l;
}

int LayoutPatch::num_corners() const {
    return static_cast<int>(std::count(corner.begin(), corner.end(), 1));
}

std::vector<Vec2> LayoutPatch::polygon(const std::vector<LayoutEdge>& all) const {
    std::vector<Vec2> out;
    for (size_t i = 0; i < edges.size(); ++i) {
        const auto& poly = all[edges[i]].poly;
        if (forward[i]) out.insert(out.end(), poly.begin(), poly.end() - 1);
        else out.insert(out.end(), poly.rbegin(), poly.rend() - 1);
    }
    return out;
}

std::vector<std::vector<int>> LayoutPatch::sides() const {
    std::vector<std::vector<int>> out;
    const int n = static_cast<int>(nodes.size());
    int first = -1;
    for (int i = 0; i < n; ++i)
        if (corner[i]) {
            first = i;
            break;
        }
    if (first < 0) return out;
    for (int k = 0; k < n; ++k) {
        const int i = (first + k) % n;
        if (corner[i]) out.emplace_back();
        out.back().push_back(i);
    }
    return out;
}

bool QuadLayout::all_quads() const {
    if (patches.empty()) return false;
    for (const auto& p : patches)
        if (p.num_corners() != 4) return false;
    return true;
}

int QuadLayout::degree(int node) const {
    int d = 0;
    for (const auto& e : edges) d += (e.a == node) + (e.b == node);
    return d;
}

std::vector<int> QuadLayout::tjunctions() const {
    std::vector<int> deg(nodes.size(), 0);
    for (const auto& e : edges) {
        ++deg[e.a];
        ++deg[e.b];
    }
    std::vector<int> out;
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].kind == NodeKind::Crossing && deg[i] % 2 == 1) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> QuadLayout::patch_counts() const {
    std::vector<int> out(nodes.size(), 0);
    for (const auto& p : patches)
        for (int n : p.nodes) ++out[n];
    return out;
}

namespace {

double cumulative(const std::vector<Vec2>& pts, std::vector<double>& cum) {
    cum.assign(pts.size(), 0.0);
    for (size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + distance(pts[i - 1], pts[i]);
    return cum.empty() ? 0.0 : cum.back();
}

// Part of a polyline between arc lengths s0 < s1, endpoints interpolated.
std::vector<Vec2> slice(const std::vector<Vec2>& pts, const std::vector<double>& cum, double s0, double s1) {
    auto at = [&](double s) {
        const auto it = std::upper_bound(cum.begin(), cum.end(), s);
        if (it == cum.begin()) return pts.front();
        if (it == cum.end()) return pts.back();
        const size_t i = static_cast<size_t>(it - cum.begin());
        const double l = cum[i] - cum[i - 1];
        const double w = l > 0.0 ? (s - cum[i - 1]) / l : 0.0;
        return pts[i - 1] + (pts[i] - pts[i - 1]) * w;
    };
    std::vector<Vec2> out{at(s0)};
    for (size_t i = 0; i < pts.size(); ++i)
        if (cum[i] > s0 && cum[i] < s1) out.push_back(pts[i]);
    out.push_back(at(s1));
    return out;
}

struct BoundaryProjection {
    int loop = -1;
    double param = 0.0;   // vertex index in loop + fraction along the next edge
    Vec2 p;
    double dist = 1e300;
};

BoundaryProjection project_to_boundary(const TriMesh& m, const Vec2& p) {
    BoundaryProjection best;
    const auto& loops = m.boundary_loops();
    for (size_t l = 0; l < loops.size(); ++l) {
        const auto& vs = loops[l].vertices;
        for (size_t i = 0; i < vs.size(); ++i) {
            const Vec2 a = m.vertex(vs[i]), b = m.vertex(vs[(i + 1) % vs.size()]);
            const Vec2 q = closest_point_on_segment(p, a, b);
            const double d = distance(p, q);
            if (d < best.dist) {
                const double len = distance(a, b);
                best = {static_cast<int>(l), static_cast<double>(i) + (len > 0.0 ? distance(a, q) / len : 0.0), q, d};
            }
        }
    }
    return best;
}

int priority(NodeKind k) { return static_cast<int>(k); }

class Builder {
public:
    Builder(const TriMesh& m, const SingularityPattern& pattern, const LayoutParams& params)
        : m_(m), pattern_(pattern), params_(params) {
        tol_ = params.cluster_factor * m.mean_edge_length();
        loop_events_.resize(m.boundary_loops().size());
    }

    QuadLayout run(std::vector<Separatrix> curves) {
        out_.curves = std::move(curves);
        add_fixed_nodes();
        curve_events_.resize(out_.curves.size());
        for (size_t c = 0; c < out_.curves.size(); ++c) add_endpoints(static_cast<int>(c));
        for (const auto& h : curve_intersections(out_.curves, tol_)) {
            const int n = add_node(h.p, NodeKind::Crossing);
            curve_events_[h.a].push_back({h.sa, n});
            curve_events_[h.b].push_back({h.sb, n});
        }
        make_curve_edges();
        make_boundary_edges();
        make_faces();
        return std::move(out_);
    }

private:
    int add_node(const Vec2& p, NodeKind kind, int vertex = -1, int loop = -1) {
        int best = -1;
        double bd = tol_;
        for (size_t i = 0; i < out_.nodes.size(); ++i) {
            const double d = distance(out_.nodes[i].p, p);
            if (d < bd) {
                bd = d;
                best = static_cast<int>(i);
            }
        }
        if (best >= 0) {
            auto& n = out_.nodes[best];
            if (priority(kind) < priority(n.kind)) {
                n.kind = kind;
                n.p = p;
                n.vertex = vertex;
            }
            if (loop >= 0) n.loop = loop;
            return best;
        }
        out_.nodes.push_back({p, kind, vertex, loop});
        return static_cast<int>(out_.nodes.size()) - 1;
    }

    void add_boundary_event(int loop, double param, int node) { loop_events_[loop].push_back({param, node}); }

    int vertex_index_in_loop(int v) const {
        const auto& vs = m_.boundary_loops()[m_.boundary_loop_of(v)].vertices;
        return static_cast<int>(std::find(vs.begin(), vs.end(), v) - vs.begin());
    }

    void add_fixed_nodes() {
        for (const auto& s : pattern_.singularities) {
            const int loop = m_.boundary_loop_of(s.vertex);
            const int n = add_node(m_.vertex(s.vertex), s.boundary ? NodeKind::BoundarySingularity
                                                                  : NodeKind::Singularity,
                                   s.vertex, loop);
            if (loop >= 0) add_boundary_event(loop, vertex_index_in_loop(s.vertex), n);
        }
        const auto turning = turning_angles(m_);
        for (size_t l = 0; l < m_.boundary_loops().size(); ++l) {
            const auto& vs = m_.boundary_loops()[l].vertices;
            for (size_t i = 0; i < vs.size(); ++i) {
                if (corner_quarters(turning[vs[i]]) == 0 || pattern_.find(vs[i])) continue;
                const int n = add_node(m_.vertex(vs[i]), NodeKind::Corner, vs[i], static_cast<int>(l));
                add_boundary_event(static_cast<int>(l), static_cast<double>(i), n);
            }
        }
    }

    int singular_node(int vertex) const {
        for (size_t i = 0; i < out_.nodes.size(); ++i)
            if (out_.nodes[i].vertex == vertex && out_.nodes[i].singular()) return static_cast<int>(i);
        return -1;
    }

    int resolve_end(int c, bool start) {
        const auto& cv = out_.curves[c];
        const Vec2 p = start ? cv.points.front() : cv.points.back();
        if (start && cv.origin >= 0) {
            const int n = singular_node(cv.origin);
            if (n >= 0) return n;
        }
        if (!start && cv.end == Termination::Singularity) {
            const int n = singular_node(cv.end_singularity);
            if (n >= 0) return n;
        }
        for (size_t i = 0; i < out_.nodes.size(); ++i)
            if (out_.nodes[i].singular() && distance(out_.nodes[i].p, p) < tol_) return static_cast<int>(i);
        const auto bp = project_to_boundary(m_, p);
        if (bp.dist < tol_) {
            // snap to a corner or boundary vertex node already there
            const int n = add_node(bp.p, NodeKind::BoundaryHit, -1, bp.loop);
            if (out_.nodes[n].kind == NodeKind::BoundaryHit) add_boundary_event(bp.loop, bp.param, n);
            return n;
        }
        // end lying on another curve
        int host = -1;
        double host_s = 0.0, best = tol_;
        for (size_t o = 0; o < out_.curves.size(); ++o) {
            const auto& pts = out_.curves[o].points;
            // a curve may end on itself, away from the end being resolved
            std::vector<double> cum;
            const double len = cumulative(pts, cum);
            double s = 0.0;
            for (size_t i = 0; i + 1 < pts.size(); ++i) {
                if (static_cast<int>(o) == c) {
                    const double from_end = start ? cum[i] : len - cum[i + 1];
                    if (from_end < 4.0 * tol_) {
                        s += distance(pts[i], pts[i + 1]);
                        continue;
                    }
                }
                const Vec2 q = closest_point_on_segment(p, pts[i], pts[i + 1]);
                const double d = distance(p, q);
                if (d < best) {
                    best = d;
                    host = static_cast<int>(o);
                    host_s = s + distance(pts[i], q);
                }
                s += distance(pts[i], pts[i + 1]);
            }
        }
        if (host < 0)
            throw Error(ErrorKind::Layout, "curve " + std::to_string(c) + " has a dangling " +
                                               (start ? "start" : "end") + " (" + to_string(cv.end) + ")");
        const int n = add_node(p, NodeKind::Crossing);
        curve_events_[host].push_back({host_s, n});
        return n;
    }

    void add_endpoints(int c) {
        const auto& cv = out_.curves[c];
        if (cv.points.size() < 2) throw Error(ErrorKind::Layout, "degenerate curve " + std::to_string(c));
        std::vector<double> cum;
        const double len = cumulative(cv.points, cum);
        curve_events_[c].push_back({0.0, resolve_end(c, true)});
        curve_events_[c].push_back({len, resolve_end(c, false)});
    }

    void make_curve_edges() {
        for (size_t c = 0; c < out_.curves.size(); ++c) {
            auto ev = curve_events_[c];
            std::sort(ev.begin(), ev.end());
            std::vector<double> cum;
            cumulative(out_.curves[c].points, cum);
            size_t i = 0;
            while (i + 1 < ev.size()) {
                size_t j = i + 1;
                while (j < ev.size() && ev[j].second == ev[i].second) ++j;
                if (j == ev.size()) break;
                LayoutEdge e;
                e.a = ev[i].second;
                e.b = ev[j].second;
                e.curve = static_cast<int>(c);
                e.poly = slice(out_.curves[c].points, cum, ev[i].first, ev[j].first);
                e.poly.front() = out_.nodes[e.a].p;
                e.poly.back() = out_.nodes[e.b].p;
                if (e.a != e.b) out_.edges.push_back(std::move(e));
                i = j;
            }
        }
    }

    void make_boundary_edges() {
        const auto& loops = m_.boundary_loops();
        for (size_t l = 0; l < loops.size(); ++l) {
            auto ev = loop_events_[l];
            const auto& vs = loops[l].vertices;
            const double n = static_cast<double>(vs.size());
            if (ev.empty()) {
                const int node = add_node(m_.vertex(vs[0]), NodeKind::Free, vs[0], static_cast<int>(l));
                ev.push_back({0.0, node});
            }
            std::sort(ev.begin(), ev.end());
            ev.erase(std::unique(ev.begin(), ev.end(),
                                 [](const auto& x, const auto& y) { return x.second == y.second; }),
                     ev.end());
            for (size_t k = 0; k < ev.size(); ++k) {
                const auto [p0, a] = ev[k];
                auto [p1, b] = ev[(k + 1) % ev.size()];
                if (k + 1 == ev.size()) p1 += n;
                LayoutEdge e;
                e.a = a;
                e.b = b;
                e.loop = static_cast<int>(l);
                e.poly.push_back(out_.nodes[a].p);
                for (int i = static_cast<int>(std::floor(p0)) + 1; i < p1; ++i)
                    e.poly.push_back(m_.vertex(vs[static_cast<size_t>(i) % vs.size()]));
                e.poly.push_back(out_.nodes[b].p);
                out_.edges.push_back(std::move(e));
            }
        }
    }

    // Direction leaving the start node of half-edge h.
    Vec2 departure(int h) const {
        const auto& e = out_.edges[h / 2];
        const bool fwd = h % 2 == 0;
        const int n = static_cast<int>(e.poly.size());
        const Vec2 o = fwd ? e.poly.front() : e.poly.back();
        const double want = std::min(tol_, 0.3 * e.length());
        Vec2 last = o;
        for (int k = 1; k < n; ++k) {
            last = e.poly[fwd ? k : n - 1 - k];
            if (distance(last, o) >= want) break;
        }
        return normalized(last - o);
    }

    int tail(int h) const { return h % 2 == 0 ? out_.edges[h / 2].a : out_.edges[h / 2].b; }
    int head(int h) const { return h % 2 == 0 ? out_.edges[h / 2].b : out_.edges[h / 2].a; }

    void make_faces() {
        const int nh = 2 * static_cast<int>(out_.edges.size());
        std::vector<std::vector<std::pair<double, int>>> around(out_.nodes.size());
        std::vector<Vec2> dir(nh);
        for (int h = 0; h < nh; ++h) {
            dir[h] = departure(h);
            around[tail(h)].push_back({angle_of(dir[h]), h});
        }
        std::vector<int> pos(nh);
        for (auto& a : around) {
            std::sort(a.begin(), a.end());
            for (size_t i = 0; i < a.size(); ++i) pos[a[i].second] = static_cast<int>(i);
        }
        auto next = [&](int h) {
            const int twin = h ^ 1;
            const auto& a = around[head(h)];
            const int k = pos[twin];
            return a[(k + static_cast<int>(a.size()) - 1) % a.size()].second;
        };
        std::vector<char> used(nh, 0);
        for (int h0 = 0; h0 < nh; ++h0) {
            if (used[h0]) continue;
            std::vector<int> cycle;
            for (int h = h0; !used[h]; h = next(h)) {
                used[h] = 1;
                cycle.push_back(h);
            }
            bool exterior = false;
            for (int h : cycle)
                if (out_.edges[h / 2].loop >= 0 && h % 2 == 1) exterior = true;
            if (exterior) continue;
            LayoutPatch p;
            for (size_t i = 0; i < cycle.size(); ++i) {
                const int h = cycle[i];
                const int prev = cycle[(i + cycle.size() - 1) % cycle.size()];
                const int node = tail(h);
                p.edges.push_back(h / 2);
                p.forward.push_back(h % 2 == 0);
                p.nodes.push_back(node);
                double ang = angle_of(dir[prev ^ 1]) - angle_of(dir[h]);
                while (ang <= 1e-12) ang += kTwoPi;
                while (ang > kTwoPi) ang -= kTwoPi;
                p.angle.push_back(ang);
                const auto kind = out_.nodes[node].kind;
                bool corner = false;
                switch (kind) {
                    case NodeKind::Singularity:
                    case NodeKind::BoundarySingularity:
                    case NodeKind::Corner:
                    case NodeKind::BoundaryHit: corner = true; break;
                    case NodeKind::Crossing: corner = ang < deg(params_.corner_angle); break;
                    case NodeKind::Free: corner = false; break;
                }
                p.corner.push_back(corner);
            }
            const auto poly = p.polygon(out_.edges);
            double area = 0.0;
            for (size_t i = 0; i < poly.size(); ++i) area += cross(poly[i], poly[(i + 1) % poly.size()]);
            if (area <= 0.0)
                throw Error(ErrorKind::Layout, "a face of the separatrix arrangement is not a disk "
                                               "(an inner boundary loop is not reached by any separatrix)");
            out_.patches.push_back(std::move(p));
        }
    }

    const TriMesh& m_;
    const SingularityPattern& pattern_;
    LayoutParams params_;
    double tol_ = 0.0;
    QuadLayout out_;
    std::vector<std::vector<std::pair<double, int>>> curve_events_;
    std::vector<std::vector<std::pair<double, int>>> loop_events_;
};

}  // namespace

QuadLayout build_partitions(const TriMesh& mesh, const SingularityPattern& pattern, std::vector<Separatrix> curves,
                            const LayoutParams& params) {
    return Builder(mesh, pattern, params).run(std::move(curves));
}

}  // namespace quadforge

namespace quadforge {

nlohmann::json to_json(const QuadLayout& layout) {
    using nlohmann::json;
    auto pts = [](const std::vector<Vec2>& v) {
        json a = json::array();
        for (const auto& p : v) a.push_back({p.x, p.y});
        return a;
    };
    json nodes = json::array();
    for (size_t i = 0; i < layout.nodes.size(); ++i) {
        const auto& n = layout.nodes[i];
        nodes.push_back({{"id", i}, {"x", n.p.x}, {"y", n.p.y}, {"kind", to_string(n.kind)},
                         {"vertex", n.vertex}, {"boundary", n.boundary()}});
    }
    json edges = json::array();
    for (size_t i = 0; i < layout.edges.size(); ++i) {
        const auto& e = layout.edges[i];
        edges.push_back({{"id", i}, {"a", e.a}, {"b", e.b}, {"curve", e.curve}, {"boundary", e.loop >= 0},
                         {"points", pts(e.poly)}});
    }
    json patches = json::array();
    const auto adjacency = [&](size_t self) {
        std::vector<int> out;
        for (int e : layout.patches[self].edges)
            for (size_t o = 0; o < layout.patches.size(); ++o)
                if (o != self && std::count(layout.patches[o].edges.begin(), layout.patches[o].edges.end(), e))
                    out.push_back(static_cast<int>(o));
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    };
    for (size_t i = 0; i < layout.patches.size(); ++i) {
        const auto& p = layout.patches[i];
        json corners = json::array();
        for (size_t k = 0; k < p.nodes.size(); ++k)
            if (p.corner[k]) corners.push_back(p.nodes[k]);
        std::vector<int> fwd(p.forward.begin(), p.forward.end());
        patches.push_back({{"id", i}, {"nodes", p.nodes}, {"edges", p.edges}, {"forward", fwd},
                           {"corners", corners}, {"sides", p.num_corners()}, {"neighbors", adjacency(i)}});
    }
    json curves = json::array();
    for (const auto& c : layout.curves)
        curves.push_back({{"origin", c.origin}, {"end", to_string(c.end)}, {"points", pts(c.points)}});
    return {{"nodes", nodes},         {"edges", edges},
            {"patches", patches},     {"curves", curves},
            {"tjunctions", layout.tjunctions()}, {"all_quads", layout.all_quads()}};
}

void draw_layout(SvgCanvas& svg, const QuadLayout& layout) {
    static const char* fills[] = {"#e8f0ff", "#fff1e0", "#e9f7e9", "#f7e9f5", "#fdfbe0", "#e6f6f8"};
    for (size_t i = 0; i < layout.patches.size(); ++i) {
        const auto poly = layout.patches[i].polygon(layout.edges);
        svg.polygon(poly, layout.patches[i].num_corners() == 4 ? fills[i % 6] : "#ff9a9a");
    }
    for (const auto& e : layout.edges) svg.polyline(e.poly, e.loop >= 0 ? "#000000" : "#1a3fb0", e.loop >= 0 ? 1.5 : 1.2);
    const auto ts = layout.tjunctions();
    for (size_t i = 0; i < layout.nodes.size(); ++i) {
        const auto& n = layout.nodes[i];
        const bool t = std::count(ts.begin(), ts.end(), static_cast<int>(i)) > 0;
        if (t) svg.circle(n.p, 4.0, "#d00000");
        else if (n.singular()) svg.circle(n.p, 3.5, "#202020");
        else svg.circle(n.p, 1.8, "#555555");
    }
}

}  // namespace quadforge
