#include "quadforge/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "quadforge/error.hpp"

namespace quadforge {

const char* to_string(Termination t) {
    switch (t) {
        case Termination::None: return "none";
        case Termination::Boundary: return "boundary";
        case Termination::Singularity: return "singularity";
        case Termination::MaxSteps: return "max_steps";
        case Termination::Cut: return "cut";
    }
    return "?";
}

double Separatrix::length() const {
    double l = 0.0;
    for (size_t i = 1; i < points.size(); ++i) l += distance(points[i - 1], points[i]);
    return l;
}

double Separatrix::curvature() const {
    double k = 0.0;
    for (size_t i = 2; i < points.size(); ++i) {
        const Vec2 a = points[i - 1] - points[i - 2];
        const Vec2 b = points[i] - points[i - 1];
        if (norm2(a) == 0.0 || norm2(b) == 0.0) continue;
        k += std::abs(std::atan2(cross(a, b), dot(a, b)));
    }
    return k;
}

namespace {

double tri_size(const TriMesh& m, int t) {
    return std::sqrt(4.0 * m.triangle_area(t) / std::sqrt(3.0));
}

struct Branch {
    Vec2 dir;
    double jump = 0.0;
    int triangle = -1;
};

std::optional<Branch> nearest_branch(const CrossField& f, const Vec2& p, const Vec2& d) {
    const auto loc = f.mesh().locator().try_locate(p);
    if (!loc) return std::nullopt;
    const auto s = f.sample(loc->triangle, loc->bary);
    const double a = angle_of(d);
    const double k = std::round((a - s.theta) / kHalfPi);
    const double b = s.theta + k * kHalfPi;
    return Branch{from_angle(b), std::abs(principal_angle(a - b)), loc->triangle};
}

double theta_at(const CrossField& f, const Vec2& p, bool& ok) {
    const auto loc = f.mesh().locator().try_locate(p);
    ok = loc.has_value();
    if (!ok) return 0.0;
    return f.sample(loc->triangle, loc->bary).theta;
}

// First boundary edge crossed by [p, q]; returns the crossing point.
std::optional<Vec2> boundary_crossing(const TriMesh& m, const Vec2& p, const Vec2& q) {
    double best = 2.0;
    Vec2 hit;
    for (const auto& e : m.edges()) {
        if (!e.is_boundary()) continue;
        const Vec2& a = m.vertex(e.v[0]);
        const Vec2& b = m.vertex(e.v[1]);
        double s, t;
        if (!segment_intersection(p, q, a, b, s, t)) continue;
        if (s < -1e-12 || s > 1.0 + 1e-12 || t < -1e-12 || t > 1.0 + 1e-12) continue;
        if (s < best) {
            best = s;
            hit = a + (b - a) * std::clamp(t, 0.0, 1.0);
        }
    }
    if (best > 1.5) return std::nullopt;
    return hit;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    return distance(p, closest_point_on_segment(p, a, b));
}

}  // namespace

std::vector<Singularity> launch_sites(const TriMesh& mesh, const SingularityPattern& pattern) {
    std::vector<Singularity> out = pattern.singularities;
    const auto turning = turning_angles(mesh);
    for (const auto& loop : mesh.boundary_loops()) {
        for (int v : loop.vertices) {
            const int c = corner_quarters(turning[v]);
            if (c >= 0 || pattern.find(v)) continue;
            Singularity s;
            s.vertex = v;
            s.position = mesh.vertex(v);
            s.t = c;
            s.valence = valence_from_t(c, true);
            s.boundary = true;
            out.push_back(s);
        }
    }
    return out;
}

std::vector<Capture> captures_from(const std::vector<Singularity>& sites, const std::vector<SpokeDisk>& disks,
                                   const TriMesh& mesh) {
    std::vector<Capture> out;
    for (const auto& s : sites) {
        Capture c;
        c.vertex = s.vertex;
        c.p = mesh.vertex(s.vertex);
        c.radius = 2.0 * mesh.local_edge_length(s.vertex);
        for (const auto& d : disks)
            if (d.vertex == s.vertex) c.radius = d.radius;
        out.push_back(c);
    }
    return out;
}

std::vector<double> launch_angles(const CrossField& field, const Singularity& s, double r, int samples) {
    const TriMesh& m = field.mesh();
    const Vec2 c = m.vertex(s.vertex);
    double a0 = 0.0, span = kTwoPi, margin = 0.0;
    int expected = s.valence;
    bool cyclic = true;
    if (s.boundary) {
        const auto& loop = m.boundary_loops()[m.boundary_loop_of(s.vertex)].vertices;
        const auto it = std::find(loop.begin(), loop.end(), s.vertex);
        const size_t i = static_cast<size_t>(it - loop.begin());
        const Vec2 next = m.vertex(loop[(i + 1) % loop.size()]);
        const Vec2 prev = m.vertex(loop[(i + loop.size() - 1) % loop.size()]);
        a0 = angle_of(next - c);
        span = angle_of(prev - c) - a0;
        while (span <= 0.0) span += kTwoPi;
        margin = 0.5 * span / std::max(1, s.valence);
        expected = s.valence - 1;
        cyclic = false;
    }
    auto g = [&](double phi, bool& ok) {
        const double th = theta_at(field, c + from_angle(phi) * r, ok);
        return principal_angle(4.0 * (th - phi));
    };
    const int n = std::max(samples, 16);
    std::vector<double> phi(n + 1), val(n + 1);
    std::vector<char> ok(n + 1);
    auto fill = [&] {
        for (int i = 0; i <= n; ++i) {
            phi[i] = cyclic ? a0 + span * i / n : a0 + margin + (span - 2.0 * margin) * i / n;
            bool o;
            val[i] = g(phi[i], o);
            ok[i] = o;
        }
    };
    fill();
    if (cyclic) {
        // start where g is farthest from zero so no crossing straddles the seam
        int far = 0;
        for (int i = 0; i < n; ++i)
            if (ok[i] && std::abs(val[i]) > std::abs(val[far])) far = i;
        a0 += span * far / n;
        fill();
    }
    // Unwrap g and take, for every multiple of 2pi it passes, the middle of the
    // crossings; CR interpolation is discontinuous across edges, so g wiggles.
    std::vector<double> u(n + 1);
    u[0] = val[0];
    for (int i = 1; i <= n; ++i) u[i] = u[i - 1] + principal_angle(val[i] - val[i - 1]);
    std::map<long, std::pair<double, double>> levels;  // level -> first, last crossing
    for (int i = 0; i < n; ++i) {
        if (!ok[i] || !ok[i + 1]) continue;
        const double lo = std::min(u[i], u[i + 1]), hi = std::max(u[i], u[i + 1]);
        for (long j = static_cast<long>(std::ceil(lo / kTwoPi)); j * kTwoPi <= hi; ++j) {
            if (j * kTwoPi == u[i + 1] && i + 1 < n) continue;  // counted by the next interval
            const double w = hi > lo ? (j * kTwoPi - u[i]) / (u[i + 1] - u[i]) : 0.0;
            const double at = phi[i] + w * (phi[i + 1] - phi[i]);
            auto it = levels.find(j);
            if (it == levels.end()) levels[j] = {at, at};
            else it->second.second = at;
        }
    }
    std::vector<double> out;
    for (const auto& [j, fl] : levels) {
        // on a closed circle the level set is a cyclic interval; endpoints
        // never straddle the seam because g is continuous there after unwrapping
        out.push_back(principal_angle(0.5 * (fl.first + fl.second)));
    }
    std::sort(out.begin(), out.end());
    if (static_cast<int>(out.size()) != expected)
        throw Error(ErrorKind::UnderResolved, "singularity at vertex " + std::to_string(s.vertex) + " (valence " +
                                                  std::to_string(s.valence) + ") has " +
                                                  std::to_string(out.size()) + " separatrix directions, expected " +
                                                  std::to_string(expected));
    return out;
}

Separatrix trace_curve(const CrossField& field, Vec2 p, Vec2 dir, const std::vector<Capture>& captures,
                       const TraceParams& params, int origin) {
    const TriMesh& m = field.mesh();
    Separatrix c;
    c.origin = origin;
    c.points.push_back(p);
    const long max_steps =
        static_cast<long>(params.max_steps_factor * m.bbox_diagonal() / m.min_edge_length()) + 1;
    const Capture* own = nullptr;
    for (const auto& cap : captures)
        if (cap.vertex == origin) own = &cap;
    double travelled = 0.0;
    Vec2 d = normalized(dir);
    for (long step = 0; step < max_steps; ++step) {
        const auto b1 = nearest_branch(field, p, d);
        if (!b1) {
            c.end = Termination::Boundary;
            return c;
        }
        c.max_branch_jump = std::max(c.max_branch_jump, b1->jump);
        const double h = params.step_factor * tri_size(m, b1->triangle);
        const Vec2 k1 = b1->dir;
        Vec2 q = p + k1 * h;
        Vec2 k = k1;
        if (const auto b2 = nearest_branch(field, q, k1)) {
            k = normalized(k1 + b2->dir);
            q = p + k * h;
        }
        // singularity capture
        for (const auto& cap : captures) {
            if (&cap == own && travelled < 4.0 * cap.radius) continue;
            if (point_segment_distance(cap.p, p, q) >= cap.radius) continue;
            c.points.push_back(cap.p);
            c.end = Termination::Singularity;
            c.end_singularity = cap.vertex;
            return c;
        }
        if (!m.locator().try_locate(q)) {
            if (const auto hit = boundary_crossing(m, p, q)) c.points.push_back(*hit);
            c.end = Termination::Boundary;
            return c;
        }
        travelled += distance(p, q);
        p = q;
        d = k;
        c.points.push_back(p);
    }
    c.end = Termination::MaxSteps;
    return c;
}

std::vector<Separatrix> trace_separatrices(const CrossField& field, const SingularityPattern& pattern,
                                           const std::vector<SpokeDisk>& disks, const TraceParams& params) {
    const TriMesh& m = field.mesh();
    const auto sites = launch_sites(m, pattern);
    const auto caps = captures_from(sites, disks, m);
    std::vector<Separatrix> out;
    for (const auto& s : sites) {
        if (s.boundary && s.valence <= 1) continue;
        double r = 0.5 * m.local_edge_length(s.vertex);
        for (const auto& d : disks)
            if (d.vertex == s.vertex && d.inner_radius > 0.0) r = 1.5 * d.inner_radius;
        const auto angles = launch_angles(field, s, r, params.launch_samples);
        const Vec2 c = m.vertex(s.vertex);
        for (size_t i = 0; i < angles.size(); ++i) {
            auto sep = trace_curve(field, c + from_angle(angles[i]) * r, from_angle(angles[i]), caps, params,
                                   s.vertex);
            sep.points.insert(sep.points.begin(), c);
            sep.origin_branch = static_cast<int>(i);
            out.push_back(std::move(sep));
        }
    }
    return out;
}

double hausdorff(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    auto one_way = [](const std::vector<Vec2>& x, const std::vector<Vec2>& y) {
        double worst = 0.0;
        for (const auto& p : x) {
            double best = 1e300;
            if (y.size() == 1) best = distance(p, y[0]);
            for (size_t j = 1; j < y.size(); ++j) best = std::min(best, point_segment_distance(p, y[j - 1], y[j]));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_way(a, b), one_way(b, a));
}

std::vector<Separatrix> dedup(std::vector<Separatrix> seps, const std::vector<Singularity>& sites,
                              const std::vector<Capture>& captures) {
    auto radius_of = [&](int v) {
        for (const auto& c : captures)
            if (c.vertex == v) return c.radius;
        return 0.0;
    };
    auto site_of = [&](int v) -> const Singularity* {
        for (const auto& x : sites)
            if (x.vertex == v) return &x;
        return nullptr;
    };
    // Direction in which a curve leaves (or, reversed, reaches) vertex v, taken
    // where it crosses the capture circle.
    auto direction_at = [&](const Separatrix& c, int v, bool leaving) {
        const Singularity* s = site_of(v);
        const Vec2 o = s ? s->position : (leaving ? c.points.front() : c.points.back());
        const double r = radius_of(v);
        const int n = static_cast<int>(c.points.size());
        for (int k = 0; k < n; ++k) {
            const Vec2 p = c.points[leaving ? k : n - 1 - k];
            if (distance(p, o) >= r) return normalized(p - o);
        }
        return normalized((leaving ? c.points.back() : c.points.front()) - o);
    };
    // b runs backwards along a's launch direction at v: the same field line,
    // however far the two traces drifted apart in between.
    auto same_sector = [&](const Separatrix& a, const Separatrix& b, int v) {
        const Singularity* s = site_of(v);
        if (!s || s->valence <= 0) return false;
        const Vec2 da = direction_at(a, v, true), db = direction_at(b, v, false);
        return std::acos(std::clamp(dot(da, db), -1.0, 1.0)) < kPi / s->valence;
    };
    std::vector<char> drop(seps.size(), 0);
    for (size_t i = 0; i < seps.size(); ++i) {
        const auto& a = seps[i];
        if (drop[i] || a.end != Termination::Singularity) continue;
        for (size_t j = i + 1; j < seps.size(); ++j) {
            const auto& b = seps[j];
            if (drop[j] || b.end != Termination::Singularity) continue;
            if (a.origin != b.end_singularity || b.origin != a.end_singularity) continue;
            const double tol = 0.5 * std::max(radius_of(a.origin), radius_of(b.origin));
            if (hausdorff(a.points, b.points) >= tol && !(same_sector(a, b, a.origin) && same_sector(b, a, b.origin)))
                continue;
            if (a.curvature() <= b.curvature()) drop[j] = 1;
            else drop[i] = 1;
            break;
        }
    }
    std::vector<Separatrix> out;
    for (size_t i = 0; i < seps.size(); ++i)
        if (!drop[i]) out.push_back(std::move(seps[i]));

    for (const auto& s : sites) {
        int ends = 0;
        for (const auto& c : out) {
            if (c.origin == s.vertex) ++ends;
            if (c.end == Termination::Singularity && c.end_singularity == s.vertex) ++ends;
        }
        const int expected = s.boundary ? std::max(0, s.valence - 1) : s.valence;
        if (ends != expected)
            throw Error(ErrorKind::Layout, "singularity at vertex " + std::to_string(s.vertex) + " has " +
                                               std::to_string(ends) + " separatrix ends, expected " +
                                               std::to_string(expected));
    }
    return out;
}

std::vector<CurveHit> curve_intersections(const std::vector<Separatrix>& curves, double endpoint_tol) {
    struct Seg {
        int curve, index;
        double s0;  // arc length at segment start
    };
    std::vector<Seg> segs;
    BBox box;
    double total = 0.0;
    for (size_t c = 0; c < curves.size(); ++c) {
        const auto& pts = curves[c].points;
        double s = 0.0;
        for (size_t i = 0; i + 1 < pts.size(); ++i) {
            segs.push_back({static_cast<int>(c), static_cast<int>(i), s});
            const double l = distance(pts[i], pts[i + 1]);
            s += l;
            total += l;
            box.expand(pts[i]);
            box.expand(pts[i + 1]);
        }
    }
    if (segs.empty()) return {};
    const double w = std::max(box.hi.x - box.lo.x, 1e-12), hgt = std::max(box.hi.y - box.lo.y, 1e-12);
    const double cell = std::max({4.0 * total / static_cast<double>(segs.size()), w / 512.0, hgt / 512.0});
    const int nx = static_cast<int>(w / cell) + 1, ny = static_cast<int>(hgt / cell) + 1;
    std::vector<std::vector<int>> grid(static_cast<size_t>(nx) * ny);
    auto cx = [&](double x) { return std::clamp(static_cast<int>((x - box.lo.x) / cell), 0, nx - 1); };
    auto cy = [&](double y) { return std::clamp(static_cast<int>((y - box.lo.y) / cell), 0, ny - 1); };
    for (size_t k = 0; k < segs.size(); ++k) {
        const auto& pts = curves[segs[k].curve].points;
        const Vec2 a = pts[segs[k].index], b = pts[segs[k].index + 1];
        for (int i = cx(std::min(a.x, b.x)); i <= cx(std::max(a.x, b.x)); ++i)
            for (int j = cy(std::min(a.y, b.y)); j <= cy(std::max(a.y, b.y)); ++j)
                grid[static_cast<size_t>(j) * nx + i].push_back(static_cast<int>(k));
    }
    auto singular_end = [&](const Separatrix& c, const Vec2& p) {
        if (c.origin >= 0 && distance(p, c.points.front()) < endpoint_tol) return true;
        if (c.end == Termination::Singularity && distance(p, c.points.back()) < endpoint_tol) return true;
        return false;
    };
    std::set<std::pair<int, int>> seen;
    std::vector<CurveHit> hits;
    for (const auto& bucket : grid) {
        for (size_t x = 0; x < bucket.size(); ++x) {
            for (size_t y = x + 1; y < bucket.size(); ++y) {
                int k1 = bucket[x], k2 = bucket[y];
                if (segs[k1].curve == segs[k2].curve) continue;
                if (segs[k1].curve > segs[k2].curve) std::swap(k1, k2);
                if (!seen.insert({k1, k2}).second) continue;
                const auto& A = curves[segs[k1].curve];
                const auto& B = curves[segs[k2].curve];
                const Vec2 a0 = A.points[segs[k1].index], a1 = A.points[segs[k1].index + 1];
                const Vec2 b0 = B.points[segs[k2].index], b1 = B.points[segs[k2].index + 1];
                double s, t;
                if (!segment_intersection(a0, a1, b0, b1, s, t)) continue;
                const double e = 1e-12;
                if (s < -e || s > 1.0 + e || t < -e || t > 1.0 + e) continue;
                s = std::clamp(s, 0.0, 1.0);
                t = std::clamp(t, 0.0, 1.0);
                const Vec2 p = a0 + (a1 - a0) * s;
                if (singular_end(A, p) || singular_end(B, p)) continue;
                CurveHit h;
                h.a = segs[k1].curve;
                h.b = segs[k2].curve;
                h.sa = segs[k1].s0 + s * distance(a0, a1);
                h.sb = segs[k2].s0 + t * distance(b0, b1);
                h.p = p;
                const double cs = std::abs(dot(normalized(a1 - a0), normalized(b1 - b0)));
                h.angle = std::acos(std::min(1.0, cs));
                hits.push_back(h);
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [](const CurveHit& x, const CurveHit& y) {
        if (x.a != y.a) return x.a < y.a;
        if (x.b != y.b) return x.b < y.b;
        return x.sa < y.sa;
    });
    // a crossing through a shared polyline vertex is reported by both segments
    std::vector<CurveHit> out;
    for (const auto& h : hits) {
        if (!out.empty() && out.back().a == h.a && out.back().b == h.b && std::abs(out.back().sa - h.sa) < 1e-12 &&
            std::abs(out.back().sb - h.sb) < 1e-12)
            continue;
        out.push_back(h);
    }
    return out;
}

namespace {

bool orthogonal_arrival(const Separatrix& c, const TriMesh& m, double tol) {
    if (c.end != Termination::Boundary || c.points.size() < 2) return false;
    const Vec2 p = c.points.back();
    const Vec2 d = normalized(c.points.back() - c.points[c.points.size() - 2]);
    double best = 1e300;
    Vec2 tangent;
    for (const auto& e : m.edges()) {
        if (!e.is_boundary()) continue;
        const Vec2 a = m.vertex(e.v[0]), b = m.vertex(e.v[1]);
        const double dist = point_segment_distance(p, a, b);
        if (dist < best) {
            best = dist;
            tangent = normalized(b - a);
        }
    }
    return std::abs(dot(d, tangent)) <= std::sin(tol);
}

// Largest arc-length gap along curve `a` between consecutive crossings with `b`.
double max_gap(const std::vector<CurveHit>& hits, int a, int b) {
    std::vector<double> s;
    for (const auto& h : hits) {
        if (h.a == a && h.b == b) s.push_back(h.sa);
        if (h.a == b && h.b == a) s.push_back(h.sb);
    }
    std::sort(s.begin(), s.end());
    double g = 0.0;
    for (size_t i = 1; i < s.size(); ++i) g = std::max(g, s[i] - s[i - 1]);
    return g;
}

void truncate(Separatrix& c, double s_cut, const Vec2& p) {
    std::vector<Vec2> pts{c.points.front()};
    double s = 0.0;
    for (size_t i = 1; i < c.points.size(); ++i) {
        const double l = distance(c.points[i - 1], c.points[i]);
        if (s + l >= s_cut) break;
        pts.push_back(c.points[i]);
        s += l;
    }
    pts.push_back(p);
    c.points = std::move(pts);
}

}  // namespace

LimitCycleReport detect_and_cut_limit_cycles(std::vector<Separatrix>& curves, const TriMesh& m,
                                             const TraceParams& params) {
    const double tol = deg(params.orthogonal_tol);
    const double endpoint_tol = 1e-9 * m.bbox_diagonal();
    LimitCycleReport rep;
    const auto hits = curve_intersections(curves, endpoint_tol);
    const int n = static_cast<int>(curves.size());
    std::map<std::pair<int, int>, int> count;
    for (const auto& h : hits) {
        ++count[{h.a, h.b}];
        ++count[{h.b, h.a}];
    }
    for (int a = 0; a < n; ++a) {
        if (curves[a].end == Termination::Cut) continue;
        bool possible = curves[a].end == Termination::MaxSteps;
        bool gap_larger = false;
        for (int b = 0; b < n; ++b) {
            const auto it = count.find({a, b});
            if (it == count.end() || it->second < 2) continue;
            possible = true;
            if (max_gap(hits, a, b) > max_gap(hits, b, a) + 1e-12 * m.bbox_diagonal()) gap_larger = true;
        }
        if (!possible) continue;
        rep.possible.push_back(a);
        if (gap_larger || !orthogonal_arrival(curves[a], m, tol)) rep.authentic.push_back(a);
    }

    // Cut one curve at a time so that later cuts see truncated hosts.
    std::vector<int> pending = rep.authentic;
    while (!pending.empty()) {
        const auto now = curve_intersections(curves, endpoint_tol);
        int best_curve = -1, host = -1;
        double best_s = 1e300;
        Vec2 where;
        for (int a : pending) {
            for (const auto& h : now) {
                if (std::abs(kHalfPi - h.angle) > tol) continue;
                const bool mine = h.a == a || h.b == a;
                if (!mine) continue;
                const double s = h.a == a ? h.sa : h.sb;
                if (s <= 0.0 || s >= best_s) continue;
                best_s = s;
                best_curve = a;
                host = h.a == a ? h.b : h.a;
                where = h.p;
            }
        }
        if (best_curve < 0) break;  // nothing orthogonal to cut against
        truncate(curves[best_curve], best_s, where);
        curves[best_curve].end = Termination::Cut;
        curves[best_curve].host = host;
        curves[best_curve].end_singularity = -1;
        rep.records.push_back({where, best_curve, host});
        pending.erase(std::find(pending.begin(), pending.end(), best_curve));
    }
    return rep;
}

}  // namespace quadforge
