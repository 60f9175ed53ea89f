#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "fixtures.hpp"
#include "quadforge/conformal.hpp"
#include "quadforge/domains.hpp"
#include "quadforge/error.hpp"
#include "quadforge/fem.hpp"
#include "quadforge/spokes.hpp"

using namespace quadforge;
using qtest::make_pattern;
using qtest::nearest_vertex;

namespace {

struct Solved {
    SpokeResult refined;
    std::unique_ptr<CrossField> field;
};

Solved solve_all(const TriMesh& m, const SingularityPattern& p) {
    Solved s;
    s.refined = refine_spokes(m, p);
    const TriMesh& rm = s.refined.mesh;
    auto cut = build_branch_cut(rm, s.refined.pattern);
    auto h = solve_H(rm, s.refined.pattern);
    auto th = solve_theta(rm, h, cut);
    s.field = std::make_unique<CrossField>(rm, std::move(h), std::move(cut), std::move(th));
    return s;
}

// Triangles outside every spoke disk.
std::vector<char> outside_disks(const SpokeResult& r) {
    std::vector<char> keep(r.mesh.num_triangles(), 1);
    for (int t = 0; t < r.mesh.num_triangles(); ++t)
        for (const auto& d : r.disks)
            for (int v : r.mesh.triangle(t))
                if (distance(r.mesh.vertex(v), r.mesh.vertex(d.vertex)) < d.radius * 1.0001) keep[t] = 0;
    return keep;
}

// Cotangent-formula stiffness, assembled densely from corner angles.
Eigen::MatrixXd dense_cotan(const TriMesh& m) {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m.num_vertices(), m.num_vertices());
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& tr = m.triangle(t);
        for (int i = 0; i < 3; ++i) {
            const int a = tr[(i + 1) % 3], b = tr[(i + 2) % 3];
            const double w = 0.5 / std::tan(m.corner_angle(t, i));
            k(a, b) -= w;
            k(b, a) -= w;
            k(a, a) += w;
            k(b, b) += w;
        }
    }
    return k;
}

}  // namespace

TEST_CASE("square without singularities") {
    const TriMesh m = make_square(10);
    SingularityPattern p;
    p.chi = 1;
    const auto s = solve_all(m, p);
    const auto& f = *s.field;
    CHECK(f.cut().edges.empty());
    double spread = 0.0;
    for (double h : f.h().values) spread = std::max(spread, std::abs(h));
    CHECK(spread < 1e-9);
    for (double th : f.theta().values) CHECK(std::abs(th - f.theta().anchor_value) < 1e-9);
    const auto tg = check_tangency(f, deg(2));
    CHECK(tg.meshable);
    CHECK(tg.max_deviation < 1e-6);
    CHECK(redetect(f).singularities.empty());
    const auto c = f.cross({0.3, 0.6});
    CHECK(norm(c[0]) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(mod_distance(angle_of(c[0]), kHalfPi)) < 1e-9);
}

TEST_CASE("3-5 pair") {
    const TriMesh m = make_square(16);
    const auto p = make_pattern(m, {{{0.3125, 0.5}, 3}, {{0.6875, 0.5}, 5}});
    const auto s = solve_all(m, p);
    const auto& f = *s.field;
    const TriMesh& rm = s.refined.mesh;
    const int v3 = s.refined.vertex_map[p.singularities[0].valence == 3 ? p.singularities[0].vertex : p.singularities[1].vertex];
    const int v5 = s.refined.vertex_map[p.singularities[0].valence == 5 ? p.singularities[0].vertex : p.singularities[1].vertex];

    CHECK(f.cut().is_forest(rm));
    CHECK(f.cut().cut_open_euler(rm) == 1);
    // The cut touches both singular vertices.
    int touch3 = 0, touch5 = 0;
    for (int e : f.cut().edges) {
        touch3 += rm.edge(e).v[0] == v3 || rm.edge(e).v[1] == v3;
        touch5 += rm.edge(e).v[0] == v5 || rm.edge(e).v[1] == v5;
    }
    CHECK(touch3 >= 1);
    CHECK(touch5 >= 1);

    // Log-size: valence 3 sits in a well, valence 5 on a peak.
    CHECK(f.h().values[v3] < f.h().values[v5]);
    CHECK(f.h().values[v3] < 0);
    CHECK(f.h().values[v5] > 0);
    CHECK(std::exp(f.h().values[v5] - f.h().values[v3]) > 1.0);

    CHECK(std::abs(f.h().rhs_sum) < 1e-9);
    CHECK(f.conjugacy_residual(outside_disks(s.refined)) < 1e-8);
    for (int q : f.theta().jump_quarters) CHECK(std::abs(q) <= 4);
    CHECK(f.theta().max_jump_error < 1e-6);
    CHECK(redetect(f) == s.refined.pattern);
    CHECK(check_tangency(f, deg(2)).meshable);
}

TEST_CASE("H agrees with a dense cotangent solve") {
    const TriMesh m = make_square(6);
    const auto p = make_pattern(m, {{{1.0 / 3, 0.5}, 3}, {{2.0 / 3, 0.5}, 5}});
    const HField h = solve_H(m, p);
    const Eigen::MatrixXd k = dense_cotan(m);
    const int n = m.num_vertices();
    Eigen::VectorXd b(n);
    for (int v = 0; v < n; ++v) b[v] = h.rhs[v];
    // Pin the last vertex this time; the mean shift removes the difference.
    const Eigen::VectorXd x = k.topLeftCorner(n - 1, n - 1).fullPivLu().solve(b.head(n - 1));
    Eigen::VectorXd full(n);
    full << x, 0.0;
    const auto mass = lumped_mass(m);
    double mean = 0, tot = 0;
    for (int v = 0; v < n; ++v) mean += mass[v] * full[v], tot += mass[v];
    for (int v = 0; v < n; ++v) CHECK(h.values[v] == doctest::Approx(full[v] - mean / tot).epsilon(1e-9));
}

TEST_CASE("incompatible patterns are refused before solving") {
    const TriMesh m = make_square(8);
    const auto p = make_pattern(m, {{{0.5, 0.5}, 5}});
    try {
        solve_H(m, p);
        FAIL("expected rejection");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Incompatible);
    }
}

TEST_CASE("annulus cut and tangency") {
    const TriMesh m = make_annulus(96, 12);
    SUBCASE("good placement") {
        const auto s = solve_all(m, qtest::annulus_pattern(m, 0.0));
        const auto& f = *s.field;
        CHECK(f.cut().anchors.size() == 9);
        CHECK(f.cut().is_forest(s.refined.mesh));
        CHECK(f.cut().cut_open_euler(s.refined.mesh) == 1);
        // The inner loop is reached by the cut.
        bool inner = false;
        for (int e : f.cut().edges)
            for (int v : s.refined.mesh.edge(e).v) inner = inner || s.refined.mesh.boundary_loop_of(v) == 1;
        CHECK(inner);
        const auto tg = check_tangency(f, deg(2));
        CHECK(tg.meshable);
        CHECK(redetect(f) == s.refined.pattern);
    }
    SUBCASE("rotated placement") {
        const auto s = solve_all(m, qtest::annulus_pattern(m, 20.0));
        const auto tg = check_tangency(*s.field, deg(2));
        CHECK(!tg.meshable);
        CHECK(tg.max_deviation > deg(5));
        // Violations sit on the inner loop; the outer loop holds the anchor.
        for (const auto& v : tg.violations) CHECK(v.loop == 1);
    }
}

TEST_CASE("anchor choice shifts theta by a quarter-turn multiple") {
    const TriMesh m = make_disk(10);
    const auto p = make_pattern(m, {{{0.35, 0.5}, 3}, {{0.65, 0.5}, 3}, {{0.5, 0.3}, 3}, {{0.5, 0.7}, 3}});
    const auto r = refine_spokes(m, p);
    const auto cut = build_branch_cut(r.mesh, r.pattern);
    const auto h = solve_H(r.mesh, r.pattern);
    const auto a = solve_theta(r.mesh, h, cut);
    const int other = r.mesh.find_edge(r.mesh.boundary_loops()[0].vertices[7], r.mesh.boundary_loops()[0].vertices[8]);
    REQUIRE(other != a.anchor_edge);
    const auto b = solve_theta(r.mesh, h, cut, other);
    const double shift = b.values[0] - a.values[0];
    for (size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(b.values[i] - a.values[i] - shift) < 1e-8);
    CHECK(std::abs(mod_distance(shift, kHalfPi)) < 1e-8);
}

TEST_CASE("cross is continuous across the cut up to branch permutation") {
    const TriMesh m = make_square(16);
    const auto s = solve_all(m, make_pattern(m, {{{0.3125, 0.5}, 3}, {{0.6875, 0.5}, 5}}));
    const auto& f = *s.field;
    const TriMesh& rm = s.refined.mesh;
    REQUIRE(!f.cut().edges.empty());
    for (int e : f.cut().edges) {
        const auto& ed = rm.edge(e);
        const Vec2 mid = (rm.vertex(ed.v[0]) + rm.vertex(ed.v[1])) * 0.5;
        auto bary = [&](int t) {
            return rm.locator().barycentric(t, mid);
        };
        const auto s0 = f.sample(ed.tri[0], bary(ed.tri[0]));
        const auto s1 = f.sample(ed.tri[1], bary(ed.tri[1]));
        CHECK(std::abs(s0.H - s1.H) < 1e-12);
        CHECK(std::abs(mod_distance(s0.theta - s1.theta, kHalfPi)) < 1e-6);
        CHECK(std::abs(s0.theta - s1.theta) > 0.1);  // the cut is a real discontinuity
    }
}

TEST_CASE("randomized valid patterns are reproduced exactly") {
    std::mt19937 rng(2024);
    const TriMesh m = make_disk(14);
    std::uniform_real_distribution<double> ang(0, kTwoPi), rad(0.0, 0.38);
    for (int trial = 0; trial < 20; ++trial) {
        CAPTURE(trial);
        // Four valence 3 balance the disk; a 5, 6 or 8 adds matching valence-3 partners.
        std::vector<int> valences;
        const int extra = trial % 4;
        if (extra == 1) valences.push_back(5);
        if (extra == 2) valences.push_back(6);
        if (extra == 3) valences.push_back(8);
        const int need3 = 4 + (extra == 1 ? 1 : extra == 2 ? 2 : extra == 3 ? 4 : 0);
        valences.insert(valences.end(), need3, 3);
        SingularityPattern p;
        p.chi = 1;
        for (int val : valences) {
            for (int attempt = 0; attempt < 1000; ++attempt) {
                const int v = nearest_vertex(m, Vec2{0.5, 0.5} + from_angle(ang(rng)) * rad(rng));
                bool ok = !m.is_boundary_vertex(v);
                for (const auto& q : p.singularities)
                    ok = ok && distance(m.vertex(v), q.position) > 3.0 * m.mean_edge_length();
                if (!ok) continue;
                p.singularities.push_back(make_singularity(m, v, val));
                break;
            }
        }
        REQUIRE(p.singularities.size() == valences.size());
        sort_pattern(p);
        REQUIRE(validate(p, m).ok);
        const auto s = solve_all(m, p);
        CHECK(redetect(*s.field) == s.refined.pattern);
        CHECK(s.field->conjugacy_residual(outside_disks(s.refined)) < 1e-8);
    }
}
