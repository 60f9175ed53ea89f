#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "quadforge/error.hpp"
#include "quadforge/layout.hpp"
#include "quadforge/quadmesh.hpp"

using namespace quadforge;

namespace {

struct Meshed {
    std::unique_ptr<qtest::Solved> solved;
    QuadLayout layout;
    std::vector<PartitionParam> params;
    EdgeDivisions div;
    QuadMesh quads;

    const TriMesh& mesh() const { return solved->spokes.mesh; }
};

SingularityPattern empty_pattern(const TriMesh& m) {
    SingularityPattern p;
    p.chi = m.euler_characteristic();
    return p;
}

std::unique_ptr<Meshed> mesh_fixture(const TriMesh& m, const SingularityPattern& p, double target) {
    auto r = std::make_unique<Meshed>();
    r->solved = qtest::solve_fields(m, p);
    const auto& rm = r->solved->spokes.mesh;
    const auto& rp = r->solved->spokes.pattern;
    const auto& f = *r->solved->field;
    const auto raw = trace_separatrices(f, rp, r->solved->spokes.disks);
    const auto sites = launch_sites(rm, rp);
    auto curves = dedup(raw, sites, captures_from(sites, r->solved->spokes.disks, rm));
    detect_and_cut_limit_cycles(curves, rm);
    r->layout = build_partitions(rm, rp, curves);
    fix_tjunctions(r->layout, rm, rp, &f);
    for (int i = 0; i < static_cast<int>(r->layout.patches.size()); ++i)
        r->params.push_back(solve_UV(extract_partition(r->layout, i, rm), f, r->layout, i));
    r->div = discretize_edges(r->layout, f, target);
    r->quads = tfi_and_map(r->layout, r->params, r->div, f);
    return r;
}

std::unique_ptr<Meshed> pair_fixture(int n = 24) {
    const TriMesh m = make_square(n);
    return mesh_fixture(m, qtest::make_pattern(m, {{{0.4, 0.5}, 3}, {{0.6, 0.5}, 5}}), 0.05);
}

std::unique_ptr<Meshed> smd_fixture() {
    const TriMesh m = make_square_minus_disk(24, 6);
    return mesh_fixture(
        m, qtest::make_pattern(m, {{{0.15, 0.15}, 5}, {{0.85, 0.15}, 5}, {{0.85, 0.85}, 5}, {{0.15, 0.85}, 5}}), 0.05);
}

}  // namespace

TEST_CASE("single square patch: whole mesh, U = x and V = y up to constants") {
    const TriMesh m = make_square(12);
    const auto r = mesh_fixture(m, empty_pattern(m), 0.25);
    const auto& p = r->params.at(0);
    CHECK(p.sub.triangles.size() == static_cast<size_t>(r->mesh().num_triangles()));
    const Vec2 x0 = p.sub.points[0];
    double err = 0.0;
    for (size_t v = 0; v < p.sub.points.size(); ++v) {
        const Vec2 d = p.uv(static_cast<int>(v)) - p.uv(0) - (p.sub.points[v] - x0);
        err = std::max(err, norm(d));
    }
    CHECK(err < 1e-10);
    CHECK(p.min_jacobian == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(p.max_circulation < 1e-12);
    // corners land on the UV bounding rectangle
    BBox box;
    for (size_t v = 0; v < p.sub.points.size(); ++v) box.expand(p.uv(static_cast<int>(v)));
    for (const auto& c : p.corner_uv) {
        const bool on_x = std::abs(c.x - box.lo.x) < 1e-9 || std::abs(c.x - box.hi.x) < 1e-9;
        const bool on_y = std::abs(c.y - box.lo.y) < 1e-9 || std::abs(c.y - box.hi.y) < 1e-9;
        CHECK((on_x && on_y));
    }
}

TEST_CASE("two patches split by one curve overlap exactly along its corridor") {
    const TriMesh m = make_square(24);
    const auto p = empty_pattern(m);
    const auto L = build_partitions(m, p, {qtest::segment_curve({0.51, 0.0}, {0.51, 1.0}, Termination::Boundary)});
    REQUIRE(L.patches.size() == 2);
    const auto a = extract_partition(L, 0, m), b = extract_partition(L, 1, m);
    std::set<int> both;
    std::set_intersection(a.triangles.begin(), a.triangles.end(), b.triangles.begin(), b.triangles.end(),
                          std::inserter(both, both.begin()));
    std::set<int> corridor;
    for (int t = 0; t < m.num_triangles(); ++t) {
        bool lo = false, hi = false;
        for (int v : m.triangle(t)) (m.vertex(v).x < 0.51 ? lo : hi) = true;
        if (lo && hi) corridor.insert(t);
    }
    CHECK(both == corridor);
    CHECK(a.triangles.size() + b.triangles.size() == static_cast<size_t>(m.num_triangles()) + corridor.size());
}

TEST_CASE("valence-8 submeshes cover the domain") {
    const TriMesh m = make_square(24);
    const auto r = mesh_fixture(m, qtest::valence8_pattern(m), 0.05);
    REQUIRE(r->params.size() == 8);
    std::set<int> all;
    for (const auto& p : r->params) all.insert(p.sub.triangles.begin(), p.sub.triangles.end());
    CHECK(all.size() == static_cast<size_t>(r->mesh().num_triangles()));
}

TEST_CASE("a patch containing a singularity fails to lift") {
    const TriMesh m = make_square(24);
    const auto s = qtest::solve_fields(m, qtest::make_pattern(m, {{{0.4, 0.5}, 3}, {{0.6, 0.5}, 5}}));
    const auto L = build_partitions(s->spokes.mesh, empty_pattern(s->spokes.mesh), {});
    const auto sub = extract_partition(L, 0, s->spokes.mesh);
    try {
        solve_UV(sub, *s->field, L, 0);
        FAIL("expected a lifting failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parameterization);
        CHECK(std::string(e.what()).find("lifting") != std::string::npos);
    }
}

TEST_CASE("UV maps are bijective and continuous on every fixture") {
    std::vector<std::unique_ptr<Meshed>> all;
    {
        const TriMesh m = make_square(24);
        all.push_back(mesh_fixture(m, qtest::valence8_pattern(m), 0.05));
    }
    all.push_back(pair_fixture());
    {
        const TriMesh m = make_annulus(96, 12);
        all.push_back(mesh_fixture(m, qtest::annulus_pattern(m, 0), 0.05));
    }
    all.push_back(smd_fixture());
    for (const auto& r : all) {
        for (const auto& p : r->params) {
            CHECK(p.min_jacobian > 0.0);
            // U and V are P1: the value at a shared edge's midpoint agrees from both sides
            std::map<std::pair<int, int>, Vec2> mid;
            double jump = 0.0;
            for (const auto& t : p.sub.local)
                for (int k = 0; k < 3; ++k) {
                    const int a = std::min(t[k], t[(k + 1) % 3]), b = std::max(t[k], t[(k + 1) % 3]);
                    const Vec2 uv = (p.uv(a) + p.uv(b)) * 0.5;
                    const auto [it, fresh] = mid.emplace(std::make_pair(a, b), uv);
                    if (!fresh) jump = std::max(jump, norm(it->second - uv));
                }
            CHECK(jump < 1e-9);
        }
    }
}

TEST_CASE("circulation of the scaled cross field shrinks under refinement") {
    double prev = 0.0;
    for (int n : {12, 24, 48}) {
        const auto r = pair_fixture(n);
        double sum = 0.0;
        int count = 0;
        for (const auto& p : r->params)
            for (double c : circulation(p, r->mesh())) {
                sum += std::abs(c);
                ++count;
            }
        const double mean = sum / count;
        MESSAGE("n=" << n << " mean circulation " << mean);
        if (prev > 0.0) CHECK(mean < prev / 4.0);
        prev = mean;
    }
}

TEST_CASE("unit square at target 0.25 is a 4x4 grid of perfect quads") {
    const TriMesh m = make_square(12);
    const auto r = mesh_fixture(m, empty_pattern(m), 0.25);
    for (int c : r->div.count) CHECK(c == 4);
    CHECK(r->quads.quads.size() == 16);
    CHECK(r->quads.vertices.size() == 25);
    const auto q = quality(r->quads);
    CHECK(q.mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q.worst == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q.tau == 100.0);
}

TEST_CASE("opposite sides agree and elements follow the size map") {
    const auto r = pair_fixture();
    for (const auto& P : r->layout.patches) {
        const auto s = P.sides();
        CHECK(r->div.count[P.edges[s[0][0]]] == r->div.count[P.edges[s[2][0]]]);
        CHECK(r->div.count[P.edges[s[1][0]]] == r->div.count[P.edges[s[3][0]]]);
    }
    const auto& q = r->quads;
    auto local_size = [&](Vec2 c) {
        double sum = 0.0;
        int n = 0;
        for (const auto& quad : q.quads)
            for (int k = 0; k < 4; ++k) {
                const Vec2 a = q.vertices[quad[k]], b = q.vertices[quad[(k + 1) % 4]];
                if (distance((a + b) * 0.5, c) < 0.12) {
                    sum += distance(a, b);
                    ++n;
                }
            }
        return sum / n;
    };
    const double near3 = local_size({0.4, 0.5}), near5 = local_size({0.6, 0.5});
    MESSAGE("mean edge near valence 3: " << near3 << ", near valence 5: " << near5);
    CHECK(near3 < near5);
}

TEST_CASE("patches are welded by shared node ids") {
    const auto r = smd_fixture();
    const auto& q = r->quads;
    CHECK(q.conforming());
    CHECK(q.min_signed_area() > 0.0);
    CHECK(q.min_corner_area() > 0.0);
    std::set<std::pair<double, double>> seen;
    for (const auto& v : q.vertices) CHECK(seen.insert({v.x, v.y}).second);
    // each layout edge shared by two patches uses one node sequence
    for (size_t e = 0; e < r->layout.edges.size(); ++e) {
        std::vector<int> users;
        for (size_t p = 0; p < r->layout.patches.size(); ++p)
            for (int x : r->layout.patches[p].edges)
                if (x == static_cast<int>(e)) users.push_back(static_cast<int>(p));
        if (users.size() != 2) continue;
        std::set<int> ids[2];
        for (size_t k = 0; k < q.quads.size(); ++k)
            for (int u = 0; u < 2; ++u)
                if (q.patch[k] == users[u]) ids[u].insert(q.quads[k].begin(), q.quads[k].end());
        std::vector<int> shared;
        std::set_intersection(ids[0].begin(), ids[0].end(), ids[1].begin(), ids[1].end(), std::back_inserter(shared));
        CHECK(static_cast<int>(shared.size()) >= r->div.count[e] + 1);
    }
}

TEST_CASE("irregular vertices are the singularities with quad count equal to valence") {
    for (const auto& r : {pair_fixture(), smd_fixture()}) {
        const auto& q = r->quads;
        const auto& pat = r->solved->spokes.pattern;
        const auto irr = q.irregular();
        int interior = 0;
        for (const auto& s : pat.singularities) {
            if (s.boundary) continue;
            ++interior;
            int found = 0;
            for (int v : irr)
                if (distance(q.vertices[v], s.position) < 1e-9) {
                    ++found;
                    CHECK(q.valence[v] == s.valence);
                }
            CHECK(found == 1);
        }
        CHECK(static_cast<int>(irr.size()) == interior);
    }
}

TEST_CASE("quad quality metric") {
    CHECK(quad_quality({0, 0}, {1, 0}, {1, 1}, {0, 1}) == doctest::Approx(1.0));
    CHECK(quad_quality({0, 0}, {1, 0}, {1, 1}, {1, 1}) == 0.0);
    CHECK(quad_quality({0, 0}, {1, 0}, {1, 1}, {1.5, 0.5}) == 0.0);
    const std::array<Vec2, 4> p{Vec2{0, 0}, Vec2{1.2, 0.1}, Vec2{1.0, 0.9}, Vec2{-0.1, 0.7}};
    const double base = quad_quality(p[0], p[1], p[2], p[3]);
    CHECK(base > 0.0);
    CHECK(base < 1.0);
    const double c = std::cos(0.7), s = std::sin(0.7);
    auto move = [&](Vec2 v) { return Vec2{c * v.x - s * v.y, s * v.x + c * v.y} * 3.5 + Vec2{2.0, -7.0}; };
    CHECK(quad_quality(move(p[0]), move(p[1]), move(p[2]), move(p[3])) == doctest::Approx(base).epsilon(1e-12));
    QuadMesh q;
    q.vertices = {p[0], p[1], p[2], p[3]};
    q.quads = {{0, 1, 2, 3}};
    const auto rep = quality(q);
    CHECK(rep.elements == 1);
    CHECK(rep.worst <= rep.mean);
    CHECK(to_json(rep).contains("eta_mean"));
    CHECK(quality_table(rep, 0.05).find("eta_bar") != std::string::npos);
}

TEST_CASE("square minus disk at 0.05 is a good all-quad mesh") {
    const auto r = smd_fixture();
    const auto q = quality(r->quads);
    MESSAGE("eta " << q.mean << " worst " << q.worst << " tau " << q.tau);
    CHECK(q.mean >= 0.9);
    CHECK(q.worst >= 0.5);
}

TEST_CASE("winslow smoothing keeps the mesh valid") {
    const auto r = pair_fixture();
    QuadMesh q = r->quads;
    const auto before = quality(q);
    smooth_winslow(q);
    const auto after = quality(q);
    CHECK(q.conforming());
    CHECK(q.min_signed_area() > 0.0);
    CHECK(q.min_corner_area() > 0.0);
    CHECK(after.worst >= before.worst - 1e-12);
    for (size_t v = 0; v < q.vertices.size(); ++v)
        if (q.boundary[v]) CHECK(q.vertices[v] == r->quads.vertices[v]);
}

TEST_CASE("msh export round trip with a physical group per patch") {
    const auto r = smd_fixture();
    const auto data = msh_from_quads(r->quads);
    const auto path = (std::filesystem::temp_directory_path() / "quadforge_roundtrip.msh").string();
    write_msh(path, data);
    const auto back = quads_from_msh(read_msh(path));
    std::filesystem::remove(path);
    CHECK(back.quads == r->quads.quads);
    CHECK(back.patch == r->quads.patch);
    std::set<int> groups;
    for (const auto& e : data.elements) {
        CHECK(e.type == kMshQuad);
        groups.insert(e.physical);
    }
    CHECK(groups.size() == r->layout.patches.size());
    CHECK_THROWS_AS(msh_from_quads(QuadMesh{}), Error);
}

TEST_CASE("flat corners are not inverted, reflex corners are") {
    QuadMesh q;
    q.vertices = {{0, 0}, {1, 0}, {2, 0}, {1, 1}};
    q.quads = {{0, 1, 2, 3}};
    CHECK(q.min_signed_area() == doctest::Approx(1.0));
    CHECK(q.min_corner_area() == 0.0);
    q.vertices[1] = {1, 0.5};  // arrow head: positive area, reflex corner at 1
    CHECK(q.min_signed_area() == doctest::Approx(0.5));
    CHECK(q.min_corner_area() == doctest::Approx(-0.5));
}
