#include <doctest.h>

#include <random>

#include "quadforge/domains.hpp"
#include "quadforge/error.hpp"
#include "quadforge/pattern.hpp"
#include "quadforge/spokes.hpp"
#include "test_util.hpp"

using namespace quadforge;
using qtest::make_pattern;
using qtest::nearest_vertex;

TEST_CASE("validation arithmetic on the square") {
    const TriMesh m = make_square(10);
    SingularityPattern empty;
    empty.chi = 1;
    const auto ok = validate(empty, m);
    CHECK(ok.ok);
    CHECK(ok.balance == 4);
    CHECK(ok.source_mass == doctest::Approx(kTwoPi).epsilon(1e-12));
    CHECK(std::abs(ok.neumann_mass - kTwoPi) < 1e-9);

    const auto lone = validate(make_pattern(m, {{{0.5, 0.5}, 5}}), m);
    CHECK(!lone.ok);
    CHECK(lone.deficit == -1);
    CHECK(lone.deficit_string() == "-1/4");

    CHECK(validate(make_pattern(m, {{{0.3, 0.5}, 3}, {{0.7, 0.5}, 5}}), m).ok);
}

TEST_CASE("quarter strings") {
    CHECK(quarter_string(-1) == "-1/4");
    CHECK(quarter_string(2) == "1/2");
    CHECK(quarter_string(-4) == "-1");
    CHECK(quarter_string(0) == "0");
    CHECK(quarter_string(3) == "3/4");
}

TEST_CASE("edits") {
    const TriMesh m = make_square(10);
    SingularityPattern p;
    p.chi = 1;
    const int c = nearest_vertex(m, {0.5, 0.5});
    const int a = nearest_vertex(m, {0.3, 0.5});
    const int b = nearest_vertex(m, {0.7, 0.5});

    SUBCASE("valence 6 with two valence 3") {
        const auto q = apply_edits(p,
                                   {{PatternEdit::Kind::Add, c, -1, 6, true},
                                    {PatternEdit::Kind::Add, a, -1, 3, true},
                                    {PatternEdit::Kind::Add, b, -1, 3, false}},
                                   m);
        CHECK(q.singularities.size() == 3);
        CHECK(validate(q, m).ok);
    }
    SUBCASE("lone add is rejected atomically") {
        CHECK_THROWS_AS(apply_edit(p, {PatternEdit::Kind::Add, c, -1, 5, false}, m), Error);
        const auto staged = apply_edit(p, {PatternEdit::Kind::Add, c, -1, 5, true}, m);
        CHECK(!validate(staged, m).ok);
        CHECK_THROWS_AS(finalize(staged, m), Error);
    }
    SUBCASE("move to an adjacent vertex keeps the balance") {
        const auto q = apply_edits(p, {{PatternEdit::Kind::Add, a, -1, 3, true}, {PatternEdit::Kind::Add, b, -1, 5}}, m);
        const int to = m.vertex_neighbors(a)[0];
        const auto moved = apply_edit(q, {PatternEdit::Kind::Move, a, to, 0, false}, m);
        CHECK(moved.sum_t() == q.sum_t());
        CHECK(moved.find(to) != nullptr);
    }
    SUBCASE("off-mesh target") {
        CHECK_THROWS_AS(apply_edit(p, {PatternEdit::Kind::Add, 100000, -1, 5, true}, m), Error);
        CHECK_THROWS_AS(apply_edit(p, {PatternEdit::Kind::Add, c, -1, 9, true}, m), Error);
    }
}

TEST_CASE("edit then inverse restores the pattern") {
    const TriMesh m = make_square(12);
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> vert(0, m.num_vertices() - 1);
    std::uniform_int_distribution<int> val(3, 8);
    SingularityPattern p = make_pattern(m, {{{0.3, 0.3}, 3}, {{0.7, 0.7}, 5}});
    for (int i = 0; i < 200; ++i) {
        PatternEdit e;
        e.staged = true;
        const int kind = i % 4;
        if (kind == 0 || p.singularities.empty()) {
            e.kind = PatternEdit::Kind::Add;
            e.vertex = vert(rng);
            e.valence = val(rng);
            if (p.find(e.vertex) || m.is_boundary_vertex(e.vertex)) continue;
        } else {
            const auto& s = p.singularities[static_cast<size_t>(vert(rng)) % p.singularities.size()];
            e.vertex = s.vertex;
            if (kind == 1) e.kind = PatternEdit::Kind::Remove;
            if (kind == 2) {
                e.kind = PatternEdit::Kind::Move;
                e.to_vertex = vert(rng);
                if (p.find(e.to_vertex) || m.is_boundary_vertex(e.to_vertex) || s.boundary) continue;
            }
            if (kind == 3) {
                e.kind = PatternEdit::Kind::SetValence;
                e.valence = val(rng);
                if (s.boundary) continue;
            }
        }
        const auto q = apply_edit(p, e, m);
        const auto back = apply_edit(q, inverse_edit(p, e), m);
        CHECK(back == p);
        p = q;
    }
}

TEST_CASE("pattern json round trip") {
    const TriMesh m = make_square(8);
    const auto p = make_pattern(m, {{{0.25, 0.5}, 3}, {{0.75, 0.5}, 5}, {{0.5, 0.0}, 3}});
    const auto back = pattern_from_json(nlohmann::json::parse(to_json(p).dump()));
    CHECK(back == p);
    CHECK_THROWS_AS(pattern_from_json(nlohmann::json::parse(R"({"singularities": []})")), Error);
    CHECK_THROWS_AS(
        pattern_from_json(nlohmann::json::parse(R"({"chi":1,"singularities":[{"vertex":1,"t":1,"valence":5}]})")),
        Error);
}

TEST_CASE("valence 8 companions: exhaustive enumeration of boundary placements") {
    // Centre valence 8 plus four companions at the edge midpoints, all with the
    // same boundary valence: only valence 1 balances.
    const TriMesh m = make_square(8);
    const Vec2 mids[] = {{0.5, 0.0}, {1.0, 0.5}, {0.5, 1.0}, {0.0, 0.5}};
    int accepted = -1, count = 0;
    for (int bv = 1; bv <= 8; ++bv) {
        SingularityPattern p = make_pattern(m, {{{0.5, 0.5}, 8}});
        for (const Vec2& q : mids) p.singularities.push_back(make_singularity(m, nearest_vertex(m, q), bv));
        sort_pattern(p);
        if (validate(p, m).ok) accepted = bv, ++count;
    }
    CHECK(count == 1);
    CHECK(accepted == 1);
}

namespace {

bool on_original_boundary(const TriMesh& orig, const Vec2& p) {
    for (const auto& e : orig.edges()) {
        if (!e.is_boundary()) continue;
        const Vec2 q = closest_point_on_segment(p, orig.vertex(e.v[0]), orig.vertex(e.v[1]));
        if (distance(p, q) < 1e-12) return true;
    }
    return false;
}

void check_refined(const TriMesh& orig, const SpokeResult& r) {
    CHECK(r.mesh.euler_characteristic() == orig.euler_characteristic());
    CHECK(r.mesh.combinatorial_euler() == orig.euler_characteristic());
    for (int t = 0; t < r.mesh.num_triangles(); ++t) CHECK(r.mesh.triangle_area(t) > 0);
    for (int v = 0; v < r.mesh.num_vertices(); ++v)
        if (r.mesh.is_boundary_vertex(v)) CHECK(on_original_boundary(orig, r.mesh.vertex(v)));
    // Original boundary vertices survive with identical coordinates.
    for (int v = 0; v < orig.num_vertices(); ++v) {
        if (!orig.is_boundary_vertex(v)) continue;
        REQUIRE(r.vertex_map[v] >= 0);
        CHECK(r.mesh.vertex(r.vertex_map[v]) == orig.vertex(v));
    }
}

}  // namespace

TEST_CASE("spoke refinement") {
    const TriMesh m = make_square(12);
    SUBCASE("empty pattern leaves the mesh alone") {
        SingularityPattern p;
        const auto r = refine_spokes(m, p);
        CHECK(r.mesh.num_vertices() == m.num_vertices());
        CHECK(r.mesh.triangles() == m.triangles());
    }
    SUBCASE("valence 8") {
        const auto p = make_pattern(m, {{{0.5, 0.5}, 8}});
        const auto r = refine_spokes(m, p);
        check_refined(m, r);
        const int s = r.pattern.singularities[0].vertex;
        CHECK(r.mesh.vertex(s) == m.vertex(p.singularities[0].vertex));
        CHECK(r.mesh.vertex_neighbors(s).size() >= 16);
        CHECK(r.disks[0].spokes == 16);
        CHECK(r.disks[0].radius > 0);
    }
    SUBCASE("two nearby valence 5") {
        const auto p = make_pattern(m, {{{0.5, 0.5}, 5}, {{0.5 + 2.0 / 12, 0.5}, 5}});
        const auto r = refine_spokes(m, p);
        check_refined(m, r);
        const double d = distance(p.singularities[0].position, p.singularities[1].position);
        for (const auto& disk : r.disks) CHECK(disk.radius <= 0.5 * d + 1e-15);
    }
    SUBCASE("adjacent singularities are an error") {
        const auto p = make_pattern(m, {{{0.5, 0.5}, 5}, {{0.5 + 1.0 / 12, 0.5}, 3}});
        CHECK_THROWS_AS(refine_spokes(m, p), Error);
    }
    SUBCASE("boundary singularity") {
        const auto p = make_pattern(m, {{{0.5, 0.0}, 3}});
        const auto r = refine_spokes(m, p);
        check_refined(m, r);
        CHECK(r.pattern.singularities[0].boundary);
    }
    SUBCASE("hole domain") {
        const TriMesh h = make_square_minus_disk(24, 6);
        const auto p = make_pattern(h, {{{0.2, 0.2}, 5}, {{0.8, 0.2}, 5}, {{0.8, 0.8}, 5}, {{0.2, 0.8}, 5}});
        const auto r = refine_spokes(h, p);
        check_refined(h, r);
        for (const auto& s : r.pattern.singularities) CHECK(r.mesh.vertex_neighbors(s.vertex).size() == 10);
    }
}
