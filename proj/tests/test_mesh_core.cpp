#include <doctest.h>

#include <random>

#include "quadforge/domains.hpp"
#include "quadforge/error.hpp"
#include "quadforge/msh_io.hpp"
#include "quadforge/tri_mesh.hpp"

using namespace quadforge;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected quadforge::Error");
    return ErrorKind::Io;
}

// Brute force: any triangle whose barycentrics are all >= -eps.
int scan_locate(const TriMesh& m, const Vec2& p, double eps) {
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& tr = m.triangle(t);
        const Vec2 a = m.vertex(tr[0]), b = m.vertex(tr[1]), c = m.vertex(tr[2]);
        const double area = orient2d(a, b, c);
        const double l0 = orient2d(p, b, c) / area;
        const double l1 = orient2d(a, p, c) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 >= -eps && l1 >= -eps && l2 >= -eps) return t;
    }
    return -1;
}

}  // namespace

TEST_CASE("two-triangle square") {
    const TriMesh m = TriMesh::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}});
    CHECK(m.num_vertices() == 4);
    CHECK(m.num_edges() == 5);
    CHECK(m.boundary_loops().size() == 1);
    CHECK(m.boundary_loops()[0].outer);
    CHECK(m.euler_characteristic() == 1);
    CHECK(m.combinatorial_euler() == 1);
    const auto turning = turning_angles(m);
    for (double a : turning) CHECK(a == doctest::Approx(kHalfPi).epsilon(1e-12));
    CHECK(corner_quarters(turning[0]) == 1);
}

TEST_CASE("clockwise triangles are reoriented and counted") {
    BuildReport rep;
    const TriMesh m = TriMesh::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 2, 1}, {0, 2, 3}}, &rep);
    CHECK(rep.reoriented == 1);
    for (int t = 0; t < m.num_triangles(); ++t) CHECK(m.triangle_area(t) > 0);
}

TEST_CASE("unused vertices are dropped") {
    BuildReport rep;
    const TriMesh m = TriMesh::build({{0, 0}, {5, 5}, {1, 0}, {0, 1}}, {{0, 2, 3}}, &rep);
    CHECK(rep.dropped_vertices == 1);
    CHECK(m.num_vertices() == 3);
}

TEST_CASE("turning angles sum to 2 pi per loop") {
    for (const TriMesh& m : {make_square(6), make_disk(5), make_annulus(24, 3), make_square_minus_disk(12, 3)}) {
        const auto turning = turning_angles(m);
        for (const auto& loop : m.boundary_loops()) {
            double s = 0;
            for (int v : loop.vertices) s += turning[v];
            CHECK(s == doctest::Approx(loop.outer ? kTwoPi : -kTwoPi).epsilon(1e-9));
        }
        for (int v = 0; v < m.num_vertices(); ++v)
            if (!m.is_boundary_vertex(v)) CHECK(turning[v] == 0.0);
    }
}

TEST_CASE("square corners and flat boundary vertices") {
    const TriMesh m = make_square(8);
    const auto turning = turning_angles(m);
    int corners = 0;
    for (int v = 0; v < m.num_vertices(); ++v) {
        if (!m.is_boundary_vertex(v)) continue;
        if (corner_quarters(turning[v]) == 1) {
            ++corners;
            CHECK(turning[v] == doctest::Approx(kHalfPi).epsilon(1e-9));
        } else {
            CHECK(std::abs(turning[v]) < 1e-9);
        }
    }
    CHECK(corners == 4);
}

TEST_CASE("square minus disk topology") {
    const TriMesh m = make_square_minus_disk(16, 4);
    CHECK(m.boundary_loops().size() == 2);
    CHECK(m.euler_characteristic() == 0);
    CHECK(m.combinatorial_euler() == 0);
    CHECK(m.boundary_loops()[0].outer);
    CHECK(!m.boundary_loops()[1].outer);
    CHECK(m.boundary_loops()[1].signed_area < 0);
    CHECK_THROWS_AS(make_square_minus_disk(15, 4), Error);
}

TEST_CASE("refinement keeps vertex ids and topology") {
    const TriMesh m = make_square(4);
    const TriMesh r = refine_uniform(m);
    CHECK(r.num_triangles() == 4 * m.num_triangles());
    CHECK(r.num_vertices() == m.num_vertices() + m.num_edges());
    for (int v = 0; v < m.num_vertices(); ++v) CHECK(r.vertex(v) == m.vertex(v));
    CHECK(r.combinatorial_euler() == 1);
}

TEST_CASE("point location agrees with exhaustive scan") {
    const TriMesh m = make_square_minus_disk(16, 5);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-0.05, 1.05);
    const double eps = m.locator().epsilon();
    int inside = 0;
    for (int i = 0; i < 1000; ++i) {
        const Vec2 p{u(rng), u(rng)};
        const int ref = scan_locate(m, p, 1e-12);
        const auto loc = m.locator().try_locate(p);
        if (ref < 0) {
            // Only snapping within eps of the boundary is allowed outside.
            if (loc) CHECK(loc->snapped);
            continue;
        }
        ++inside;
        REQUIRE(loc.has_value());
        const auto& tr = m.triangle(loc->triangle);
        Vec2 q{};
        for (int k = 0; k < 3; ++k) q += m.vertex(tr[k]) * loc->bary[k];
        CHECK(distance(p, q) < 10 * eps);
        for (double b : loc->bary) CHECK(b >= -1e-9);
    }
    CHECK(inside > 500);
}

TEST_CASE("locate centroids and vertices") {
    const TriMesh m = make_disk(4);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto loc = m.locate(m.triangle_centroid(t));
        CHECK(loc.triangle == t);
    }
    for (int v = 0; v < m.num_vertices(); ++v) {
        const auto loc = m.locate(m.vertex(v));
        const auto& tr = m.triangle(loc.triangle);
        CHECK((tr[0] == v || tr[1] == v || tr[2] == v));
    }
    CHECK(kind_of([&] { m.locate({5.0, 5.0}); }) == ErrorKind::OutsideMesh);
}

TEST_CASE("msh round trip is exact") {
    const TriMesh m = make_annulus(20, 3);
    const std::string text = format_msh(msh_from_mesh(m));
    const TriMesh back = mesh_from_msh(parse_msh(text));
    REQUIRE(back.num_vertices() == m.num_vertices());
    REQUIRE(back.num_triangles() == m.num_triangles());
    for (int v = 0; v < m.num_vertices(); ++v) CHECK(back.vertex(v) == m.vertex(v));
    for (int t = 0; t < m.num_triangles(); ++t) CHECK(back.triangle(t) == m.triangle(t));
    CHECK(format_msh(msh_from_mesh(back)) == text);
}

TEST_CASE("invalid inputs fail with distinct kinds") {
    CHECK(kind_of([] {
              TriMesh::build({{0, 0}, {1, 0}, {0, 1}, {0, -1}, {1, 1}}, {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}});
          }) == ErrorKind::NonManifold);
    CHECK(kind_of([] {
              TriMesh::build({{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}}, {{0, 1, 2}, {3, 4, 5}});
          }) == ErrorKind::Disconnected);
    CHECK(kind_of([] { TriMesh::build({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}); }) == ErrorKind::DegenerateTriangle);
    CHECK(kind_of([] { parse_msh("garbage"); }) == ErrorKind::Parse);
    CHECK(kind_of([] { parse_msh("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n"); }) ==
          ErrorKind::Parse);
}

TEST_CASE("overlapping triangles are rejected") {
    // Two triangles on the same side of a shared edge.
    const auto k = kind_of([] { TriMesh::build({{0, 0}, {2, 0}, {1, 1}, {1, 0.5}}, {{0, 1, 2}, {0, 1, 3}}); });
    CHECK((k == ErrorKind::InvertedTriangle || k == ErrorKind::NonManifold));
}
