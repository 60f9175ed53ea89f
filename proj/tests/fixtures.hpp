#pragma once

// Shared fixture patterns for the conformal, layout and acceptance tests.

#include <cmath>
#include <memory>
#include <vector>

#include "quadforge/conformal.hpp"
#include "quadforge/domains.hpp"
#include "quadforge/pattern.hpp"
#include "quadforge/spokes.hpp"
#include "quadforge/trace.hpp"
#include "test_util.hpp"

namespace qtest {

inline quadforge::SingularityPattern annulus_pattern(const quadforge::TriMesh& m, double rot_deg,
                                                     double r3 = 0.32, double r5 = 0.43) {
    using namespace quadforge;
    SingularityPattern p;
    p.chi = m.euler_characteristic();
    for (int j = 0; j < 4; ++j) {
        const double a = kPi / 4 + j * kHalfPi;
        p.singularities.push_back(make_singularity(m, nearest_vertex(m, Vec2{0.5, 0.5} + from_angle(a) * r3), 3));
        p.singularities.push_back(
            make_singularity(m, nearest_vertex(m, Vec2{0.5, 0.5} + from_angle(a + rot_deg * quadforge::kPi / 180.0) * r5), 5));
    }
    sort_pattern(p);
    return p;
}

// Centre valence 8 with valence-1 companions at the four edge midpoints.
inline quadforge::SingularityPattern valence8_pattern(const quadforge::TriMesh& m) {
    return make_pattern(m, {{{0.5, 0.5}, 8}, {{0.5, 0.0}, 1}, {{1.0, 0.5}, 1}, {{0.5, 1.0}, 1}, {{0.0, 0.5}, 1}});
}

// Spoke refinement plus H and theta; heap-allocated because the field keeps a
// reference to the refined mesh.
struct Solved {
    quadforge::SpokeResult spokes;
    std::unique_ptr<quadforge::CrossField> field;
};

inline std::unique_ptr<Solved> solve_fields(const quadforge::TriMesh& m, const quadforge::SingularityPattern& p) {
    using namespace quadforge;
    auto s = std::make_unique<Solved>();
    s->spokes = refine_spokes(m, p);
    const auto& rm = s->spokes.mesh;
    auto cut = build_branch_cut(rm, s->spokes.pattern);
    auto h = solve_H(rm, s->spokes.pattern);
    auto th = solve_theta(rm, h, cut);
    s->field = std::make_unique<CrossField>(rm, std::move(h), std::move(cut), std::move(th));
    return s;
}

// Hand-built curve sets on the unit square (empty pattern, axis-aligned field).
inline quadforge::Separatrix segment_curve(quadforge::Vec2 a, quadforge::Vec2 b, quadforge::Termination end,
                                           int pieces = 50) {
    quadforge::Separatrix c;
    for (int i = 0; i <= pieces; ++i) c.points.push_back(a + (b - a) * (static_cast<double>(i) / pieces));
    c.end = end;
    return c;
}

// Spiral from the left edge winding three times around the centre, plus a
// vertical curve through the centre that it keeps crossing.
inline std::vector<quadforge::Separatrix> spiral_curves() {
    using namespace quadforge;
    std::vector<Separatrix> out{segment_curve({0.5, 0.0}, {0.5, 1.0}, Termination::Boundary)};
    Separatrix s;
    s.points.push_back({0.0, 0.5});
    for (int i = 0; i <= 1800; ++i) {
        const double phi = kPi + 6.0 * kPi * i / 1800.0;
        const double r = 0.45 - 0.1 * (phi - kPi) / kTwoPi;
        s.points.push_back(Vec2{0.5, 0.5} + from_angle(phi) * r);
    }
    s.end = Termination::MaxSteps;
    out.push_back(s);
    return out;
}

inline std::vector<quadforge::Separatrix> stacked_t_curves() {
    using namespace quadforge;
    return {segment_curve({0.5, 0.0}, {0.5, 1.0}, Termination::Boundary),
            segment_curve({0.0, 0.3}, {0.5, 0.3}, Termination::Cut),
            segment_curve({0.0, 0.7}, {0.5, 0.7}, Termination::Cut)};
}

inline std::vector<quadforge::Separatrix> opposing_t_curves() {
    using namespace quadforge;
    return {segment_curve({0.5, 0.0}, {0.5, 1.0}, Termination::Boundary),
            segment_curve({0.0, 0.5}, {0.5, 0.5}, Termination::Cut),
            segment_curve({1.0, 0.52}, {0.5, 0.52}, Termination::Cut)};
}

inline std::vector<quadforge::Separatrix> doublet_curves() {
    using namespace quadforge;
    return {segment_curve({0.0, 0.0}, {1.0, 1.0}, Termination::Boundary)};
}

// Four radial curves across the default annulus and a spiral that never ends.
inline std::vector<quadforge::Separatrix> annulus_spiral_curves() {
    using namespace quadforge;
    std::vector<Separatrix> out;
    const Vec2 c{0.5, 0.5};
    for (int k = 0; k < 4; ++k) {
        const Vec2 d = from_angle(kHalfPi * k + 0.3);
        out.push_back(segment_curve(c + d * 0.25, c + d * 0.5, Termination::Boundary));
    }
    Separatrix s;
    for (int i = 0; i <= 4000; ++i) {
        const double phi = 10.0 * kTwoPi * i / 4000.0;
        const double r = 0.25 + 0.2 * (1.0 - std::exp(-phi / 2.0));
        s.points.push_back(c + from_angle(phi) * r);
    }
    s.end = Termination::MaxSteps;
    out.push_back(s);
    return out;
}

}  // namespace qtest
