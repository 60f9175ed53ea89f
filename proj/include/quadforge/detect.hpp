#pragma once

#include <span>
#include <vector>

#include "quadforge/crossfield_mbo.hpp"
#include "quadforge/pattern.hpp"
#include "quadforge/tri_mesh.hpp"

namespace quadforge {

// Winding of a per-vertex representation angle (4 x cross angle) around each
// triangle, in units of 2 pi; that integer is the quarter-index numerator t.
std::vector<int> triangle_windings(const TriMesh& mesh, std::span<const double> rep_angle);

// Pattern from per-triangle windings: each singular triangle snaps to its
// vertex nearest the circumcenter (interior vertices preferred), and windings
// landing on the same vertex are summed.
SingularityPattern pattern_from_windings(const TriMesh& mesh, std::span<const int> windings);

SingularityPattern detect(const TriMesh& mesh, const RepresentationField& field);

}  // namespace quadforge
