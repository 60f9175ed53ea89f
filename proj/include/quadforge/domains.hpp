#pragma once

#include "quadforge/tri_mesh.hpp"

namespace quadforge {

// Structured triangulations of the reference domains. Diagonals alternate so
// the meshes keep the reflection symmetries of the domain.

// [x0, x0+side]^2 with n cells per side.
TriMesh make_square(int n, double side = 1.0, Vec2 origin = {0.0, 0.0});
// Disk of the given radius centred at `center`, `rings` concentric rings.
TriMesh make_disk(int rings, double radius = 0.5, Vec2 center = {0.5, 0.5});
// Annulus r_in < r < r_out with n_theta sectors and n_r radial layers.
TriMesh make_annulus(int n_theta, int n_r, double r_in = 0.25, double r_out = 0.5, Vec2 center = {0.5, 0.5});
// Unit square minus a centred disk; n cells per square side, n_r radial layers.
TriMesh make_square_minus_disk(int n, int n_r, double hole_radius = 0.25);

// Uniform 1-to-4 refinement; existing vertices keep their ids and coordinates.
TriMesh refine_uniform(const TriMesh& mesh);

}  // namespace quadforge
