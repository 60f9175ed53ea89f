#pragma once

#include <vector>

#include "quadforge/pattern.hpp"
#include "quadforge/tri_mesh.hpp"

namespace quadforge {

struct SpokeParams {
    int rings = 3;
    int sectors_per_quadrant = 2;
    double radius_factor = 1.5;
};

struct SpokeDisk {
    int vertex = -1;        // id in the refined mesh
    double radius = 0.0;    // outer ring radius
    double inner_radius = 0.0;
    int spokes = 0;
    int ring_depth = 0;     // k of the k-ring region that was remeshed
};

struct SpokeResult {
    TriMesh mesh;
    SingularityPattern pattern;     // rebound to the refined mesh
    std::vector<int> vertex_map;    // input vertex -> refined vertex, -1 if removed
    std::vector<SpokeDisk> disks;   // one per singularity, pattern order
};

// Remeshes a star-shaped neighbourhood of every singular vertex with concentric
// rings and spokes. Vertices outside the neighbourhoods keep their coordinates
// and relative order; new vertices are appended.
SpokeResult refine_spokes(const TriMesh& mesh, const SingularityPattern& pattern, const SpokeParams& params = {});

}  // namespace quadforge
