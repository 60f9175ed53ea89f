#pragma once

#include <vector>

#include "quadforge/conformal.hpp"
#include "quadforge/pattern.hpp"
#include "quadforge/spokes.hpp"

namespace quadforge {

enum class Termination { None, Boundary, Singularity, MaxSteps, Cut };
const char* to_string(Termination t);

struct Separatrix {
    std::vector<Vec2> points;
    int origin = -1;          // singular vertex, -1 for curves that start elsewhere
    int origin_branch = -1;
    Termination end = Termination::None;
    int end_singularity = -1;
    int host = -1;            // curve that a Cut end lies on
    double max_branch_jump = 0.0;   // worst step-to-branch angle seen while tracing

    double length() const;
    // Sum of absolute turning angles between consecutive segments.
    double curvature() const;
};

struct TraceParams {
    double step_factor = 0.4;
    double max_steps_factor = 50.0;   // max_steps = factor * diameter / min edge
    int launch_samples = 720;
    double orthogonal_tol = 30.0;     // degrees
};

// Capture disk around a singular vertex.
struct Capture {
    int vertex = -1;
    Vec2 p;
    double radius = 0.0;
};

// Pattern singularities plus concave boundary corners that are not pattern
// entries; the latter get t = corner tag and launch separatrices as well.
std::vector<Singularity> launch_sites(const TriMesh& mesh, const SingularityPattern& pattern);

std::vector<Capture> captures_from(const std::vector<Singularity>& sites, const std::vector<SpokeDisk>& disks,
                                   const TriMesh& mesh);

// Directions (radians) in which a cross branch points radially away from s,
// sampled on a circle (interior) or on the interior arc (boundary) of radius r.
std::vector<double> launch_angles(const CrossField& field, const Singularity& s, double r, int samples);

// Heun integration from p along the branch nearest to dir.
Separatrix trace_curve(const CrossField& field, Vec2 p, Vec2 dir, const std::vector<Capture>& captures,
                       const TraceParams& params, int origin = -1);

std::vector<Separatrix> trace_separatrices(const CrossField& field, const SingularityPattern& pattern,
                                           const std::vector<SpokeDisk>& disks, const TraceParams& params = {});

// Discrete Hausdorff distance between two polylines (vertex samples, segment distances).
double hausdorff(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

// Merges singularity-to-singularity duplicates traced from both ends. Throws
// Layout if a singularity ends up with a number of incident ends different
// from its valence (interior) or valence - 1 (boundary).
std::vector<Separatrix> dedup(std::vector<Separatrix> seps, const std::vector<Singularity>& sites,
                              const std::vector<Capture>& captures);

struct CurveHit {
    int a = -1, b = -1;        // curve ids
    double sa = 0.0, sb = 0.0; // arc length along each
    Vec2 p;
    double angle = 0.0;        // crossing angle in [0, pi/2]
};

// All proper crossings between distinct curves, ignoring shared singular endpoints.
std::vector<CurveHit> curve_intersections(const std::vector<Separatrix>& curves, double endpoint_tol);

struct TJunctionRecord {
    Vec2 where;
    int hanging = -1;
    int host = -1;
};

struct LimitCycleReport {
    std::vector<int> possible;
    std::vector<int> authentic;
    std::vector<TJunctionRecord> records;
};

// Cuts authentic limit cycles at their closest near-orthogonal crossing.
LimitCycleReport detect_and_cut_limit_cycles(std::vector<Separatrix>& curves, const TriMesh& mesh,
                                             const TraceParams& params = {});

}  // namespace quadforge
