#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "quadforge/conformal.hpp"
#include "quadforge/pattern.hpp"
#include "quadforge/svg.hpp"
#include "quadforge/trace.hpp"

namespace quadforge {

enum class NodeKind { Singularity, BoundarySingularity, Corner, BoundaryHit, Crossing, Free };
const char* to_string(NodeKind k);

struct LayoutNode {
    Vec2 p;
    NodeKind kind = NodeKind::Crossing;
    int vertex = -1;   // mesh vertex for singularities and corners
    int loop = -1;     // boundary loop, -1 inside
    bool boundary() const { return loop >= 0; }
    bool singular() const { return kind == NodeKind::Singularity || kind == NodeKind::BoundarySingularity; }
};

struct LayoutEdge {
    int a = -1, b = -1;
    std::vector<Vec2> poly;   // from a to b
    int curve = -1;           // source curve, -1 for boundary arcs
    int loop = -1;            // boundary loop for arcs
    double length() const;
};

struct LayoutPatch {
    std::vector<int> edges;       // cyclic, counter-clockwise
    std::vector<char> forward;    // traversal direction per edge
    std::vector<int> nodes;       // nodes[i] is the start of edges[i]
    std::vector<char> corner;     // per node
    std::vector<double> angle;    // interior angle per node
    int num_corners() const;
    // Polygon through all edge polylines, counter-clockwise, not closed.
    std::vector<Vec2> polygon(const std::vector<LayoutEdge>& all) const;
    // Sides between consecutive corners; each is a list of positions into `edges`.
    std::vector<std::vector<int>> sides() const;
};

struct QuadLayout {
    std::vector<Separatrix> curves;
    std::vector<LayoutNode> nodes;
    std::vector<LayoutEdge> edges;
    std::vector<LayoutPatch> patches;

    bool all_quads() const;
    // Interior non-singular nodes where a curve ends on another one.
    std::vector<int> tjunctions() const;
    int degree(int node) const;
    // Patches incident to each node.
    std::vector<int> patch_counts() const;
};

struct LayoutParams {
    double corner_angle = 135.0;   // degrees; regular interior nodes below it are corners
    double cluster_factor = 0.25;  // node clustering radius in mean edge lengths
};

// Planar arrangement of the curves and the domain boundary, and its faces.
QuadLayout build_partitions(const TriMesh& mesh, const SingularityPattern& pattern, std::vector<Separatrix> curves,
                            const LayoutParams& params = {});

struct TFixReport {
    int rounds = 0;
    int merged = 0;
    int extended = 0;
    bool resolved = false;
};

// Resolves T-junctions by merging nearby opposing ends or by extending the
// hanging curve along the field until it meets the layout again.
QuadLayout fix_tjunctions(const QuadLayout& layout, const TriMesh& mesh, const SingularityPattern& pattern,
                          const CrossField* field, TFixReport* report = nullptr, const LayoutParams& params = {},
                          int max_rounds = 32);

struct SplitReport {
    int split = 0;
    SingularityPattern pattern;   // pattern implied by the split layout
};

// Splits every three-sided patch into three quads around its centroid.
QuadLayout split_valence2(const QuadLayout& layout, const TriMesh& mesh, const SingularityPattern& pattern,
                          SplitReport* report = nullptr, const LayoutParams& params = {});

// Pattern read off the layout: patch counts at nodes that sit on mesh vertices.
SingularityPattern implied_pattern(const QuadLayout& layout, const TriMesh& mesh);

nlohmann::json to_json(const QuadLayout& layout);
void draw_layout(SvgCanvas& svg, const QuadLayout& layout);

}  // namespace quadforge
