#pragma once

#include <string>
#include <vector>

#include "quadforge/geometry.hpp"
#include "quadforge/tri_mesh.hpp"

namespace quadforge {

// Gmsh element type codes used here.
inline constexpr int kMshLine = 1;
inline constexpr int kMshTriangle = 2;
inline constexpr int kMshQuad = 3;
inline constexpr int kMshPoint = 15;

struct MshElement {
    int type = 0;
    int physical = 0;
    int elementary = 0;
    std::vector<int> nodes;  // 0-based indices into MshData::nodes
};

struct MshDataBlock {
    std::string name;
    bool per_element = false;         // $ElementData instead of $NodeData
    int components = 1;               // 1 (scalar) or 3 (vector)
    std::vector<std::vector<double>> values;  // one row per node/element
};

struct MshData {
    std::vector<Vec2> nodes;
    std::vector<MshElement> elements;
    std::vector<MshDataBlock> data;
};

// ASCII .msh version 2.2 subset: $MeshFormat, $Nodes, $Elements, and
// $NodeData/$ElementData on output. Node tags are renumbered densely.
MshData read_msh(const std::string& path);
MshData parse_msh(const std::string& text);
void write_msh(const std::string& path, const MshData& data);
std::string format_msh(const MshData& data);

TriMesh load_mesh(const std::string& path, BuildReport* report = nullptr);
TriMesh mesh_from_msh(const MshData& data, BuildReport* report = nullptr);
// Triangles plus the boundary as 2-node line elements.
MshData msh_from_mesh(const TriMesh& mesh);
void save_mesh(const std::string& path, const TriMesh& mesh);

}  // namespace quadforge
