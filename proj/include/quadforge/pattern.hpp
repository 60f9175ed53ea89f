#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadforge/tri_mesh.hpp"

namespace quadforge {

// t is the integer numerator of the quarter index k = t/4.
// Interior: valence = 4 - t. Boundary: valence = 2 - t.
struct Singularity {
    int vertex = -1;
    Vec2 position;
    int t = 0;
    int valence = 4;
    bool boundary = false;

    bool operator==(const Singularity&) const = default;
};

struct SingularityPattern {
    int chi = 1;
    std::vector<Singularity> singularities;  // sorted by vertex id

    int sum_t() const;
    const Singularity* find(int vertex) const;
    bool operator==(const SingularityPattern&) const = default;
};

inline int t_from_valence(int valence, bool boundary) { return (boundary ? 2 : 4) - valence; }
inline int valence_from_t(int t, bool boundary) { return (boundary ? 2 : 4) - t; }

Singularity make_singularity(const TriMesh& mesh, int vertex, int valence);
void sort_pattern(SingularityPattern& p);

nlohmann::json to_json(const SingularityPattern& p);
SingularityPattern pattern_from_json(const nlohmann::json& j);
// Re-reads positions and boundary flags from the mesh; throws on unknown vertices.
void bind_to_mesh(SingularityPattern& p, const TriMesh& mesh);

// Quarter-turn corner tags of the boundary, indexed by vertex id.
std::vector<int> corner_tags(const TriMesh& mesh);

struct Validation {
    bool ok = false;
    int balance = 0;   // sum of entries plus untagged corners, in quarters
    int expected = 0;  // 4 chi
    int deficit = 0;   // balance - expected
    double source_mass = 0.0;   // pi/2 * balance
    double neumann_mass = 0.0;  // sum of turning angles
    std::vector<std::string> problems;

    std::string deficit_string() const;
};

// Formats q/4 as a reduced fraction ("-1/4", "1/2", "-1", "0").
std::string quarter_string(int q);

Validation validate(const SingularityPattern& p, const TriMesh& mesh);

struct PatternEdit {
    enum class Kind { Add, Remove, Move, SetValence };
    Kind kind = Kind::Add;
    int vertex = -1;
    int to_vertex = -1;  // Move target
    int valence = 4;     // Add / SetValence
    bool staged = false;
};

nlohmann::json to_json(const PatternEdit& e);
PatternEdit edit_from_json(const nlohmann::json& j);

// Applies one edit. Non-staged edits are validated and rejected atomically
// (ErrorKind::Incompatible) when the balance fails.
SingularityPattern apply_edit(const SingularityPattern& p, const PatternEdit& e, const TriMesh& mesh);
// Applies a batch whose intermediate states may be unbalanced; only the final
// state is validated unless every edit is staged.
SingularityPattern apply_edits(const SingularityPattern& p, const std::vector<PatternEdit>& edits, const TriMesh& mesh);
// Edit that undoes `e` when applied to the result of applying it to `before`.
PatternEdit inverse_edit(const SingularityPattern& before, const PatternEdit& e);
// Throws Incompatible unless the pattern validates.
void finalize(const SingularityPattern& p, const TriMesh& mesh);

}  // namespace quadforge
