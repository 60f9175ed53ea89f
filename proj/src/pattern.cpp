#include "quadforge/pattern.hpp"

#include <algorithm>
#include <numeric>

#include "quadforge/error.hpp"

namespace quadforge {

int SingularityPattern::sum_t() const {
    int s = 0;
    for (const auto& x : singularities) s += x.t;
    return s;
}

const Singularity* SingularityPattern::find(int vertex) const {
    for (const auto& s : singularities)
        if (s.vertex == vertex) return &s;
    return nullptr;
}

Singularity make_singularity(const TriMesh& mesh, int vertex, int valence) {
    if (vertex < 0 || vertex >= mesh.num_vertices())
        throw Error(ErrorKind::OutsideMesh, "vertex " + std::to_string(vertex) + " is not in the mesh");
    if (valence < 1 || valence > 8)
        throw Error(ErrorKind::InvalidArgument, "valence must be in [1, 8], got " + std::to_string(valence));
    Singularity s;
    s.vertex = vertex;
    s.position = mesh.vertex(vertex);
    s.boundary = mesh.is_boundary_vertex(vertex);
    s.valence = valence;
    s.t = t_from_valence(valence, s.boundary);
    return s;
}

void sort_pattern(SingularityPattern& p) {
    std::sort(p.singularities.begin(), p.singularities.end(),
              [](const Singularity& a, const Singularity& b) { return a.vertex < b.vertex; });
}

nlohmann::json to_json(const SingularityPattern& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : p.singularities)
        arr.push_back({{"vertex", s.vertex},
                       {"x", s.position.x},
                       {"y", s.position.y},
                       {"t", s.t},
                       {"valence", s.valence},
                       {"boundary", s.boundary}});
    return {{"chi", p.chi}, {"singularities", arr}};
}

SingularityPattern pattern_from_json(const nlohmann::json& j) {
    try {
        SingularityPattern p;
        p.chi = j.at("chi").get<int>();
        for (const auto& e : j.at("singularities")) {
            Singularity s;
            s.vertex = e.at("vertex").get<int>();
            s.position = {e.value("x", 0.0), e.value("y", 0.0)};
            s.boundary = e.value("boundary", false);
            if (e.contains("valence")) {
                s.valence = e.at("valence").get<int>();
                s.t = t_from_valence(s.valence, s.boundary);
                if (e.contains("t") && e.at("t").get<int>() != s.t)
                    throw Error(ErrorKind::Parse, "singularity at vertex " + std::to_string(s.vertex) +
                                                      ": t and valence disagree");
            } else {
                s.t = e.at("t").get<int>();
                s.valence = valence_from_t(s.t, s.boundary);
            }
            p.singularities.push_back(s);
        }
        sort_pattern(p);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("pattern json: ") + e.what());
    }
}

void bind_to_mesh(SingularityPattern& p, const TriMesh& mesh) {
    for (auto& s : p.singularities) {
        const int valence = s.valence;
        s = make_singularity(mesh, s.vertex, valence);
    }
    sort_pattern(p);
}

std::vector<int> corner_tags(const TriMesh& mesh) {
    const auto turning = turning_angles(mesh);
    std::vector<int> c(mesh.num_vertices(), 0);
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (mesh.is_boundary_vertex(v)) c[v] = corner_quarters(turning[v]);
    return c;
}

std::string quarter_string(int q) {
    if (q == 0) return "0";
    const int g = std::gcd(std::abs(q), 4);
    const int num = q / g, den = 4 / g;
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

std::string Validation::deficit_string() const { return quarter_string(deficit); }

Validation validate(const SingularityPattern& p, const TriMesh& mesh) {
    Validation r;
    r.expected = 4 * mesh.euler_characteristic();
    if (p.chi != mesh.euler_characteristic())
        r.problems.push_back("pattern chi " + std::to_string(p.chi) + " does not match mesh chi " +
                             std::to_string(mesh.euler_characteristic()));
    const auto turning = turning_angles(mesh);
    std::vector<int> tags(mesh.num_vertices(), 0);
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (mesh.is_boundary_vertex(v)) tags[v] = corner_quarters(turning[v]);

    std::vector<char> seen(mesh.num_vertices(), 0);
    for (const auto& s : p.singularities) {
        if (s.vertex < 0 || s.vertex >= mesh.num_vertices()) {
            r.problems.push_back("vertex " + std::to_string(s.vertex) + " is not in the mesh");
            continue;
        }
        if (seen[s.vertex]++) r.problems.push_back("duplicate entry at vertex " + std::to_string(s.vertex));
        if (s.boundary != mesh.is_boundary_vertex(s.vertex))
            r.problems.push_back("boundary flag mismatch at vertex " + std::to_string(s.vertex));
        if (s.valence < 1 || s.valence > 8)
            r.problems.push_back("valence out of range at vertex " + std::to_string(s.vertex));
        if (s.t != t_from_valence(s.valence, s.boundary))
            r.problems.push_back("t inconsistent with valence at vertex " + std::to_string(s.vertex));
        if (!s.boundary && s.t == 0)
            r.problems.push_back("interior entry of valence 4 at vertex " + std::to_string(s.vertex));
        r.balance += s.t;
    }
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (!mesh.is_boundary_vertex(v)) continue;
        r.neumann_mass += turning[v];
        if (!seen[v]) r.balance += tags[v];
    }
    r.deficit = r.balance - r.expected;
    r.source_mass = kHalfPi * r.balance;
    if (r.deficit != 0) r.problems.push_back("index balance off by " + r.deficit_string());
    const double target = kTwoPi * mesh.euler_characteristic();
    if (std::abs(r.neumann_mass - target) > 1e-9)
        r.problems.push_back("boundary turning does not sum to 2 pi chi");
    r.ok = r.problems.empty();
    return r;
}

nlohmann::json to_json(const PatternEdit& e) {
    static const char* names[] = {"add", "remove", "move", "set_valence"};
    nlohmann::json j = {{"op", names[static_cast<int>(e.kind)]}, {"vertex", e.vertex}, {"staged", e.staged}};
    if (e.kind == PatternEdit::Kind::Move) j["to_vertex"] = e.to_vertex;
    if (e.kind == PatternEdit::Kind::Add || e.kind == PatternEdit::Kind::SetValence) j["valence"] = e.valence;
    return j;
}

PatternEdit edit_from_json(const nlohmann::json& j) {
    try {
        PatternEdit e;
        const auto op = j.at("op").get<std::string>();
        if (op == "add") e.kind = PatternEdit::Kind::Add;
        else if (op == "remove") e.kind = PatternEdit::Kind::Remove;
        else if (op == "move") e.kind = PatternEdit::Kind::Move;
        else if (op == "set_valence") e.kind = PatternEdit::Kind::SetValence;
        else throw Error(ErrorKind::Parse, "unknown edit op '" + op + "'");
        e.vertex = j.at("vertex").get<int>();
        e.to_vertex = j.value("to_vertex", -1);
        e.valence = j.value("valence", 4);
        e.staged = j.value("staged", false);
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorKind::Parse, std::string("edit json: ") + ex.what());
    }
}

namespace {

SingularityPattern apply_raw(const SingularityPattern& p, const PatternEdit& e, const TriMesh& mesh) {
    SingularityPattern out = p;
    auto& list = out.singularities;
    auto at = [&](int v) {
        return std::find_if(list.begin(), list.end(), [v](const Singularity& s) { return s.vertex == v; });
    };
    if (e.vertex < 0 || e.vertex >= mesh.num_vertices())
        throw Error(ErrorKind::OutsideMesh, "edit targets vertex " + std::to_string(e.vertex) + " outside the mesh");
    switch (e.kind) {
        case PatternEdit::Kind::Add:
            if (at(e.vertex) != list.end())
                throw Error(ErrorKind::InvalidArgument, "vertex " + std::to_string(e.vertex) + " already singular");
            list.push_back(make_singularity(mesh, e.vertex, e.valence));
            break;
        case PatternEdit::Kind::Remove: {
            auto it = at(e.vertex);
            if (it == list.end())
                throw Error(ErrorKind::InvalidArgument, "no singularity at vertex " + std::to_string(e.vertex));
            list.erase(it);
            break;
        }
        case PatternEdit::Kind::Move: {
            auto it = at(e.vertex);
            if (it == list.end())
                throw Error(ErrorKind::InvalidArgument, "no singularity at vertex " + std::to_string(e.vertex));
            if (e.to_vertex < 0 || e.to_vertex >= mesh.num_vertices())
                throw Error(ErrorKind::OutsideMesh, "move target outside the mesh");
            if (at(e.to_vertex) != list.end())
                throw Error(ErrorKind::InvalidArgument, "move target already singular");
            // The index travels with the singularity; valence follows from the new location.
            const int t = it->t;
            Singularity s = make_singularity(mesh, e.to_vertex, 4);
            s.t = t;
            s.valence = valence_from_t(t, s.boundary);
            if (s.valence < 1 || s.valence > 8)
                throw Error(ErrorKind::InvalidArgument, "moved singularity has no valid valence at target");
            *it = s;
            break;
        }
        case PatternEdit::Kind::SetValence: {
            auto it = at(e.vertex);
            if (it == list.end())
                throw Error(ErrorKind::InvalidArgument, "no singularity at vertex " + std::to_string(e.vertex));
            *it = make_singularity(mesh, e.vertex, e.valence);
            break;
        }
    }
    sort_pattern(out);
    return out;
}

}  // namespace

SingularityPattern apply_edit(const SingularityPattern& p, const PatternEdit& e, const TriMesh& mesh) {
    SingularityPattern out = apply_raw(p, e, mesh);
    if (!e.staged) finalize(out, mesh);
    return out;
}

SingularityPattern apply_edits(const SingularityPattern& p, const std::vector<PatternEdit>& edits,
                               const TriMesh& mesh) {
    SingularityPattern out = p;
    bool all_staged = true;
    for (const auto& e : edits) {
        out = apply_raw(out, e, mesh);
        all_staged = all_staged && e.staged;
    }
    if (!all_staged) finalize(out, mesh);
    return out;
}

PatternEdit inverse_edit(const SingularityPattern& before, const PatternEdit& e) {
    PatternEdit inv = e;
    switch (e.kind) {
        case PatternEdit::Kind::Add:
            inv.kind = PatternEdit::Kind::Remove;
            break;
        case PatternEdit::Kind::Remove:
            inv.kind = PatternEdit::Kind::Add;
            if (const auto* s = before.find(e.vertex)) inv.valence = s->valence;
            break;
        case PatternEdit::Kind::Move:
            inv.vertex = e.to_vertex;
            inv.to_vertex = e.vertex;
            break;
        case PatternEdit::Kind::SetValence:
            if (const auto* s = before.find(e.vertex)) inv.valence = s->valence;
            break;
    }
    return inv;
}

void finalize(const SingularityPattern& p, const TriMesh& mesh) {
    const Validation v = validate(p, mesh);
    if (v.ok) return;
    std::string msg = "pattern rejected:";
    for (const auto& s : v.problems) msg += " " + s + ";";
    throw Error(ErrorKind::Incompatible, msg);
}

}  // namespace quadforge
