#include "quadforge/msh_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "quadforge/error.hpp"

namespace quadforge {

namespace {

int nodes_per_element(int type) {
    switch (type) {
        case kMshLine: return 2;
        case kMshTriangle: return 3;
        case kMshQuad: return 4;
        case kMshPoint: return 1;
        default: return -1;
    }
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void expect_line(std::istream& in, const std::string& token) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == token) return;
        throw Error(ErrorKind::Parse, "expected " + token + ", found '" + line + "'");
    }
    throw Error(ErrorKind::Parse, "unexpected end of file, expected " + token);
}

}  // namespace

MshData parse_msh(const std::string& text) {
    std::istringstream in(text);
    MshData out;
    std::unordered_map<long, int> node_index;
    bool have_format = false, have_nodes = false, have_elements = false;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "$MeshFormat") {
            double version = 0;
            int file_type = -1, dsize = 0;
            if (!(in >> version >> file_type >> dsize)) throw Error(ErrorKind::Parse, "bad $MeshFormat header");
            if (version < 2.0 || version >= 3.0) throw Error(ErrorKind::Parse, "unsupported .msh version " + fmt(version));
            if (file_type != 0) throw Error(ErrorKind::Parse, "binary .msh is not supported");
            in >> std::ws;
            expect_line(in, "$EndMeshFormat");
            have_format = true;
        } else if (line == "$Nodes") {
            long n = 0;
            if (!(in >> n) || n < 0) throw Error(ErrorKind::Parse, "bad node count");
            out.nodes.reserve(n);
            for (long i = 0; i < n; ++i) {
                long tag;
                double x, y, z;
                if (!(in >> tag >> x >> y >> z)) throw Error(ErrorKind::Parse, "truncated $Nodes section");
                if (!node_index.emplace(tag, static_cast<int>(out.nodes.size())).second)
                    throw Error(ErrorKind::Parse, "duplicate node tag " + std::to_string(tag));
                out.nodes.emplace_back(x, y);
            }
            in >> std::ws;
            expect_line(in, "$EndNodes");
            have_nodes = true;
        } else if (line == "$Elements") {
            long n = 0;
            if (!(in >> n) || n < 0) throw Error(ErrorKind::Parse, "bad element count");
            for (long i = 0; i < n; ++i) {
                long tag;
                int type, ntags;
                if (!(in >> tag >> type >> ntags) || ntags < 0) throw Error(ErrorKind::Parse, "truncated $Elements section");
                std::vector<long> tags(ntags);
                for (auto& t : tags)
                    if (!(in >> t)) throw Error(ErrorKind::Parse, "truncated element tags");
                const int nn = nodes_per_element(type);
                if (nn < 0) throw Error(ErrorKind::Parse, "unsupported element type " + std::to_string(type));
                MshElement e;
                e.type = type;
                e.physical = ntags > 0 ? static_cast<int>(tags[0]) : 0;
                e.elementary = ntags > 1 ? static_cast<int>(tags[1]) : 0;
                for (int k = 0; k < nn; ++k) {
                    long nt;
                    if (!(in >> nt)) throw Error(ErrorKind::Parse, "truncated element node list");
                    auto it = node_index.find(nt);
                    if (it == node_index.end()) throw Error(ErrorKind::Parse, "element references unknown node " + std::to_string(nt));
                    e.nodes.push_back(it->second);
                }
                out.elements.push_back(std::move(e));
            }
            in >> std::ws;
            expect_line(in, "$EndElements");
            have_elements = true;
        } else if (line.size() > 1 && line[0] == '$' && line.rfind("$End", 0) != 0) {
            // Unknown or data section: skip to its end marker.
            const std::string end = "$End" + line.substr(1);
            bool closed = false;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line == end) { closed = true; break; }
            }
            if (!closed) throw Error(ErrorKind::Parse, "unterminated section " + end);
        } else {
            throw Error(ErrorKind::Parse, "unexpected line '" + line + "'");
        }
    }
    if (!have_format || !have_nodes || !have_elements)
        throw Error(ErrorKind::Parse, "missing $MeshFormat, $Nodes or $Elements");
    return out;
}

MshData read_msh(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_msh(ss.str());
}

std::string format_msh(const MshData& data) {
    std::string s;
    s.reserve(64 * (data.nodes.size() + data.elements.size()));
    s += "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n";
    s += std::to_string(data.nodes.size()) + "\n";
    for (size_t i = 0; i < data.nodes.size(); ++i)
        s += std::to_string(i + 1) + " " + fmt(data.nodes[i].x) + " " + fmt(data.nodes[i].y) + " 0\n";
    s += "$EndNodes\n$Elements\n" + std::to_string(data.elements.size()) + "\n";
    for (size_t i = 0; i < data.elements.size(); ++i) {
        const auto& e = data.elements[i];
        s += std::to_string(i + 1) + " " + std::to_string(e.type) + " 2 " + std::to_string(e.physical) + " " +
             std::to_string(e.elementary);
        for (int n : e.nodes) s += " " + std::to_string(n + 1);
        s += "\n";
    }
    s += "$EndElements\n";
    for (const auto& block : data.data) {
        const std::string sec = block.per_element ? "ElementData" : "NodeData";
        s += "$" + sec + "\n1\n\"" + block.name + "\"\n1\n0.0\n3\n0\n" + std::to_string(block.components) + "\n" +
             std::to_string(block.values.size()) + "\n";
        for (size_t i = 0; i < block.values.size(); ++i) {
            s += std::to_string(i + 1);
            for (double v : block.values[i]) s += " " + fmt(v);
            s += "\n";
        }
        s += "$End" + sec + "\n";
    }
    return s;
}

void write_msh(const std::string& path, const MshData& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
    f << format_msh(data);
    if (!f) throw Error(ErrorKind::Io, "write failed for " + path);
}

TriMesh mesh_from_msh(const MshData& data, BuildReport* report) {
    std::vector<Tri> tris;
    for (const auto& e : data.elements)
        if (e.type == kMshTriangle) tris.push_back({e.nodes[0], e.nodes[1], e.nodes[2]});
    if (tris.empty()) throw Error(ErrorKind::Parse, "no triangle elements");
    return TriMesh::build(data.nodes, std::move(tris), report);
}

TriMesh load_mesh(const std::string& path, BuildReport* report) { return mesh_from_msh(read_msh(path), report); }

MshData msh_from_mesh(const TriMesh& mesh) {
    MshData d;
    d.nodes = mesh.vertices();
    for (size_t l = 0; l < mesh.boundary_loops().size(); ++l) {
        const auto& vs = mesh.boundary_loops()[l].vertices;
        for (size_t i = 0; i < vs.size(); ++i)
            d.elements.push_back({kMshLine, static_cast<int>(l) + 1, static_cast<int>(l) + 1,
                                  {vs[i], vs[(i + 1) % vs.size()]}});
    }
    for (const auto& t : mesh.triangles()) d.elements.push_back({kMshTriangle, 100, 1, {t[0], t[1], t[2]}});
    return d;
}

void save_mesh(const std::string& path, const TriMesh& mesh) { write_msh(path, msh_from_mesh(mesh)); }

}  // namespace quadforge
