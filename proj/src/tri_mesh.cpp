#include "quadforge/tri_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "quadforge/error.hpp"

namespace quadforge {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::NonManifold: return "non-manifold mesh";
        case ErrorKind::InvertedTriangle: return "inverted triangle";
        case ErrorKind::DegenerateTriangle: return "degenerate triangle";
        case ErrorKind::Disconnected: return "disconnected mesh";
        case ErrorKind::OutsideMesh: return "outside mesh";
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::SolverFailure: return "solver failure";
        case ErrorKind::Incompatible: return "incompatible pattern";
        case ErrorKind::UnderResolved: return "under-resolved field";
        case ErrorKind::InconsistentCut: return "inconsistent branch cut";
        case ErrorKind::Layout: return "layout failure";
        case ErrorKind::Parameterization: return "parameterization failure";
        case ErrorKind::Io: return "i/o failure";
    }
    return "error";
}

TriMesh TriMesh::build(std::vector<Vec2> vertices, std::vector<Tri> triangles, BuildReport* report) {
    if (triangles.empty()) throw Error(ErrorKind::InvalidArgument, "mesh has no triangles");
    const int nv_in = static_cast<int>(vertices.size());
    for (const auto& t : triangles)
        for (int v : t)
            if (v < 0 || v >= nv_in)
                throw Error(ErrorKind::Parse, "triangle references unknown vertex " + std::to_string(v));

    // Drop vertices no triangle references and renumber densely.
    std::vector<int> remap(nv_in, -1);
    for (const auto& t : triangles)
        for (int v : t) remap[v] = 0;
    TriMesh m;
    for (int v = 0; v < nv_in; ++v) {
        if (remap[v] < 0) continue;
        remap[v] = static_cast<int>(m.vertices_.size());
        m.vertices_.push_back(vertices[v]);
    }
    BuildReport local;
    local.dropped_vertices = nv_in - static_cast<int>(m.vertices_.size());
    for (const auto& v : m.vertices_) m.bbox_.expand(v);
    const double diag = m.bbox_.diagonal();
    const double min_area = 1e-14 * diag * diag;

    m.triangles_.reserve(triangles.size());
    for (auto t : triangles) {
        for (int& v : t) v = remap[v];
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw Error(ErrorKind::DegenerateTriangle, "triangle with repeated vertex");
        const double a2 = orient2d(m.vertices_[t[0]], m.vertices_[t[1]], m.vertices_[t[2]]);
        if (std::abs(a2) * 0.5 < min_area)
            throw Error(ErrorKind::DegenerateTriangle,
                        "triangle (" + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
                            std::to_string(t[2]) + ") has near-zero area");
        if (a2 < 0.0) {
            std::swap(t[1], t[2]);
            ++local.reoriented;
        }
        m.triangles_.push_back(t);
    }
    const int nv = m.num_vertices();
    const int nt = m.num_triangles();

    // Edges; a directed half-edge may appear only once, otherwise triangles overlap.
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(nt * 3);
    {
        std::unordered_map<std::uint64_t, int> uses;
        for (const auto& tr : m.triangles_)
            for (int i = 0; i < 3; ++i)
                if (++uses[edge_key(tr[i], tr[(i + 1) % 3])] > 2)
                    throw Error(ErrorKind::NonManifold, "edge (" + std::to_string(tr[i]) + "," +
                                                            std::to_string(tr[(i + 1) % 3]) +
                                                            ") bounds more than two triangles");
    }
    m.tri_edges_.assign(nt, {-1, -1, -1});
    for (int t = 0; t < nt; ++t) {
        for (int i = 0; i < 3; ++i) {
            const int a = m.triangles_[t][i];
            const int b = m.triangles_[t][(i + 1) % 3];
            const std::uint64_t dkey = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
            if (!directed.emplace(dkey, t).second)
                throw Error(ErrorKind::InvertedTriangle,
                            "edge (" + std::to_string(a) + "," + std::to_string(b) +
                                ") traversed twice in the same direction (overlapping triangles)");
            const auto key = edge_key(a, b);
            auto [it, inserted] = m.edge_lookup_.try_emplace(key, m.num_edges());
            if (inserted) {
                Edge e;
                e.v = {std::min(a, b), std::max(a, b)};
                e.tri = {t, -1};
                m.edges_.push_back(e);
            } else {
                Edge& e = m.edges_[it->second];
                if (e.tri[1] >= 0)
                    throw Error(ErrorKind::NonManifold,
                                "edge (" + std::to_string(a) + "," + std::to_string(b) + ") bounds more than two triangles");
                e.tri[1] = t;
            }
            m.tri_edges_[t][i] = it->second;
        }
    }

    // Connectivity over triangle adjacency.
    {
        std::vector<char> seen(nt, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        int count = 1;
        while (!q.empty()) {
            const int t = q.front();
            q.pop();
            for (int i = 0; i < 3; ++i) {
                const int n = m.neighbor(t, i);
                if (n >= 0 && !seen[n]) {
                    seen[n] = 1;
                    ++count;
                    q.push(n);
                }
            }
        }
        if (count != nt)
            throw Error(ErrorKind::Disconnected,
                        std::to_string(nt - count) + " triangles not reachable from triangle 0");
    }

    // Vertex -> triangles, vertex -> neighbours (CSR).
    m.vt_offsets_.assign(nv + 1, 0);
    for (const auto& t : m.triangles_)
        for (int v : t) ++m.vt_offsets_[v + 1];
    std::partial_sum(m.vt_offsets_.begin(), m.vt_offsets_.end(), m.vt_offsets_.begin());
    m.vt_data_.resize(m.vt_offsets_.back());
    {
        auto fill = m.vt_offsets_;
        for (int t = 0; t < nt; ++t)
            for (int v : m.triangles_[t]) m.vt_data_[fill[v]++] = t;
    }
    m.vv_offsets_.assign(nv + 1, 0);
    for (const auto& e : m.edges_) {
        ++m.vv_offsets_[e.v[0] + 1];
        ++m.vv_offsets_[e.v[1] + 1];
    }
    std::partial_sum(m.vv_offsets_.begin(), m.vv_offsets_.end(), m.vv_offsets_.begin());
    m.vv_data_.resize(m.vv_offsets_.back());
    {
        auto fill = m.vv_offsets_;
        for (const auto& e : m.edges_) {
            m.vv_data_[fill[e.v[0]]++] = e.v[1];
            m.vv_data_[fill[e.v[1]]++] = e.v[0];
        }
    }

    // Boundary loops from directed boundary half-edges (interior on the left).
    m.boundary_vertex_.assign(nv, 0);
    m.vertex_loop_.assign(nv, -1);
    std::vector<int> next(nv, -1);
    int nbe = 0;
    for (int t = 0; t < nt; ++t) {
        for (int i = 0; i < 3; ++i) {
            if (m.neighbor(t, i) >= 0) continue;
            const int a = m.triangles_[t][i];
            const int b = m.triangles_[t][(i + 1) % 3];
            if (next[a] >= 0)
                throw Error(ErrorKind::NonManifold, "vertex " + std::to_string(a) + " is pinched between boundary loops");
            next[a] = b;
            m.boundary_vertex_[a] = 1;
            ++nbe;
        }
    }
    int visited = 0;
    for (int v = 0; v < nv; ++v) {
        if (next[v] < 0 || m.vertex_loop_[v] >= 0) continue;
        BoundaryLoop loop;
        int cur = v;
        const int id = static_cast<int>(m.loops_.size());
        do {
            if (m.vertex_loop_[cur] >= 0)
                throw Error(ErrorKind::NonManifold, "boundary loop does not close at vertex " + std::to_string(cur));
            m.vertex_loop_[cur] = id;
            loop.vertices.push_back(cur);
            cur = next[cur];
            if (cur < 0) throw Error(ErrorKind::NonManifold, "open boundary chain");
        } while (cur != v);
        double area2 = 0.0;
        for (size_t i = 0; i < loop.vertices.size(); ++i) {
            const Vec2& p = m.vertices_[loop.vertices[i]];
            const Vec2& q = m.vertices_[loop.vertices[(i + 1) % loop.vertices.size()]];
            area2 += cross(p, q);
        }
        loop.signed_area = 0.5 * area2;
        visited += static_cast<int>(loop.vertices.size());
        m.loops_.push_back(std::move(loop));
    }
    if (visited != nbe) throw Error(ErrorKind::NonManifold, "boundary edges do not form closed loops");
    int outer = -1;
    for (int i = 0; i < static_cast<int>(m.loops_.size()); ++i) {
        if (m.loops_[i].signed_area > 0.0) {
            if (outer >= 0) throw Error(ErrorKind::NonManifold, "more than one counter-clockwise boundary loop");
            outer = i;
        }
    }
    if (outer < 0) throw Error(ErrorKind::NonManifold, "no outer boundary loop");
    // Outer loop first, holes after, in discovery order.
    std::rotate(m.loops_.begin(), m.loops_.begin() + outer, m.loops_.begin() + outer + 1);
    m.loops_[0].outer = true;
    for (size_t i = 0; i < m.loops_.size(); ++i)
        for (int v : m.loops_[i].vertices) m.vertex_loop_[v] = static_cast<int>(i);

    if (m.combinatorial_euler() != m.euler_characteristic())
        throw Error(ErrorKind::NonManifold, "V - E + F = " + std::to_string(m.combinatorial_euler()) +
                                                " disagrees with boundary loop count");

    double sum = 0.0;
    m.min_edge_ = 1e300;
    for (int e = 0; e < m.num_edges(); ++e) {
        const double l = m.edge_length(e);
        sum += l;
        m.min_edge_ = std::min(m.min_edge_, l);
    }
    m.mean_edge_ = sum / m.num_edges();

    m.locator_ = std::make_shared<PointLocator>(m.vertices_, m.triangles_);
    if (report) *report = local;
    return m;
}

int TriMesh::neighbor(int t, int i) const {
    const Edge& e = edges_[tri_edges_[t][i]];
    return e.tri[0] == t ? e.tri[1] : e.tri[0];
}

int TriMesh::find_edge(int a, int b) const {
    auto it = edge_lookup_.find(edge_key(a, b));
    return it == edge_lookup_.end() ? -1 : it->second;
}

std::span<const int> TriMesh::vertex_triangles(int v) const {
    return {vt_data_.data() + vt_offsets_[v], static_cast<size_t>(vt_offsets_[v + 1] - vt_offsets_[v])};
}

std::span<const int> TriMesh::vertex_neighbors(int v) const {
    return {vv_data_.data() + vv_offsets_[v], static_cast<size_t>(vv_offsets_[v + 1] - vv_offsets_[v])};
}

double TriMesh::triangle_area(int t) const {
    const auto& tr = triangles_[t];
    return 0.5 * orient2d(vertices_[tr[0]], vertices_[tr[1]], vertices_[tr[2]]);
}

Vec2 TriMesh::triangle_centroid(int t) const {
    const auto& tr = triangles_[t];
    return (vertices_[tr[0]] + vertices_[tr[1]] + vertices_[tr[2]]) / 3.0;
}

double TriMesh::corner_angle(int t, int i) const {
    const auto& tr = triangles_[t];
    const Vec2& p = vertices_[tr[i]];
    const Vec2 a = vertices_[tr[(i + 1) % 3]] - p;
    const Vec2 b = vertices_[tr[(i + 2) % 3]] - p;
    return std::atan2(cross(a, b), dot(a, b));
}

double TriMesh::edge_length(int e) const {
    return distance(vertices_[edges_[e].v[0]], vertices_[edges_[e].v[1]]);
}

double TriMesh::local_edge_length(int v) const {
    const auto nb = vertex_neighbors(v);
    double s = 0.0;
    for (int w : nb) s += distance(vertices_[v], vertices_[w]);
    return nb.empty() ? mean_edge_ : s / static_cast<double>(nb.size());
}

PointLocation TriMesh::locate(const Vec2& p) const { return locator_->locate(p); }

const PointLocator& TriMesh::locator() const { return *locator_; }

std::vector<double> turning_angles(const TriMesh& mesh) {
    std::vector<double> turning(mesh.num_vertices(), 0.0);
    for (const auto& loop : mesh.boundary_loops()) {
        for (int v : loop.vertices) {
            const auto tris = mesh.vertex_triangles(v);
            if (tris.empty())
                throw Error(ErrorKind::InvalidArgument, "boundary vertex " + std::to_string(v) + " has no triangles");
            double alpha = 0.0;
            for (int t : tris) {
                const auto& tr = mesh.triangle(t);
                const int i = tr[0] == v ? 0 : (tr[1] == v ? 1 : 2);
                alpha += mesh.corner_angle(t, i);
            }
            turning[v] = kPi - alpha;
        }
    }
    return turning;
}

int corner_quarters(double turning) { return static_cast<int>(std::lround(turning / kHalfPi)); }

}  // namespace quadforge
