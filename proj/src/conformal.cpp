#include "quadforge/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "quadforge/error.hpp"
#include "quadforge/fem.hpp"

namespace quadforge {

namespace {

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) {
        while (p[x] != x) x = p[x] = p[p[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a), b = find(b);
        if (a == b) return false;
        p[std::max(a, b)] = std::min(a, b);
        return true;
    }
};

int local_index(const Tri& tr, int v) {
    for (int i = 0; i < 3; ++i)
        if (tr[i] == v) return i;
    return -1;
}

}  // namespace

bool BranchCut::is_forest(const TriMesh& mesh) const {
    UnionFind uf(mesh.num_vertices());
    for (int e : edges)
        if (!uf.unite(mesh.edge(e).v[0], mesh.edge(e).v[1])) return false;
    return true;
}

int BranchCut::cut_open_euler(const TriMesh& mesh) const {
    int vertices = 0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const auto tris = mesh.vertex_triangles(v);
        std::vector<int> local(tris.begin(), tris.end());
        UnionFind uf(static_cast<int>(local.size()));
        for (size_t a = 0; a < local.size(); ++a) {
            const int t = local[a];
            for (int i = 0; i < 3; ++i) {
                const int e = mesh.triangle_edges(t)[i];
                const auto& ed = mesh.edge(e);
                if (ed.v[0] != v && ed.v[1] != v) continue;
                if (ed.is_boundary() || is_cut[e]) continue;
                const int nb = mesh.neighbor(t, i);
                const auto it = std::find(local.begin(), local.end(), nb);
                uf.unite(static_cast<int>(a), static_cast<int>(it - local.begin()));
            }
        }
        for (size_t a = 0; a < local.size(); ++a) vertices += uf.find(static_cast<int>(a)) == static_cast<int>(a);
    }
    const int edges_open = mesh.num_edges() + static_cast<int>(edges.size());
    return vertices - edges_open + mesh.num_triangles();
}

BranchCut build_branch_cut(const TriMesh& mesh, const SingularityPattern& pattern) {
    const int nv = mesh.num_vertices();
    BranchCut cut;
    cut.is_cut.assign(mesh.num_edges(), 0);

    // Dijkstra over interior edges from the outer boundary.
    std::vector<double> dist(nv, 1e300);
    std::vector<int> parent_edge(nv, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (int v : mesh.boundary_loops()[0].vertices) dist[v] = 0.0, pq.push({0.0, v});
    while (!pq.empty()) {
        const auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[v]) continue;
        for (int u : mesh.vertex_neighbors(v)) {
            const int e = mesh.find_edge(u, v);
            if (mesh.edge(e).is_boundary()) continue;
            const double nd = d + mesh.edge_length(e);
            if (nd < dist[u]) {
                dist[u] = nd;
                parent_edge[u] = e;
                pq.push({nd, u});
            }
        }
    }

    for (const auto& s : pattern.singularities)
        if (!s.boundary || mesh.boundary_loop_of(s.vertex) > 0) cut.anchors.push_back(s.vertex);
    for (size_t l = 1; l < mesh.boundary_loops().size(); ++l) {
        const auto& lv = mesh.boundary_loops()[l].vertices;
        int best = lv[0];
        for (int v : lv)
            if (dist[v] < dist[best] || (dist[v] == dist[best] && v < best)) best = v;
        cut.anchors.push_back(best);
    }
    for (int a : cut.anchors) {
        int v = a;
        while (parent_edge[v] >= 0 && !cut.is_cut[parent_edge[v]]) {
            const int e = parent_edge[v];
            cut.is_cut[e] = 1;
            const auto& ed = mesh.edge(e);
            v = ed.v[0] == v ? ed.v[1] : ed.v[0];
        }
    }
    for (int e = 0; e < mesh.num_edges(); ++e)
        if (cut.is_cut[e]) cut.edges.push_back(e);
    return cut;
}

std::vector<double> h_rhs(const TriMesh& mesh, const SingularityPattern& pattern) {
    const auto turning = turning_angles(mesh);
    std::vector<double> b(mesh.num_vertices(), 0.0);
    std::vector<char> entry(mesh.num_vertices(), 0);
    for (const auto& s : pattern.singularities) {
        entry[s.vertex] = 1;
        b[s.vertex] -= kHalfPi * s.t;
    }
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (!mesh.is_boundary_vertex(v)) continue;
        b[v] += turning[v];
        if (!entry[v]) b[v] -= kHalfPi * corner_quarters(turning[v]);
    }
    return b;
}

HField solve_H(const TriMesh& mesh, const SingularityPattern& pattern) {
    const Validation val = validate(pattern, mesh);
    if (!val.ok) {
        std::string msg = "pattern fails the index balance:";
        for (const auto& p : val.problems) msg += " " + p + ";";
        throw Error(ErrorKind::Incompatible, msg);
    }
    HField h;
    h.rhs = h_rhs(mesh, pattern);
    h.source_mass = val.source_mass;
    h.neumann_mass = val.neumann_mass;
    h.rhs_sum = std::accumulate(h.rhs.begin(), h.rhs.end(), 0.0);
    if (std::abs(h.rhs_sum) > 1e-9)
        throw Error(ErrorKind::Incompatible, "Neumann problem is inconsistent: load sums to " + std::to_string(h.rhs_sum));

    const int nv = mesh.num_vertices();
    const SpMat k = p1_stiffness(mesh);
    // Pin vertex 0, solve, then shift to mass-weighted mean zero.
    std::vector<int> keep(nv), drop(nv, -1);
    keep[0] = -1;
    drop[0] = 0;
    for (int v = 1; v < nv; ++v) keep[v] = v - 1;
    const Partitioned parts = partition(k, keep, drop);
    Eigen::VectorXd rhs(nv - 1);
    for (int v = 1; v < nv; ++v) rhs[v - 1] = h.rhs[v];
    SpSolver solver;
    factorize(solver, parts.inner, "H stiffness");
    const Eigen::VectorXd sol = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "H solve failed");

    Eigen::VectorXd full(nv);
    full[0] = 0.0;
    for (int v = 1; v < nv; ++v) full[v] = sol[v - 1];
    const auto mass = lumped_mass(mesh);
    double mean = 0.0, total = 0.0;
    for (int v = 0; v < nv; ++v) mean += mass[v] * full[v], total += mass[v];
    mean /= total;
    h.values.resize(nv);
    for (int v = 0; v < nv; ++v) h.values[v] = full[v] - mean;

    const Eigen::Map<const Eigen::VectorXd> bvec(h.rhs.data(), nv);
    const Eigen::VectorXd r = k * full - bvec;
    // a load of pure round-off (empty pattern on a polygon) must not inflate the ratio
    const double bn = std::max(bvec.norm(), kHalfPi);
    h.residual = r.norm() / bn;
    if (h.residual > 1e-10) throw Error(ErrorKind::SolverFailure, "H residual too large: " + std::to_string(h.residual));
    return h;
}

int default_anchor_edge(const TriMesh& mesh) {
    const auto& lv = mesh.boundary_loops()[0].vertices;
    int best = -1;
    double best_len = -1.0;
    for (size_t i = 0; i < lv.size(); ++i) {
        const int e = mesh.find_edge(lv[i], lv[(i + 1) % lv.size()]);
        const double len = mesh.edge_length(e);
        if (len > best_len * (1 + 1e-12) || (std::abs(len - best_len) <= 1e-12 * len && e < best))
            best = e, best_len = len;
    }
    return best;
}

namespace {

// Gradient of the CR basis attached to local edge i (1 - 2 lambda of the opposite vertex).
std::array<Vec2, 3> cr_basis_gradients(const TriMesh& mesh, int t) {
    const auto g = p1_basis_gradients(mesh, t);
    return {g[2] * -2.0, g[0] * -2.0, g[1] * -2.0};
}

}  // namespace

ThetaField solve_theta(const TriMesh& mesh, const HField& h, const BranchCut& cut, int anchor_edge) {
    if (anchor_edge < 0) anchor_edge = default_anchor_edge(mesh);
    const auto& ae = mesh.edge(anchor_edge);
    if (!ae.is_boundary() || mesh.boundary_loop_of(ae.v[0]) != 0)
        throw Error(ErrorKind::InvalidArgument, "theta anchor must be an outer boundary edge");

    ThetaField th;
    th.anchor_edge = anchor_edge;
    const int ne = mesh.num_edges();
    // One dof per edge, a second one on the tri[1] side of cut edges.
    std::vector<int> second(ne, -1);
    int ndof = ne;
    for (int e : cut.edges) second[e] = ndof++;
    th.dof.resize(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t)
        for (int i = 0; i < 3; ++i) {
            const int e = mesh.triangle_edges(t)[i];
            th.dof[t][i] = (second[e] >= 0 && mesh.edge(e).tri[1] == t) ? second[e] : e;
        }

    // Anchor value: direction of the boundary edge as traversed with the domain on the left.
    {
        const int t = ae.tri[0];
        const auto& tr = mesh.triangle(t);
        const int i = [&] {
            for (int k = 0; k < 3; ++k)
                if (mesh.triangle_edges(t)[k] == anchor_edge) return k;
            return 0;
        }();
        th.anchor_value = angle_of(mesh.vertex(tr[(i + 1) % 3]) - mesh.vertex(tr[i]));
    }

    // Normal equations of min sum A |grad theta - perp grad H|^2 with the anchor dof eliminated.
    const int pinned = anchor_edge;
    auto col = [&](int d) { return d < pinned ? d : d - 1; };
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof - 1);
    double den = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double a = mesh.triangle_area(t);
        const auto g = cr_basis_gradients(mesh, t);
        const Vec2 target = perp(p1_gradient(mesh, t, h.values));
        den += a * norm2(target);
        for (int i = 0; i < 3; ++i) {
            const int di = th.dof[t][i];
            if (di == pinned) continue;
            rhs[col(di)] += a * dot(g[i], target);
            for (int j = 0; j < 3; ++j) {
                const int dj = th.dof[t][j];
                const double v = a * dot(g[i], g[j]);
                if (dj == pinned)
                    rhs[col(di)] -= v * th.anchor_value;
                else
                    trip.emplace_back(col(di), col(dj), v);
            }
        }
    }
    SpMat n(ndof - 1, ndof - 1);
    n.setFromTriplets(trip.begin(), trip.end());
    SpSolver solver;
    factorize(solver, n, "theta normal equations");
    const Eigen::VectorXd sol = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "theta solve failed");
    th.values.resize(ndof);
    for (int d = 0; d < ndof; ++d) th.values[d] = d == pinned ? th.anchor_value : sol[col(d)];

    double num = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = cr_basis_gradients(mesh, t);
        Vec2 gt{};
        for (int i = 0; i < 3; ++i) gt += g[i] * th.at(t, i);
        num += mesh.triangle_area(t) * norm2(gt - perp(p1_gradient(mesh, t, h.values)));
    }
    th.residual = den > 0 ? num / den : num;

    for (int e : cut.edges) {
        const double jump = th.values[second[e]] - th.values[e];
        const double q = std::round(jump / kHalfPi);
        th.jump_quarters.push_back(static_cast<int>(q));
        th.max_jump_error = std::max(th.max_jump_error, std::abs(jump - q * kHalfPi));
    }
    if (th.max_jump_error > 1e-6)
        throw Error(ErrorKind::InconsistentCut,
                    "theta jump across the cut is not a quarter turn (error " + std::to_string(th.max_jump_error) + ")");
    return th;
}

CrossField::CrossField(const TriMesh& mesh, HField h, BranchCut cut, ThetaField theta)
    : mesh_(&mesh), h_(std::move(h)), cut_(std::move(cut)), theta_(std::move(theta)) {}

CrossSample CrossField::sample(int t, const std::array<double, 3>& bary) const {
    const auto& tr = mesh_->triangle(t);
    CrossSample s;
    s.triangle = t;
    for (int i = 0; i < 3; ++i) {
        s.H += bary[i] * h_.values[tr[i]];
        s.theta += theta_.at(t, i) * (1.0 - 2.0 * bary[(i + 2) % 3]);
    }
    return s;
}

CrossSample CrossField::sample(const Vec2& p) const {
    const auto loc = mesh_->locate(p);
    return sample(loc.triangle, loc.bary);
}

std::array<Vec2, 4> CrossField::branches(const CrossSample& s) {
    const double r = std::exp(s.H);
    return {from_angle(s.theta) * r, from_angle(s.theta + kHalfPi) * r, from_angle(s.theta + kPi) * r,
            from_angle(s.theta + 1.5 * kPi) * r};
}

Vec2 CrossField::grad_H(int t) const { return p1_gradient(*mesh_, t, h_.values); }

Vec2 CrossField::grad_theta(int t) const {
    const auto g = cr_basis_gradients(*mesh_, t);
    Vec2 r{};
    for (int i = 0; i < 3; ++i) r += g[i] * theta_.at(t, i);
    return r;
}

double CrossField::theta_centroid(int t) const {
    return (theta_.at(t, 0) + theta_.at(t, 1) + theta_.at(t, 2)) / 3.0;
}

double CrossField::conjugacy_residual(const std::vector<char>& keep) const {
    double num = 0.0, den = 0.0;
    for (int t = 0; t < mesh_->num_triangles(); ++t) {
        if (!keep.empty() && !keep[t]) continue;
        const double a = mesh_->triangle_area(t);
        const Vec2 gh = grad_H(t);
        num += a * norm2(grad_theta(t) - perp(gh));
        den += a * norm2(gh);
    }
    return den > 0 ? num / den : num;
}

SingularityPattern redetect(const CrossField& field) {
    const TriMesh& m = field.mesh();
    const auto turning = turning_angles(m);
    const auto tags = corner_tags(m);
    SingularityPattern p;
    p.chi = m.euler_characteristic();
    for (int v = 0; v < m.num_vertices(); ++v) {
        const bool bnd = m.is_boundary_vertex(v);
        // Start triangle: any for interior vertices, the one holding the
        // outgoing boundary edge otherwise.
        int t = m.vertex_triangles(v)[0];
        if (bnd) {
            for (int c : m.vertex_triangles(v)) {
                const int j = local_index(m.triangle(c), v);
                if (m.neighbor(c, j) < 0) t = c;
            }
        }
        const int start = t;
        std::vector<double> chain;
        do {
            const int j = local_index(m.triangle(t), v);
            chain.push_back(4.0 * field.theta().at(t, j));
            chain.push_back(4.0 * field.theta_centroid(t));
            chain.push_back(4.0 * field.theta().at(t, (j + 2) % 3));
            t = m.neighbor(t, (j + 2) % 3);
        } while (t >= 0 && t != start);
        double sum = 0.0;
        for (size_t i = 0; i + 1 < chain.size(); ++i) sum += principal_angle(chain[i + 1] - chain[i]);
        int q;
        if (!bnd) {
            sum += principal_angle(chain.front() - chain.back());
            q = static_cast<int>(std::lround(sum / kTwoPi));
            if (q == 0) continue;
        } else {
            q = static_cast<int>(std::lround((4.0 * turning[v] + sum) / kTwoPi));
            if (q == tags[v]) continue;
        }
        Singularity s;
        s.vertex = v;
        s.position = m.vertex(v);
        s.boundary = bnd;
        s.t = q;
        s.valence = valence_from_t(q, bnd);
        p.singularities.push_back(s);
    }
    return p;
}

TangencyReport check_tangency(const CrossField& field, double tol_rad) {
    const TriMesh& m = field.mesh();
    TangencyReport r;
    r.tolerance = tol_rad;
    for (int e = 0; e < m.num_edges(); ++e) {
        const auto& ed = m.edge(e);
        if (!ed.is_boundary()) continue;
        const int t = ed.tri[0];
        const auto& tr = m.triangle(t);
        int i = 0;
        while (m.triangle_edges(t)[i] != e) ++i;
        const Vec2 a = m.vertex(tr[i]), b = m.vertex(tr[(i + 1) % 3]);
        const double dev = std::abs(mod_distance(field.theta().at(t, i) - angle_of(b - a), kHalfPi));
        r.max_deviation = std::max(r.max_deviation, dev);
        if (dev >= tol_rad) r.violations.push_back({e, (a + b) * 0.5, dev, m.boundary_loop_of(tr[i])});
    }
    r.meshable = r.violations.empty();
    return r;
}

}  // namespace quadforge
