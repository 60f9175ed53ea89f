#include "quadforge/crossfield_mbo.hpp"

#include <cmath>
#include <limits>

#include "quadforge/error.hpp"

namespace quadforge {

namespace {
Vec2 representation(const Vec2& tangent) {
    const double a = 4.0 * angle_of(tangent);
    return {std::cos(a), std::sin(a)};
}
}  // namespace

std::vector<Vec2> boundary_alignment(const TriMesh& mesh) {
    std::vector<Vec2> out(mesh.num_vertices());
    for (const auto& loop : mesh.boundary_loops()) {
        const auto& lv = loop.vertices;
        const int n = static_cast<int>(lv.size());
        for (int i = 0; i < n; ++i) {
            const Vec2& prev = mesh.vertex(lv[(i + n - 1) % n]);
            const Vec2& cur = mesh.vertex(lv[i]);
            const Vec2& next = mesh.vertex(lv[(i + 1) % n]);
            if (cur == prev || cur == next)
                throw Error(ErrorKind::DegenerateTriangle, "zero-length boundary edge at vertex " + std::to_string(lv[i]));
            const Vec2 s = representation(cur - prev) + representation(next - cur);
            // Opposite representations (45 degree kinks) have no meaningful average.
            out[lv[i]] = norm(s) > 1e-12 ? normalized(s) : representation(next - cur);
        }
    }
    return out;
}

DiffusionSchedule make_schedule(const TriMesh& mesh, int n_levels, std::vector<std::string>* warnings,
                                double level_tol, double final_tol) {
    if (n_levels < 5 || n_levels > 10) {
        const int clamped = std::clamp(n_levels, 5, 10);
        if (warnings)
            warnings->push_back("n_levels " + std::to_string(n_levels) + " clamped to " + std::to_string(clamped));
        n_levels = clamped;
    }
    DiffusionSchedule s;
    const double first = std::pow(0.1 * mesh.bbox_diagonal(), 2);
    const double last = std::pow(mesh.min_edge_length(), 2);
    if (!(first > last)) {
        s.alpha = {last};
        s.tolerance = {final_tol};
        return s;
    }
    const double ratio = std::pow(last / first, 1.0 / (n_levels - 1));
    for (int i = 0; i < n_levels; ++i) {
        s.alpha.push_back(i + 1 == n_levels ? last : first * std::pow(ratio, i));
        s.tolerance.push_back(i + 1 == n_levels ? final_tol : level_tol);
    }
    return s;
}

Vec2 project_unit(const Vec2& v) {
    const double n = norm(v);
    // Already-unit vectors are returned untouched so projection is idempotent.
    if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return v;
    return n > 1e-14 ? v / n : v;
}

Diffuser::Diffuser(const TriMesh& mesh, double alpha) : mesh_(mesh), alpha_(alpha) {
    const int nv = mesh.num_vertices();
    interior_.assign(nv, -1);
    boundary_.assign(nv, -1);
    int ni = 0, nb = 0;
    for (int v = 0; v < nv; ++v) (mesh.is_boundary_vertex(v) ? boundary_[v] = nb++ : interior_[v] = ni++);
    mass_ = lumped_mass(mesh);
    const SpMat k = p1_stiffness(mesh);
    parts_ = partition(k, interior_, boundary_);
    boundary_block_ = partition(k, boundary_, interior_).inner;
    SpMat a = parts_.inner * alpha;
    for (int v = 0; v < nv; ++v)
        if (interior_[v] >= 0) a.coeffRef(interior_[v], interior_[v]) += mass_[v];
    if (ni > 0) factorize(solver_, a, "diffusion operator");
}

void Diffuser::step(std::vector<Vec2>& v) const {
    const int ni = static_cast<int>(parts_.inner.rows());
    if (ni == 0) return;
    const int nb = static_cast<int>(parts_.coupling.cols());
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd rhs(ni), vb(nb);
        for (int x = 0; x < mesh_.num_vertices(); ++x) {
            const double val = c == 0 ? v[x].x : v[x].y;
            if (interior_[x] >= 0)
                rhs[interior_[x]] = mass_[x] * val;
            else
                vb[boundary_[x]] = val;
        }
        rhs -= alpha_ * (parts_.coupling * vb);
        const Eigen::VectorXd sol = solver_.solve(rhs);
        if (solver_.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "diffusion solve failed");
        for (int x = 0; x < mesh_.num_vertices(); ++x)
            if (interior_[x] >= 0) (c == 0 ? v[x].x : v[x].y) = sol[interior_[x]];
    }
}

double Diffuser::energy(const std::vector<Vec2>& v) const {
    const int ni = static_cast<int>(parts_.inner.rows());
    const int nb = static_cast<int>(parts_.coupling.cols());
    double e = 0.0;
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd mi(ni), vb(nb);
        for (int x = 0; x < mesh_.num_vertices(); ++x) {
            const double val = c == 0 ? v[x].x : v[x].y;
            if (interior_[x] >= 0)
                mi[interior_[x]] = mass_[x] * val;
            else
                vb[boundary_[x]] = val;
        }
        e += vb.dot(boundary_block_ * vb);
        if (ni == 0) continue;
        const Eigen::VectorXd rhs = mi - 2.0 * alpha_ * (parts_.coupling * vb);
        const Eigen::VectorXd sol = solver_.solve(rhs);
        double self = 0.0;
        for (int x = 0; x < mesh_.num_vertices(); ++x)
            if (interior_[x] >= 0) self += mi[interior_[x]] * (c == 0 ? v[x].x : v[x].y);
        e += (self - mi.dot(sol)) / alpha_;
    }
    return 0.5 * e;
}

double dirichlet_energy(const TriMesh& mesh, const std::vector<Vec2>& v) {
    double e = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = p1_basis_gradients(mesh, t);
        const auto& tr = mesh.triangle(t);
        Vec2 gx{}, gy{};
        for (int i = 0; i < 3; ++i) {
            gx += g[i] * v[tr[i]].x;
            gy += g[i] * v[tr[i]].y;
        }
        e += 0.5 * mesh.triangle_area(t) * (norm2(gx) + norm2(gy));
    }
    return e;
}

MboResult mbo_solve(const TriMesh& mesh, const DiffusionSchedule& schedule) {
    MboResult res;
    auto& v = res.field.v;
    v = boundary_alignment(mesh);

    // Start from the harmonic extension of the boundary data.
    {
        std::vector<int> interior(mesh.num_vertices(), -1), boundary(mesh.num_vertices(), -1);
        int ni = 0, nb = 0;
        for (int x = 0; x < mesh.num_vertices(); ++x)
            (mesh.is_boundary_vertex(x) ? boundary[x] = nb++ : interior[x] = ni++);
        if (ni > 0) {
            const Partitioned p = partition(p1_stiffness(mesh), interior, boundary);
            SpSolver solver;
            factorize(solver, p.inner, "harmonic extension");
            for (int c = 0; c < 2; ++c) {
                Eigen::VectorXd vb(nb);
                for (int x = 0; x < mesh.num_vertices(); ++x)
                    if (boundary[x] >= 0) vb[boundary[x]] = c == 0 ? v[x].x : v[x].y;
                const Eigen::VectorXd sol = solver.solve(-(p.coupling * vb));
                for (int x = 0; x < mesh.num_vertices(); ++x)
                    if (interior[x] >= 0) (c == 0 ? v[x].x : v[x].y) = sol[interior[x]];
            }
            for (auto& x : v) x = project_unit(x);
        }
    }

    for (size_t level = 0; level < schedule.alpha.size(); ++level) {
        const Diffuser diffuser(mesh, schedule.alpha[level]);
        std::vector<double> energies;
        int it = 0;
        bool done = false;
        while (it < schedule.max_iterations && !done) {
            std::vector<Vec2> next = v;
            diffuser.step(next);
            double change = 0.0;
            for (int x = 0; x < mesh.num_vertices(); ++x) {
                next[x] = project_unit(next[x]);
                change = std::max(change, norm(next[x] - v[x]));
            }
            v = std::move(next);
            energies.push_back(diffuser.energy(v));
            ++it;
            done = change < schedule.tolerance[level];
        }
        if (!done) res.converged = false;
        res.iterations.push_back(it);
        res.energy.push_back(std::move(energies));
    }
    return res;
}

}  // namespace quadforge
