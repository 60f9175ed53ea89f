#include "quadforge/point_locator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "quadforge/error.hpp"
#include "quadforge/tri_mesh.hpp"

namespace quadforge {

namespace {
constexpr double kInsideTol = 1e-12;
}

PointLocator::PointLocator(std::vector<Vec2> points, std::vector<std::array<int, 3>> triangles)
    : points_(std::move(points)), tris_(std::move(triangles)) {
    for (const auto& t : tris_)
        for (int v : t) bbox_.expand(points_[v]);
    eps_ = 1e-9 * bbox_.diagonal();

    adjacency_.assign(tris_.size(), {-1, -1, -1});
    std::unordered_map<std::uint64_t, std::pair<int, int>> half;
    half.reserve(tris_.size() * 3);
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        for (int i = 0; i < 3; ++i) {
            const auto key = edge_key(tris_[t][i], tris_[t][(i + 1) % 3]);
            auto [it, inserted] = half.try_emplace(key, t, i);
            if (!inserted) {
                adjacency_[t][i] = it->second.first;
                adjacency_[it->second.first][it->second.second] = t;
            }
        }
    }

    const double n = std::max(1.0, std::sqrt(static_cast<double>(tris_.size()) / 2.0));
    const double w = std::max(bbox_.hi.x - bbox_.lo.x, 1e-300);
    const double h = std::max(bbox_.hi.y - bbox_.lo.y, 1e-300);
    const double aspect = w / h;
    nx_ = std::max(1, static_cast<int>(std::ceil(n * std::sqrt(aspect))));
    ny_ = std::max(1, static_cast<int>(std::ceil(n / std::sqrt(aspect))));
    cell_w_ = w / nx_;
    cell_h_ = h / ny_;

    std::vector<std::vector<int>> cells(static_cast<size_t>(nx_) * ny_);
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        BBox b;
        for (int v : tris_[t]) b.expand(points_[v]);
        const int x0 = std::clamp(static_cast<int>((b.lo.x - eps_ - bbox_.lo.x) / cell_w_), 0, nx_ - 1);
        const int x1 = std::clamp(static_cast<int>((b.hi.x + eps_ - bbox_.lo.x) / cell_w_), 0, nx_ - 1);
        const int y0 = std::clamp(static_cast<int>((b.lo.y - eps_ - bbox_.lo.y) / cell_h_), 0, ny_ - 1);
        const int y1 = std::clamp(static_cast<int>((b.hi.y + eps_ - bbox_.lo.y) / cell_h_), 0, ny_ - 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) cells[static_cast<size_t>(y) * nx_ + x].push_back(t);
    }
    cell_offsets_.assign(cells.size() + 1, 0);
    for (size_t c = 0; c < cells.size(); ++c) cell_offsets_[c + 1] = cell_offsets_[c] + static_cast<int>(cells[c].size());
    cell_tris_.reserve(cell_offsets_.back());
    for (const auto& c : cells) cell_tris_.insert(cell_tris_.end(), c.begin(), c.end());
}

int PointLocator::cell_of(const Vec2& p) const {
    const int x = std::clamp(static_cast<int>((p.x - bbox_.lo.x) / cell_w_), 0, nx_ - 1);
    const int y = std::clamp(static_cast<int>((p.y - bbox_.lo.y) / cell_h_), 0, ny_ - 1);
    return y * nx_ + x;
}

std::array<double, 3> PointLocator::barycentric(int t, const Vec2& p) const {
    const Vec2& a = points_[tris_[t][0]];
    const Vec2& b = points_[tris_[t][1]];
    const Vec2& c = points_[tris_[t][2]];
    const double area2 = orient2d(a, b, c);
    const double l0 = orient2d(p, b, c) / area2;
    const double l1 = orient2d(a, p, c) / area2;
    return {l0, l1, 1.0 - l0 - l1};
}

Vec2 PointLocator::interpolate(const PointLocation& loc, const std::array<Vec2, 3>& values) const {
    return values[0] * loc.bary[0] + values[1] * loc.bary[1] + values[2] * loc.bary[2];
}

std::optional<PointLocation> PointLocator::walk(int t, const Vec2& p) const {
    const int max_steps = static_cast<int>(tris_.size()) + 8;
    for (int step = 0; step < max_steps; ++step) {
        const auto l = barycentric(t, p);
        int worst = 0;
        for (int i = 1; i < 3; ++i)
            if (l[i] < l[worst]) worst = i;
        if (l[worst] >= -kInsideTol) return PointLocation{t, l, false};
        // The edge opposite corner `worst` is local edge (worst+1)%3.
        const int next = adjacency_[t][(worst + 1) % 3];
        if (next < 0) return std::nullopt;
        t = next;
    }
    return std::nullopt;
}

std::optional<PointLocation> PointLocator::snap(const Vec2& p) const {
    if (!bbox_.contains(p, eps_)) return std::nullopt;
    double best = std::numeric_limits<double>::infinity();
    PointLocation result;
    const int c = cell_of(p);
    for (int k = cell_offsets_[c]; k < cell_offsets_[c + 1]; ++k) {
        const int t = cell_tris_[k];
        for (int i = 0; i < 3; ++i) {
            if (adjacency_[t][i] >= 0) continue;
            const Vec2& a = points_[tris_[t][i]];
            const Vec2& b = points_[tris_[t][(i + 1) % 3]];
            const Vec2 q = closest_point_on_segment(p, a, b);
            const double d = distance(p, q);
            if (d < best) {
                best = d;
                auto l = barycentric(t, q);
                for (double& x : l) x = std::max(x, 0.0);
                const double s = l[0] + l[1] + l[2];
                result = PointLocation{t, {l[0] / s, l[1] / s, 1.0 - l[0] / s - l[1] / s}, true};
            }
        }
    }
    if (best <= eps_) return result;
    return std::nullopt;
}

std::optional<PointLocation> PointLocator::try_locate(const Vec2& p) const {
    if (tris_.empty()) return std::nullopt;
    if (!bbox_.contains(p, eps_)) return std::nullopt;
    const int c = cell_of(p);
    const int begin = cell_offsets_[c];
    const int end = cell_offsets_[c + 1];
    const int seed = begin < end ? cell_tris_[begin] : 0;
    if (auto loc = walk(seed, p)) return loc;
    for (int k = begin; k < end; ++k) {
        const int t = cell_tris_[k];
        const auto l = barycentric(t, p);
        if (l[0] >= -kInsideTol && l[1] >= -kInsideTol && l[2] >= -kInsideTol)
            return PointLocation{t, l, false};
    }
    return snap(p);
}

PointLocation PointLocator::locate(const Vec2& p) const {
    if (auto loc = try_locate(p)) return *loc;
    throw Error(ErrorKind::OutsideMesh,
                "point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") is outside the mesh");
}

}  // namespace quadforge
