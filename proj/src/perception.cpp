#include "fsd/perception.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace fsd::perception {

namespace {

using CellKey = std::pair<std::int64_t, std::int64_t>;

CellKey cell_of(const Vec2& p, double eps) {
    return {static_cast<std::int64_t>(std::floor(p.x / eps)),
            static_cast<std::int64_t>(std::floor(p.y / eps))};
}

}  // namespace

std::vector<Cluster> cluster_points(const std::vector<Vec2>& points, double eps, int min_pts) {
    if (!(eps > 0.0)) throw std::invalid_argument("cluster_points: eps must be > 0");
    if (min_pts < 1) throw std::invalid_argument("cluster_points: min_pts must be >= 1");
    const std::size_t n = points.size();
    if (n == 0) return {};

    // Bucket points; neighbors within eps live in the 3x3 cell block.
    std::map<CellKey, std::vector<std::size_t>> grid;
    for (std::size_t i = 0; i < n; ++i) grid[cell_of(points[i], eps)].push_back(i);

    const double eps2 = eps * eps;
    std::vector<int> label(n, -1);
    int n_clusters = 0;
    std::vector<std::size_t> stack;

    for (std::size_t seed = 0; seed < n; ++seed) {
        if (label[seed] >= 0) continue;
        const int cluster = n_clusters++;
        label[seed] = cluster;
        stack.assign(1, seed);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const CellKey ck = cell_of(points[cur], eps);
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                for (std::int64_t dy = -1; dy <= 1; ++dy) {
                    const auto it = grid.find({ck.first + dx, ck.second + dy});
                    if (it == grid.end()) continue;
                    for (std::size_t j : it->second) {
                        if (label[j] >= 0) continue;
                        if ((points[j] - points[cur]).squared_norm() <= eps2) {
                            label[j] = cluster;
                            stack.push_back(j);
                        }
                    }
                }
            }
        }
    }

    std::vector<Cluster> clusters(n_clusters);
    std::vector<Vec2> lo(n_clusters, Vec2{1e300, 1e300});
    std::vector<Vec2> hi(n_clusters, Vec2{-1e300, -1e300});
    for (std::size_t i = 0; i < n; ++i) {
        Cluster& c = clusters[label[i]];
        c.centroid = c.centroid + points[i];
        c.count += 1;
        lo[label[i]].x = std::min(lo[label[i]].x, points[i].x);
        lo[label[i]].y = std::min(lo[label[i]].y, points[i].y);
        hi[label[i]].x = std::max(hi[label[i]].x, points[i].x);
        hi[label[i]].y = std::max(hi[label[i]].y, points[i].y);
    }
    std::vector<Cluster> kept;
    for (int c = 0; c < n_clusters; ++c) {
        if (clusters[c].count < min_pts) continue;
        Cluster out = clusters[c];
        out.centroid = out.centroid * (1.0 / out.count);
        out.extent = hi[c] - lo[c];
        kept.push_back(out);
    }
    return kept;
}

std::vector<Cluster> filter_by_size(const std::vector<Cluster>& clusters,
                                    const SizeBounds& bounds) {
    if (!(bounds.max_extent > 0.0) || bounds.max_count < 1)
        throw std::invalid_argument("filter_by_size: bounds must be positive");
    std::vector<Cluster> kept;
    for (const auto& c : clusters)
        if (c.extent.x <= bounds.max_extent && c.extent.y <= bounds.max_extent &&
            c.count <= bounds.max_count)
            kept.push_back(c);
    return kept;
}

std::vector<Cluster> detect_cones(const std::vector<Vec2>& points, double eps, int min_pts,
                                  const SizeBounds& bounds) {
    return filter_by_size(cluster_points(points, eps, min_pts), bounds);
}

}  // namespace fsd::perception
