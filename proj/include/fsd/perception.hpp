#pragma once

#include <vector>

#include "fsd/geometry.hpp"

namespace fsd::perception {

struct Cluster {
    Vec2 centroid;
    Vec2 extent;  // axis-aligned envelope (dx, dy)
    int count{0};
};

// Single-linkage Euclidean clustering: points are in one cluster iff they
// are connected through hops of length <= eps. Clusters smaller than
// min_pts are discarded. Accelerated by a uniform grid of cell size eps;
// the partition is identical to connected components of the eps-graph.
std::vector<Cluster> cluster_points(const std::vector<Vec2>& points, double eps, int min_pts);

struct SizeBounds {
    double max_extent{0.5};  // m, per axis (closed bound)
    int max_count{200};
};

// Keeps clusters whose envelope fits a cone.
std::vector<Cluster> filter_by_size(const std::vector<Cluster>& clusters, const SizeBounds& bounds);

// Convenience: cluster, then size-filter.
std::vector<Cluster> detect_cones(const std::vector<Vec2>& points, double eps, int min_pts,
                                  const SizeBounds& bounds);

}  // namespace fsd::perception
