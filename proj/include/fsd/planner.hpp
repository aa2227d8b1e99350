#pragma once

#include <stdexcept>
#include <vector>

#include "fsd/geometry.hpp"
#include "fsd/track.hpp"

namespace fsd::planner {

struct Midpoint {
    Vec2 position;
    double half_gap{2.0};  // m, half the paired cone separation
};

struct PlanningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mutual-nearest-neighbour pairing of the two cone rows inside `gate`
// meters; each pair contributes its midpoint. Mutual matching makes the
// result independent of which colour is passed first. Pairs closer than
// `min_gap` are misdetections, not a track section, and are dropped.
// Midpoints come back chained along the track's direction of travel.
// Throws PlanningError when fewer than two pairs survive.
std::vector<Midpoint> pair_cones(const std::vector<Vec2>& blue, const std::vector<Vec2>& red,
                                 double gate = 6.0, double min_gap = 1.0);

// Resamples the midpoint chain at `ds`, headings by central difference and
// curvature from the three-point circumcircle. The corridor at a sample is
// +-(half_gap - margin). Throws PlanningError on a self-intersecting chain
// or fewer than 3 midpoints.
track::ReferencePath build_reference(const std::vector<Midpoint>& midpoints, bool closed,
                                     double ds = 0.5, double margin = 0.15);

// Signed three-point circumcircle curvature (positive for a left turn).
double circumcircle_curvature(const Vec2& a, const Vec2& b, const Vec2& c);

}  // namespace fsd::planner
