#pragma once

#include <string>
#include <vector>

#include "fsd/geometry.hpp"
#include "fsd/track.hpp"

namespace fsd::gridmap {

struct CellIndex {
    int i{0};  // along x
    int j{0};  // along y
};

struct ConeDetection {
    Vec2 position;  // body frame, transformed by the observer pose on integration
    track::ConeColor color{track::ConeColor::kBlue};
    double confidence{0.5};  // in (0, 1)
};

struct ExtractedCone {
    Vec2 position;  // world frame
    track::ConeColor color{track::ConeColor::kBlue};
    double strength{0.0};  // peak log-odds of the blob
};

// Log-odds increment for a single cell: S_next = clamp(S + lomeas, +-s_max).
double update_cell(double s_prev, double lomeas, double s_max);

// Two-channel (red/blue) log-odds grid. S = 0 is uninformed; evidence adds.
// The grid grows on demand; growth re-indexes without moving cell contents
// relative to the world.
class ConeMap {
public:
    explicit ConeMap(double resolution = 0.1, double s_max = 10.0);

    double resolution() const { return resolution_; }
    double s_max() const { return s_max_; }
    Vec2 origin() const { return origin_; }
    int cells_x() const { return nx_; }
    int cells_y() const { return ny_; }

    // Floor rule; a point exactly on a boundary belongs to the upper cell.
    CellIndex world_to_cell(const Vec2& p) const;
    Vec2 cell_center(const CellIndex& c) const;
    bool in_bounds(const CellIndex& c) const;

    double log_odds(track::ConeColor channel, const CellIndex& c) const;

    // Adds lomeas at the world point, growing the map as needed.
    void add_evidence(track::ConeColor channel, const Vec2& world, double lomeas);

    // Body-frame detections observed from `pose` stamped into the map.
    // Each detection adds log(p / (1-p)) at its cell plus `stamp_weight`
    // times that on the 8 neighbours (0 disables the stamp). A confidence
    // outside (0, 1) is an input error.
    void integrate_detections(const std::vector<ConeDetection>& detections, const Pose2& pose,
                              double stamp_weight = 0.3);

    // Colourless range-sensor candidates: weak evidence into both channels.
    void integrate_uncolored(const std::vector<Vec2>& positions_body, const Pose2& pose,
                             double confidence = 0.6, double stamp_weight = 0.3);

    // Per-channel local maxima above threshold, one cone per 8-connected
    // blob (log-odds-weighted centroid). A cell over threshold in both
    // channels counts only for the stronger one.
    std::vector<ExtractedCone> extract_cones(double threshold) const;

    void save_pgm(track::ConeColor channel, const std::string& path) const;

private:
    void ensure_contains(const Vec2& p);
    double& at(std::vector<double>& ch, const CellIndex& c);
    const double& at(const std::vector<double>& ch, const CellIndex& c) const;

    double resolution_;
    double s_max_;
    Vec2 origin_;  // world position of cell (0, 0) corner
    int nx_{0}, ny_{0};
    std::vector<double> red_, blue_;
};

}  // namespace fsd::gridmap
