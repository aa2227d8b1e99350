#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsd/config.hpp"
#include "fsd/geometry.hpp"

namespace fsd::track {

enum class ConeColor : int { kRed = 1, kBlue = 2 };

struct Cone {
    Vec2 position;
    ConeColor color{ConeColor::kBlue};
};

// Centerline primitive. Straight when kappa == 0, else a circular arc of
// radius 1/|kappa| (kappa > 0 turns left).
struct Segment {
    Vec2 start;
    double heading{0.0};
    double length{0.0};
    double kappa{0.0};

    Vec2 point_at(double s) const;
    double heading_at(double s) const;
};

struct TrackSpec {
    int n_segments{6};       // corner count; <= 1 gives a pure circle of min_radius
    double min_radius{16.0}; // m, smallest corner radius
    double width{4.0};       // m, cone row separation
    double spacing{5.0};     // m, cone pitch along the centerline
    double scale{38.0};      // m, loop size (0 = 3 * min_radius)

    static TrackSpec from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

struct Track {
    std::vector<Segment> segments;  // closed CCW loop
    std::vector<Cone> blue_cones;   // left of travel
    std::vector<Cone> red_cones;    // right of travel
    double width{4.0};
    double spacing{5.0};

    double total_length() const;
    Vec2 centerline_at(double s) const;
    double heading_at(double s) const;
    double kappa_at(double s) const;

    std::vector<Cone> all_cones() const;
    void save_cones_csv(const std::string& path) const;
    static std::vector<Cone> load_cones_csv(const std::string& path);
    void save_centerline_csv(const std::string& path, double ds = 0.5) const;
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Smooth closed loop of straights and constant-radius arcs, cones offset
// +-width/2 at every `spacing` meters of centerline arc length. Retries a
// few jittered layouts and throws GenerationError if none is feasible.
Track generate_loop(const TrackSpec& spec, std::uint64_t seed);

struct PathSample {
    double s{0.0};
    Vec2 position;
    double heading{0.0};
    double kappa{0.0};
    double ey_min{0.0};  // corridor, contains 0
    double ey_max{0.0};
};

struct PathFrame {
    double e_y{0.0};    // m, left positive
    double e_psi{0.0};  // rad
    double s{0.0};      // m
};

struct OffTrackError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ReferencePath {
public:
    ReferencePath() = default;
    ReferencePath(std::vector<PathSample> samples, bool closed);

    static ReferencePath from_track(const Track& track, double ds = 0.5,
                                    double cone_radius = 0.15);

    const std::vector<PathSample>& samples() const { return samples_; }
    bool closed() const { return closed_; }
    double length() const { return length_; }
    double wrap_s(double s) const;

    // Arc-length projection of a pose onto the path. Throws OffTrackError
    // when the pose is farther than max_distance from every segment.
    PathFrame project(const Vec2& position, double psi, double max_distance = 10.0) const;

    PathSample interpolate(double s) const;
    double kappa_at(double s) const;    // throws std::out_of_range outside [0, length]
    double heading_at(double s) const;

    void save_csv(const std::string& path) const;

private:
    std::vector<PathSample> samples_;
    bool closed_{false};
    double length_{0.0};
};

inline PathFrame path_frame(const ReferencePath& path, const Vec2& position, double psi) {
    return path.project(position, psi);
}
inline double curvature_at(const ReferencePath& path, double s) { return path.kappa_at(s); }

}  // namespace fsd::track
