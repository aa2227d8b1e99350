#pragma once

#include <array>
#include <string>
#include <vector>

#include "fsd/config.hpp"
#include "fsd/dynamics.hpp"
#include "fsd/geometry.hpp"
#include "fsd/rng.hpp"
#include "fsd/track.hpp"

namespace fsd::sensors {

enum class Kind : int {
    kGnssPos = 0,
    kIns = 1,
    kWheelSpeed = 2,
    kLidarOdom = 3,
    kConeScan = 4,
    kCameraDetections = 5,
};

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

struct CameraDetection {
    track::ConeColor color{track::ConeColor::kBlue};
    double confidence{0.0};  // in (0, 1)
    double u{0.0};           // px, bounding-box bottom midpoint
    double v{0.0};           // px
};

// One timestamped sensor sample. `values` layout depends on kind:
//   gnss_pos:   x, y
//   ins:        a_x, a_y, yaw_rate          (body-frame accelerometer + gyro)
//   wheel:      v_x
//   lidar_odom: x, y, psi
//   cone_scan:  x1, y1, x2, y2, ...         (body frame)
//   camera:     color1, conf1, u1, v1, ...  (color as 1=red, 2=blue)
struct Measurement {
    double t{0.0};
    Kind kind{Kind::kGnssPos};
    std::vector<double> values;

    std::vector<Vec2> scan_points() const;
    std::vector<CameraDetection> detections() const;
};

struct DropoutWindow {
    double t_start{0.0};
    double t_end{0.0};
};

struct SensorTiming {
    double rate_hz{10.0};
    std::vector<DropoutWindow> dropouts;

    bool due(double t) const;
    bool dropped(double t) const;
};

struct SensorSchedule {
    SensorTiming gnss{10.0, {}};
    SensorTiming ins{100.0, {}};
    SensorTiming wheel{100.0, {}};
    SensorTiming lidar_odom{5.0, {}};
    SensorTiming cone_scan{10.0, {}};
    SensorTiming camera{10.0, {}};

    double gnss_sigma{0.8};
    double ins_sigma_a{0.3};
    double ins_sigma_gyro{0.03};
    double wheel_sigma{0.2};
    double lidar_odom_sigma_xy{0.2};
    double lidar_odom_sigma_psi{0.06};

    double cone_scan_range{10.0};
    double lidar_fov_deg{360.0};
    double cone_scan_sigma{0.03};
    int cone_points_min{5};
    int cone_points_max{20};

    double camera_range{15.0};
    double camera_fov_deg{100.0};
    double camera_pixel_sigma{1.0};
    double camera_misdetect{0.02};

    static SensorSchedule from_config(const Config& cfg);
    void to_config(Config& cfg) const;
    void validate() const;
};

// Row-vector perspective map between the image plane and the ground plane:
// [x', y', w'] = [u, v, 1] * A with a33 normalized to 1.
class Homography {
public:
    Homography();  // identity
    explicit Homography(const std::array<double, 9>& a);

    double at(int row, int col) const { return a_[3 * row + col]; }
    const std::array<double, 9>& coefficients() const { return a_; }

    // Throws std::domain_error when the point maps to the line at infinity.
    Vec2 apply(const Vec2& pixel) const;

    Homography inverse() const;

private:
    std::array<double, 9> a_;
};

using PixelGroundPair = std::pair<Vec2, Vec2>;  // (pixel, ground)

// Direct linear estimate from exactly four correspondences; throws
// std::runtime_error on a degenerate (rank-deficient) configuration.
Homography estimate_homography(const std::array<PixelGroundPair, 4>& pairs);

inline Vec2 apply_homography(const Homography& h, const Vec2& pixel) { return h.apply(pixel); }

// Forward-looking pinhole camera on flat ground; pixels of cone/ground
// contact points. Body frame is x forward, y left.
struct CameraModel {
    double fx{270.0};
    double fy{270.0};
    double cx{320.0};
    double cy{240.0};
    int width{640};
    int height{480};
    double mount_height{0.8};   // m above ground
    double pitch_down{0.33};    // rad, optical axis below horizontal

    // Pixel of a ground point given in the body frame. Returns false when
    // the point is behind the camera or projects outside the image.
    bool project(const Vec2& ground_body, Vec2* pixel) const;

    // Reference pixel->ground homography recovered from four synthetic
    // calibration pairs, the simulated stand-in for joint calibration.
    Homography calibrate() const;

    static CameraModel from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

class SensorSampler {
public:
    SensorSampler(const SensorSchedule& schedule, const CameraModel& camera,
                  const dynamics::VehicleParams& params, std::uint64_t seed);

    // Measurements due at time t for the given ground truth. `track` supplies
    // cone positions for the scan and camera channels.
    std::vector<Measurement> sample(const dynamics::VehicleState& truth,
                                    const track::Track& track, double t);

    const SensorSchedule& schedule() const { return schedule_; }

private:
    SensorSchedule schedule_;
    CameraModel camera_;
    dynamics::VehicleParams params_;
    Rng rng_;
};

void save_measurements_csv(const std::string& path, const std::vector<Measurement>& log);
std::vector<Measurement> load_measurements_csv(const std::string& path);

}  // namespace fsd::sensors
