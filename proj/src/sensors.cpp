#include "fsd/sensors.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fsd/csv.hpp"

namespace fsd::sensors {

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::kGnssPos: return "gnss_pos";
        case Kind::kIns: return "ins";
        case Kind::kWheelSpeed: return "wheel_speed";
        case Kind::kLidarOdom: return "lidar_odom";
        case Kind::kConeScan: return "cone_scan";
        case Kind::kCameraDetections: return "camera_detections";
    }
    throw std::logic_error("kind_name: bad kind");
}

Kind kind_from_name(const std::string& name) {
    for (int k = 0; k <= 5; ++k)
        if (kind_name(static_cast<Kind>(k)) == name) return static_cast<Kind>(k);
    throw std::runtime_error("unknown measurement kind: " + name);
}

std::vector<Vec2> Measurement::scan_points() const {
    if (kind != Kind::kConeScan) throw std::logic_error("scan_points: wrong kind");
    std::vector<Vec2> pts(values.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {values[2 * i], values[2 * i + 1]};
    return pts;
}

std::vector<CameraDetection> Measurement::detections() const {
    if (kind != Kind::kCameraDetections) throw std::logic_error("detections: wrong kind");
    std::vector<CameraDetection> dets(values.size() / 4);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        dets[i].color = values[4 * i] == 1.0 ? track::ConeColor::kRed : track::ConeColor::kBlue;
        dets[i].confidence = values[4 * i + 1];
        dets[i].u = values[4 * i + 2];
        dets[i].v = values[4 * i + 3];
    }
    return dets;
}

bool SensorTiming::due(double t) const {
    const double period = 1.0 / rate_hz;
    const double ticks = t / period;
    return std::abs(ticks - std::round(ticks)) < 1e-6;
}

bool SensorTiming::dropped(double t) const {
    for (const auto& w : dropouts)
        if (t >= w.t_start && t < w.t_end) return true;
    return false;
}

namespace {

std::vector<DropoutWindow> parse_dropouts(const std::string& text) {
    // "t0:t1[,t0:t1...]"
    std::vector<DropoutWindow> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("dropout window must be start:end, got '" + item + "'");
        DropoutWindow w;
        w.t_start = std::stod(item.substr(0, colon));
        w.t_end = std::stod(item.substr(colon + 1));
        if (w.t_end < w.t_start) throw ConfigError("dropout window ends before it starts");
        out.push_back(w);
    }
    // Non-overlap invariant.
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j)
            if (out[i].t_start < out[j].t_end && out[j].t_start < out[i].t_end)
                throw ConfigError("dropout windows overlap");
    return out;
}

std::string dump_dropouts(const std::vector<DropoutWindow>& windows) {
    std::string s;
    for (const auto& w : windows) {
        if (!s.empty()) s += ",";
        s += format_double(w.t_start) + ":" + format_double(w.t_end);
    }
    return s;
}

}  // namespace

SensorSchedule SensorSchedule::from_config(const Config& cfg) {
    SensorSchedule s;
    s.gnss.rate_hz = cfg.get_double("sensors.gnss_rate", s.gnss.rate_hz);
    s.ins.rate_hz = cfg.get_double("sensors.ins_rate", s.ins.rate_hz);
    s.wheel.rate_hz = cfg.get_double("sensors.wheel_rate", s.wheel.rate_hz);
    s.lidar_odom.rate_hz = cfg.get_double("sensors.lidar_odom_rate", s.lidar_odom.rate_hz);
    s.cone_scan.rate_hz = cfg.get_double("sensors.cone_scan_rate", s.cone_scan.rate_hz);
    s.camera.rate_hz = cfg.get_double("sensors.camera_rate", s.camera.rate_hz);

    s.gnss.dropouts = parse_dropouts(cfg.get_str("sensors.gnss_dropout", ""));
    s.ins.dropouts = parse_dropouts(cfg.get_str("sensors.ins_dropout", ""));
    s.wheel.dropouts = parse_dropouts(cfg.get_str("sensors.wheel_dropout", ""));
    s.lidar_odom.dropouts = parse_dropouts(cfg.get_str("sensors.lidar_odom_dropout", ""));
    s.cone_scan.dropouts = parse_dropouts(cfg.get_str("sensors.cone_scan_dropout", ""));
    s.camera.dropouts = parse_dropouts(cfg.get_str("sensors.camera_dropout", ""));

    s.gnss_sigma = cfg.get_double("sensors.gnss_sigma", s.gnss_sigma);
    s.ins_sigma_a = cfg.get_double("sensors.ins_sigma_a", s.ins_sigma_a);
    s.ins_sigma_gyro = cfg.get_double("sensors.ins_sigma_gyro", s.ins_sigma_gyro);
    s.wheel_sigma = cfg.get_double("sensors.wheel_sigma", s.wheel_sigma);
    s.lidar_odom_sigma_xy = cfg.get_double("sensors.lidar_odom_sigma_xy", s.lidar_odom_sigma_xy);
    s.lidar_odom_sigma_psi = cfg.get_double("sensors.lidar_odom_sigma_psi", s.lidar_odom_sigma_psi);

    s.cone_scan_range = cfg.get_double("sensors.cone_scan_range", s.cone_scan_range);
    s.lidar_fov_deg = cfg.get_double("sensors.lidar_fov_deg", s.lidar_fov_deg);
    s.cone_scan_sigma = cfg.get_double("sensors.cone_scan_sigma", s.cone_scan_sigma);
    s.cone_points_min = cfg.get_int("sensors.cone_points_min", s.cone_points_min);
    s.cone_points_max = cfg.get_int("sensors.cone_points_max", s.cone_points_max);

    s.camera_range = cfg.get_double("sensors.camera_range", s.camera_range);
    s.camera_fov_deg = cfg.get_double("sensors.camera_fov_deg", s.camera_fov_deg);
    s.camera_pixel_sigma = cfg.get_double("sensors.camera_pixel_sigma", s.camera_pixel_sigma);
    s.camera_misdetect = cfg.get_double("sensors.camera_misdetect", s.camera_misdetect);
    s.validate();
    return s;
}

void SensorSchedule::to_config(Config& cfg) const {
    cfg.set("sensors.gnss_rate", gnss.rate_hz);
    cfg.set("sensors.ins_rate", ins.rate_hz);
    cfg.set("sensors.wheel_rate", wheel.rate_hz);
    cfg.set("sensors.lidar_odom_rate", lidar_odom.rate_hz);
    cfg.set("sensors.cone_scan_rate", cone_scan.rate_hz);
    cfg.set("sensors.camera_rate", camera.rate_hz);
    cfg.set("sensors.gnss_dropout", dump_dropouts(gnss.dropouts));
    cfg.set("sensors.ins_dropout", dump_dropouts(ins.dropouts));
    cfg.set("sensors.wheel_dropout", dump_dropouts(wheel.dropouts));
    cfg.set("sensors.lidar_odom_dropout", dump_dropouts(lidar_odom.dropouts));
    cfg.set("sensors.cone_scan_dropout", dump_dropouts(cone_scan.dropouts));
    cfg.set("sensors.camera_dropout", dump_dropouts(camera.dropouts));
    cfg.set("sensors.gnss_sigma", gnss_sigma);
    cfg.set("sensors.ins_sigma_a", ins_sigma_a);
    cfg.set("sensors.ins_sigma_gyro", ins_sigma_gyro);
    cfg.set("sensors.wheel_sigma", wheel_sigma);
    cfg.set("sensors.lidar_odom_sigma_xy", lidar_odom_sigma_xy);
    cfg.set("sensors.lidar_odom_sigma_psi", lidar_odom_sigma_psi);
    cfg.set("sensors.cone_scan_range", cone_scan_range);
    cfg.set("sensors.lidar_fov_deg", lidar_fov_deg);
    cfg.set("sensors.cone_scan_sigma", cone_scan_sigma);
    cfg.set("sensors.cone_points_min", cone_points_min);
    cfg.set("sensors.cone_points_max", cone_points_max);
    cfg.set("sensors.camera_range", camera_range);
    cfg.set("sensors.camera_fov_deg", camera_fov_deg);
    cfg.set("sensors.camera_pixel_sigma", camera_pixel_sigma);
    cfg.set("sensors.camera_misdetect", camera_misdetect);
}

void SensorSchedule::validate() const {
    for (const SensorTiming* t : {&gnss, &ins, &wheel, &lidar_odom, &cone_scan, &camera})
        if (!(t->rate_hz > 0.0)) throw ConfigError("sensor rates must be > 0");
    if (!(camera_misdetect >= 0.0 && camera_misdetect < 1.0))
        throw ConfigError("camera_misdetect must be in [0, 1)");
    if (cone_points_min < 1 || cone_points_max < cone_points_min)
        throw ConfigError("cone point count bounds invalid");
}

Homography::Homography() : a_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Homography::Homography(const std::array<double, 9>& a) : a_(a) {
    if (std::abs(a_[8]) < 1e-15) throw std::invalid_argument("Homography: a33 must be nonzero");
    for (auto& v : a_) v /= a_[8];
    a_[8] = 1.0;
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = a_[3 * r + c];
    if (std::abs(m.determinant()) < 1e-15)
        throw std::invalid_argument("Homography: matrix is singular");
}

Vec2 Homography::apply(const Vec2& pixel) const {
    const double u = pixel.x, v = pixel.y;
    const double xp = u * a_[0] + v * a_[3] + a_[6];
    const double yp = u * a_[1] + v * a_[4] + a_[7];
    const double wp = u * a_[2] + v * a_[5] + a_[8];
    if (std::abs(wp) < 1e-12) throw std::domain_error("apply_homography: point at the horizon");
    return {xp / wp, yp / wp};
}

Homography Homography::inverse() const {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = a_[3 * r + c];
    const Eigen::Matrix3d inv = m.inverse();
    std::array<double, 9> a;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a[3 * r + c] = inv(r, c);
    return Homography(a);
}

Homography estimate_homography(const std::array<PixelGroundPair, 4>& pairs) {
    // Two equations per pair in the eight unknowns (a33 = 1):
    //   u a11 + v a21 + a31 - x (u a13 + v a23) = x
    //   u a12 + v a22 + a32 - y (u a13 + v a23) = y
    Eigen::Matrix<double, 8, 8> m = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> rhs;
    for (int i = 0; i < 4; ++i) {
        const double u = pairs[i].first.x, v = pairs[i].first.y;
        const double x = pairs[i].second.x, y = pairs[i].second.y;
        m(2 * i, 0) = u;
        m(2 * i, 1) = v;
        m(2 * i, 2) = 1.0;
        m(2 * i, 6) = -x * u;
        m(2 * i, 7) = -x * v;
        rhs(2 * i) = x;
        m(2 * i + 1, 3) = u;
        m(2 * i + 1, 4) = v;
        m(2 * i + 1, 5) = 1.0;
        m(2 * i + 1, 6) = -y * u;
        m(2 * i + 1, 7) = -y * v;
        rhs(2 * i + 1) = y;
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(m);
    lu.setThreshold(1e-10);
    if (lu.rank() < 8)
        throw std::runtime_error("estimate_homography: degenerate point configuration");
    const Eigen::Matrix<double, 8, 1> sol = lu.solve(rhs);
    // sol = [a11 a21 a31 a12 a22 a32 a13 a23]
    return Homography({sol(0), sol(3), sol(6), sol(1), sol(4), sol(7), sol(2), sol(5), 1.0});
}

bool CameraModel::project(const Vec2& ground_body, Vec2* pixel) const {
    // Body frame: x forward, y left, z up; camera at (0, 0, h) pitched down
    // by `pitch_down`. Relative ground point is (g.x, g.y, -h); camera axes
    // in body coordinates: forward (cp, 0, -sp), right (0, -1, 0),
    // down (-sp, 0, -cp).
    const double cp = std::cos(pitch_down), sp = std::sin(pitch_down);
    const Vec2& g = ground_body;
    const double zc = cp * g.x + sp * mount_height;   // depth along optical axis
    const double xc = -g.y;                           // right
    const double yd = -sp * g.x + cp * mount_height;  // down
    if (zc <= 1e-6) return false;
    const double u = cx + fx * xc / zc;
    const double v = cy + fy * yd / zc;
    if (u < 0.0 || u > width || v < 0.0 || v > height) return false;
    *pixel = {u, v};
    return true;
}

Homography CameraModel::calibrate() const {
    // Four ground points well inside the view, as in a manual calibration.
    const std::array<Vec2, 4> ground = {Vec2{3.0, -1.5}, Vec2{3.0, 1.5}, Vec2{9.0, -3.0},
                                        Vec2{9.0, 3.0}};
    std::array<PixelGroundPair, 4> pairs;
    for (int i = 0; i < 4; ++i) {
        Vec2 px;
        if (!project(ground[i], &px))
            throw std::runtime_error("camera calibration point outside the image");
        pairs[i] = {px, ground[i]};
    }
    return estimate_homography(pairs);
}

CameraModel CameraModel::from_config(const Config& cfg) {
    CameraModel c;
    c.fx = cfg.get_double("camera.fx", c.fx);
    c.fy = cfg.get_double("camera.fy", c.fy);
    c.cx = cfg.get_double("camera.cx", c.cx);
    c.cy = cfg.get_double("camera.cy", c.cy);
    c.width = cfg.get_int("camera.width", c.width);
    c.height = cfg.get_int("camera.height", c.height);
    c.mount_height = cfg.get_double("camera.mount_height", c.mount_height);
    c.pitch_down = cfg.get_double("camera.pitch_down", c.pitch_down);
    return c;
}

void CameraModel::to_config(Config& cfg) const {
    cfg.set("camera.fx", fx);
    cfg.set("camera.fy", fy);
    cfg.set("camera.cx", cx);
    cfg.set("camera.cy", cy);
    cfg.set("camera.width", width);
    cfg.set("camera.height", height);
    cfg.set("camera.mount_height", mount_height);
    cfg.set("camera.pitch_down", pitch_down);
}

SensorSampler::SensorSampler(const SensorSchedule& schedule, const CameraModel& camera,
                             const dynamics::VehicleParams& params, std::uint64_t seed)
    : schedule_(schedule), camera_(camera), params_(params), rng_(seed) {
    schedule_.validate();
}

std::vector<Measurement> SensorSampler::sample(const dynamics::VehicleState& truth,
                                               const track::Track& track, double t) {
    std::vector<Measurement> out;
    const Vec2 pos{truth.x, truth.y};

    if (schedule_.gnss.due(t) && !schedule_.gnss.dropped(t)) {
        Measurement m{t, Kind::kGnssPos, {}};
        m.values = {truth.x + rng_.gaussian(0.0, schedule_.gnss_sigma),
                    truth.y + rng_.gaussian(0.0, schedule_.gnss_sigma)};
        out.push_back(std::move(m));
    }

    if (schedule_.ins.due(t) && !schedule_.ins.dropped(t)) {
        // Body-frame accelerometer: a_meas = v_dot - [v_y r, -v_x r].
        const auto d = dynamics::derivative(truth, {}, 0.0, params_);
        const double ax_body = d[dynamics::kU] - truth.v * truth.r;
        const double ay_body = d[dynamics::kV] + truth.u * truth.r;
        Measurement m{t, Kind::kIns, {}};
        m.values = {ax_body + rng_.gaussian(0.0, schedule_.ins_sigma_a),
                    ay_body + rng_.gaussian(0.0, schedule_.ins_sigma_a),
                    truth.r + rng_.gaussian(0.0, schedule_.ins_sigma_gyro)};
        out.push_back(std::move(m));
    }

    if (schedule_.wheel.due(t) && !schedule_.wheel.dropped(t)) {
        Measurement m{t, Kind::kWheelSpeed, {}};
        m.values = {truth.u + rng_.gaussian(0.0, schedule_.wheel_sigma)};
        out.push_back(std::move(m));
    }

    if (schedule_.lidar_odom.due(t) && !schedule_.lidar_odom.dropped(t)) {
        Measurement m{t, Kind::kLidarOdom, {}};
        m.values = {truth.x + rng_.gaussian(0.0, schedule_.lidar_odom_sigma_xy),
                    truth.y + rng_.gaussian(0.0, schedule_.lidar_odom_sigma_xy),
                    wrap_angle(truth.psi + rng_.gaussian(0.0, schedule_.lidar_odom_sigma_psi))};
        out.push_back(std::move(m));
    }

    if (schedule_.cone_scan.due(t) && !schedule_.cone_scan.dropped(t)) {
        Measurement m{t, Kind::kConeScan, {}};
        const double fov_half = schedule_.lidar_fov_deg * M_PI / 180.0 / 2.0;
        for (const auto& cone : track.all_cones()) {
            const Vec2 body = world_to_body(cone.position, pos, truth.psi);
            const double range = body.norm();
            if (range > schedule_.cone_scan_range || range < 0.3) continue;
            if (std::abs(std::atan2(body.y, body.x)) > fov_half) continue;
            const int n_pts = rng_.uniform_int(schedule_.cone_points_min, schedule_.cone_points_max);
            for (int i = 0; i < n_pts; ++i) {
                m.values.push_back(body.x + rng_.gaussian(0.0, schedule_.cone_scan_sigma));
                m.values.push_back(body.y + rng_.gaussian(0.0, schedule_.cone_scan_sigma));
            }
        }
        out.push_back(std::move(m));
    }

    if (schedule_.camera.due(t) && !schedule_.camera.dropped(t)) {
        Measurement m{t, Kind::kCameraDetections, {}};
        const double fov_half = schedule_.camera_fov_deg * M_PI / 180.0 / 2.0;
        for (const auto& cone : track.all_cones()) {
            const Vec2 body = world_to_body(cone.position, pos, truth.psi);
            const double range = body.norm();
            if (range > schedule_.camera_range || body.x < 0.5) continue;
            if (std::abs(std::atan2(body.y, body.x)) > fov_half) continue;
            Vec2 px;
            if (!camera_.project(body, &px)) continue;
            track::ConeColor color = cone.color;
            if (rng_.bernoulli(schedule_.camera_misdetect))
                color = color == track::ConeColor::kRed ? track::ConeColor::kBlue
                                                        : track::ConeColor::kRed;
            // Confidence peaked near 0.9, as a stand-in for detector scores.
            const double conf = std::clamp(rng_.beta(18.0, 2.0), 0.55, 0.995);
            m.values.push_back(static_cast<double>(static_cast<int>(color)));
            m.values.push_back(conf);
            m.values.push_back(px.x + rng_.gaussian(0.0, schedule_.camera_pixel_sigma));
            m.values.push_back(px.y + rng_.gaussian(0.0, schedule_.camera_pixel_sigma));
        }
        out.push_back(std::move(m));
    }

    return out;
}

void save_measurements_csv(const std::string& path, const std::vector<Measurement>& log) {
    CsvWriter w(path);
    w.header({"t", "kind", "values..."});
    for (const auto& m : log) {
        w.field(m.t);
        w.field(kind_name(m.kind));
        for (double v : m.values) w.field(v);
        w.end_row();
    }
}

std::vector<Measurement> load_measurements_csv(const std::string& path) {
    std::vector<Measurement> log;
    for (const auto& row : read_csv(path, true)) {
        if (row.size() < 2) throw std::runtime_error("measurement csv: short row");
        Measurement m;
        m.t = std::stod(row[0]);
        m.kind = kind_from_name(row[1]);
        for (std::size_t i = 2; i < row.size(); ++i)
            if (!row[i].empty()) m.values.push_back(std::stod(row[i]));
        log.push_back(std::move(m));
    }
    return log;
}

}  // namespace fsd::sensors
