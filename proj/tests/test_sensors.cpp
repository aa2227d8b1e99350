#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fsd/rng.hpp"
#include "fsd/sensors.hpp"
#include "fsd/track.hpp"

using namespace fsd;
using namespace fsd::sensors;

namespace {

std::array<PixelGroundPair, 4> unit_square_pairs(double scale) {
    return {PixelGroundPair{{0, 0}, {0, 0}}, PixelGroundPair{{1, 0}, {scale, 0}},
            PixelGroundPair{{1, 1}, {scale, scale}}, PixelGroundPair{{0, 1}, {0, scale}}};
}

}  // namespace

TEST_CASE("homography: unit square to itself is the identity") {
    const Homography h = estimate_homography(unit_square_pairs(1.0));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(h.at(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("homography: uniform scale") {
    const Homography h = estimate_homography(unit_square_pairs(2.0));
    CHECK(h.at(0, 0) == doctest::Approx(2.0));
    CHECK(h.at(1, 1) == doctest::Approx(2.0));
    CHECK(h.at(2, 2) == doctest::Approx(1.0));
    CHECK(std::abs(h.at(0, 1)) < 1e-9);
}

TEST_CASE("homography: identity and translation application") {
    const Homography id;
    const Vec2 p = id.apply({3.5, -2.0});
    CHECK(p.x == 3.5);
    CHECK(p.y == -2.0);

    const Homography t(std::array<double, 9>{1, 0, 0, 0, 1, 0, 4.0, -1.0, 1});
    const Vec2 q = t.apply({3.5, -2.0});
    CHECK(q.x == doctest::Approx(7.5));
    CHECK(q.y == doctest::Approx(-3.0));
}

TEST_CASE("homography: random nondegenerate quads round trip to 1e-9") {
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        std::array<PixelGroundPair, 4> pairs;
        // Perturbed square keeps the configuration nondegenerate.
        const Vec2 base[4] = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
        for (int i = 0; i < 4; ++i) {
            pairs[i].first = {base[i].x + rng.uniform(-2.0, 2.0),
                              base[i].y + rng.uniform(-2.0, 2.0)};
            pairs[i].second = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
        }
        Homography h;
        try {
            h = estimate_homography(pairs);
        } catch (const std::exception&) {
            continue;  // random ground points can be collinear; skip
        }
        for (const auto& [px, gnd] : pairs) {
            const Vec2 mapped = h.apply(px);
            CHECK(std::abs(mapped.x - gnd.x) < 1e-9);
            CHECK(std::abs(mapped.y - gnd.y) < 1e-9);
        }
    }
}

TEST_CASE("homography: degenerate pixels rejected") {
    std::array<PixelGroundPair, 4> pairs = {
        PixelGroundPair{{0, 0}, {0, 0}}, PixelGroundPair{{1, 1}, {1, 0}},
        PixelGroundPair{{2, 2}, {1, 1}}, PixelGroundPair{{5, 3}, {0, 1}}};
    CHECK_THROWS_AS(estimate_homography(pairs), std::runtime_error);
}

TEST_CASE("homography: scale invariance of the projective map") {
    const Homography h =
        estimate_homography({PixelGroundPair{{0, 0}, {1, 2}}, PixelGroundPair{{10, 1}, {4, 2}},
                             PixelGroundPair{{9, 11}, {4, 7}}, PixelGroundPair{{-1, 10}, {0, 6}}});
    std::array<double, 9> scaled;
    for (int i = 0; i < 9; ++i) scaled[i] = 3.7 * h.coefficients()[i];
    const Homography h2(scaled);  // constructor renormalizes a33
    Rng rng(23);
    for (int i = 0; i < 20; ++i) {
        const Vec2 px{rng.uniform(-5.0, 15.0), rng.uniform(-5.0, 15.0)};
        const Vec2 a = h.apply(px), b = h2.apply(px);
        CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
        CHECK(a.y == doctest::Approx(b.y).epsilon(1e-12));
    }
}

TEST_CASE("camera model: axis symmetry") {
    const CameraModel cam;
    Vec2 center_px, left_px, right_px;
    REQUIRE(cam.project({6.0, 0.0}, &center_px));
    CHECK(center_px.x == doctest::Approx(cam.cx));

    REQUIRE(cam.project({6.0, 1.5}, &left_px));
    REQUIRE(cam.project({6.0, -1.5}, &right_px));
    CHECK(left_px.x == doctest::Approx(2.0 * cam.cx - right_px.x));
    CHECK(left_px.y == doctest::Approx(right_px.y));
    CHECK(left_px.x < cam.cx);  // left of the body maps left of center
}

TEST_CASE("camera model: behind-camera points are not visible") {
    const CameraModel cam;
    Vec2 px;
    CHECK_FALSE(cam.project({-3.0, 0.0}, &px));
}

TEST_CASE("camera calibration: pixel-to-ground round trip") {
    const CameraModel cam;
    const Homography h = cam.calibrate();
    Rng rng(31);
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        const Vec2 g{rng.uniform(1.5, 12.0), rng.uniform(-4.0, 4.0)};
        Vec2 px;
        if (!cam.project(g, &px)) continue;
        const Vec2 back = h.apply(px);
        CHECK(std::abs(back.x - g.x) < 1e-6);
        CHECK(std::abs(back.y - g.y) < 1e-6);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("sampler: zero noise reproduces the truth exactly") {
    SensorSchedule sched;
    sched.gnss_sigma = 0.0;
    sched.ins_sigma_a = 0.0;
    sched.ins_sigma_gyro = 0.0;
    sched.wheel_sigma = 0.0;
    sched.lidar_odom_sigma_xy = 0.0;
    sched.lidar_odom_sigma_psi = 0.0;
    const track::Track trk = track::generate_loop(track::TrackSpec{}, 1);
    SensorSampler sampler(sched, CameraModel{}, dynamics::VehicleParams{}, 5);

    dynamics::VehicleState truth;
    truth.x = 3.0;
    truth.y = -2.0;
    truth.psi = 0.4;
    truth.u = 4.0;
    const auto ms = sampler.sample(truth, trk, 0.0);
    bool saw_gnss = false, saw_wheel = false;
    for (const auto& m : ms) {
        if (m.kind == Kind::kGnssPos) {
            CHECK(m.values[0] == 3.0);
            CHECK(m.values[1] == -2.0);
            saw_gnss = true;
        }
        if (m.kind == Kind::kWheelSpeed) {
            CHECK(m.values[0] == 4.0);
            saw_wheel = true;
        }
    }
    CHECK(saw_gnss);
    CHECK(saw_wheel);
}

TEST_CASE("sampler: rates select which sensors fire") {
    SensorSchedule sched;  // gnss 10 Hz, ins 100 Hz
    const track::Track trk = track::generate_loop(track::TrackSpec{}, 1);
    SensorSampler sampler(sched, CameraModel{}, dynamics::VehicleParams{}, 5);
    dynamics::VehicleState truth;
    truth.x = 15.0;
    truth.u = 2.0;

    const auto at = [&](double t) {
        auto ms = sampler.sample(truth, trk, t);
        std::set<Kind> kinds;
        for (const auto& m : ms) kinds.insert(m.kind);
        return kinds;
    };
    const auto k0 = at(0.0);
    CHECK(k0.count(Kind::kGnssPos) == 1);
    CHECK(k0.count(Kind::kIns) == 1);
    const auto k1 = at(0.01);
    CHECK(k1.count(Kind::kGnssPos) == 0);  // between 10 Hz ticks
    CHECK(k1.count(Kind::kIns) == 1);
}

TEST_CASE("sampler: dropout windows silence a sensor") {
    SensorSchedule sched;
    sched.lidar_odom.dropouts = {{1.0, 2.0}};
    const track::Track trk = track::generate_loop(track::TrackSpec{}, 1);
    SensorSampler sampler(sched, CameraModel{}, dynamics::VehicleParams{}, 5);
    dynamics::VehicleState truth;
    truth.x = 15.0;
    truth.u = 2.0;

    for (double t : {0.0, 0.4, 0.8, 2.0, 2.4}) {
        const auto ms = sampler.sample(truth, trk, t);
        const bool has = std::any_of(ms.begin(), ms.end(), [](const Measurement& m) {
            return m.kind == Kind::kLidarOdom;
        });
        CHECK(has);
    }
    for (double t : {1.0, 1.2, 1.8}) {
        const auto ms = sampler.sample(truth, trk, t);
        const bool has = std::any_of(ms.begin(), ms.end(), [](const Measurement& m) {
            return m.kind == Kind::kLidarOdom;
        });
        CHECK_FALSE(has);
    }
}

TEST_CASE("sampler: empirical noise std dev within 5% of configured") {
    SensorSchedule sched;
    sched.gnss_sigma = 0.5;
    const track::Track trk = track::generate_loop(track::TrackSpec{}, 1);
    SensorSampler sampler(sched, CameraModel{}, dynamics::VehicleParams{}, 99);
    dynamics::VehicleState truth;
    truth.x = 15.0;
    truth.u = 2.0;

    double sum = 0.0, sum2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto ms = sampler.sample(truth, trk, i * 0.1);
        for (const auto& m : ms)
            if (m.kind == Kind::kGnssPos) {
                const double e = m.values[0] - truth.x;
                sum += e;
                sum2 += e * e;
            }
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    CHECK(std::sqrt(var) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("sampler: reproducible bit for bit under a fixed seed") {
    SensorSchedule sched;
    const track::Track trk = track::generate_loop(track::TrackSpec{}, 1);
    dynamics::VehicleState truth;
    truth.x = 15.0;
    truth.u = 2.0;

    const auto run = [&] {
        SensorSampler sampler(sched, CameraModel{}, dynamics::VehicleParams{}, 1234);
        std::vector<Measurement> all;
        for (int i = 0; i < 50; ++i) {
            auto ms = sampler.sample(truth, trk, i * 0.01);
            all.insert(all.end(), ms.begin(), ms.end());
        }
        return all;
    };
    const auto a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].values.size() == b[i].values.size());
        for (std::size_t j = 0; j < a[i].values.size(); ++j)
            CHECK(a[i].values[j] == b[i].values[j]);
    }
}

TEST_CASE("measurement csv round trip is exact") {
    SensorSchedule sched;
    const track::Track trk = track::generate_loop(track::TrackSpec{}, 1);
    SensorSampler sampler(sched, CameraModel{}, dynamics::VehicleParams{}, 7);
    dynamics::VehicleState truth;
    truth.x = 15.0;
    truth.u = 2.0;
    std::vector<Measurement> all;
    for (int i = 0; i < 30; ++i) {
        auto ms = sampler.sample(truth, trk, i * 0.01);
        all.insert(all.end(), ms.begin(), ms.end());
    }
    const std::string path = "/tmp/fsd_test_meas.csv";
    save_measurements_csv(path, all);
    const auto loaded = load_measurements_csv(path);
    REQUIRE(loaded.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(loaded[i].t == all[i].t);
        CHECK(loaded[i].kind == all[i].kind);
        REQUIRE(loaded[i].values.size() == all[i].values.size());
        for (std::size_t j = 0; j < all[i].values.size(); ++j)
            CHECK(loaded[i].values[j] == all[i].values[j]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("dropout config parsing rejects overlap") {
    Config cfg;
    cfg.set("sensors.lidar_odom_dropout", "1:5,4:8");
    CHECK_THROWS_AS(SensorSchedule::from_config(cfg), ConfigError);
}
