#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fsd/rng.hpp"
#include "fsd/track.hpp"
#include "oracles.hpp"

using namespace fsd;
using namespace fsd::track;

namespace {

TrackSpec circle_spec(double radius) {
    TrackSpec s;
    s.n_segments = 1;
    s.min_radius = radius;
    s.width = 4.0;
    s.spacing = 5.0;
    return s;
}

}  // namespace

TEST_CASE("pure circle: forced cone count and radii") {
    const Track t = generate_loop(circle_spec(15.0), 1);
    const int expected = static_cast<int>(std::ceil(2.0 * M_PI * 15.0 / 5.0));
    CHECK(static_cast<int>(t.blue_cones.size()) == expected);
    CHECK(static_cast<int>(t.red_cones.size()) == expected);
    // CCW circle: left of travel is toward the center.
    for (const auto& c : t.blue_cones) CHECK(c.position.norm() == doctest::Approx(13.0));
    for (const auto& c : t.red_cones) CHECK(c.position.norm() == doctest::Approx(17.0));
}

TEST_CASE("generation is deterministic in the seed") {
    TrackSpec spec;
    const Track a = generate_loop(spec, 77);
    const Track b = generate_loop(spec, 77);
    REQUIRE(a.blue_cones.size() == b.blue_cones.size());
    for (std::size_t i = 0; i < a.blue_cones.size(); ++i) {
        CHECK(a.blue_cones[i].position.x == b.blue_cones[i].position.x);
        CHECK(a.blue_cones[i].position.y == b.blue_cones[i].position.y);
    }
    const Track c = generate_loop(spec, 78);
    CHECK(a.blue_cones[0].position.x != c.blue_cones[0].position.x);
}

TEST_CASE("spec validation") {
    TrackSpec bad;
    bad.min_radius = 3.0;
    CHECK_THROWS_AS(generate_loop(bad, 1), GenerationError);
    bad = TrackSpec{};
    bad.width = 2.0;
    CHECK_THROWS_AS(generate_loop(bad, 1), GenerationError);
}

TEST_CASE("random specs: same-side cones keep half the nominal pitch") {
    Rng rng(5);
    for (int trial = 0; trial < 8; ++trial) {
        TrackSpec spec;
        spec.n_segments = rng.uniform_int(5, 9);
        spec.min_radius = rng.uniform(8.0, 18.0);
        spec.width = rng.uniform(3.0, 5.0);
        spec.spacing = rng.uniform(4.0, 6.0);
        spec.scale = spec.min_radius * rng.uniform(2.3, 3.2);
        const Track t = generate_loop(spec, 1000 + trial);
        for (const auto* side : {&t.blue_cones, &t.red_cones}) {
            double min_d = 1e9;
            for (std::size_t i = 0; i < side->size(); ++i)
                for (std::size_t j = i + 1; j < side->size(); ++j)
                    min_d = std::min(min_d,
                                     ((*side)[i].position - (*side)[j].position).norm());
            CHECK(min_d >= 0.5 * spec.spacing);
        }
    }
}

TEST_CASE("closed loop: heading winds by exactly one turn") {
    const Track t = generate_loop(TrackSpec{}, 9);
    // Integral of kappa ds over the loop.
    double total_turn = 0.0;
    for (const auto& seg : t.segments) total_turn += seg.kappa * seg.length;
    CHECK(total_turn == doctest::Approx(2.0 * M_PI).epsilon(1e-2));
    // Endpoints coincide.
    const Vec2 end = t.segments.back().point_at(t.segments.back().length);
    CHECK((end - t.segments.front().start).norm() < 1e-6);
}

TEST_CASE("reference path: curvature lookup") {
    const Track t = generate_loop(circle_spec(15.0), 1);
    const ReferencePath ref = ReferencePath::from_track(t);
    CHECK(ref.kappa_at(10.0) == doctest::Approx(1.0 / 15.0).epsilon(1e-6));
    CHECK_THROWS_AS(ref.kappa_at(-5.0), std::out_of_range);
    CHECK_THROWS_AS(ref.kappa_at(ref.length() + 5.0), std::out_of_range);
}

TEST_CASE("curvature: straight, arc, and transition values") {
    Track t = generate_loop(TrackSpec{}, 21);
    // Segments alternate straight / arc by construction.
    double s_accum = 0.0;
    const ReferencePath ref = ReferencePath::from_track(t, 0.25);
    for (const auto& seg : t.segments) {
        const double mid = s_accum + seg.length / 2.0;
        if (seg.length > 1.0) {
            const double k = ref.kappa_at(mid);
            if (seg.kappa == 0.0)
                CHECK(std::abs(k) < 1e-9);
            else
                CHECK(k == doctest::Approx(seg.kappa).epsilon(0.02));
        }
        s_accum += seg.length;
    }

    // Transition: the sampled value at a junction sits between the two
    // segment values (linear interpolation over the bracketing samples).
    double junction = t.segments.front().length;  // straight -> arc
    const double arc_kappa = t.segments[1].kappa;
    const double k_mid = ref.kappa_at(junction);
    CHECK(k_mid >= -1e-12);
    CHECK(k_mid <= arc_kappa + 1e-12);
}

TEST_CASE("path frame: on-path and offset poses") {
    const Track t = generate_loop(TrackSpec{}, 33);
    const ReferencePath ref = ReferencePath::from_track(t);

    const double s_probe = 12.0;
    const Vec2 p = t.centerline_at(s_probe);
    const double h = t.heading_at(s_probe);
    const auto on = ref.project(p, h);
    CHECK(std::abs(on.e_y) < 1e-6);
    CHECK(std::abs(on.e_psi) < 1e-3);
    CHECK(on.s == doctest::Approx(s_probe).epsilon(0.01));

    // 0.3 m to the left of a straight stretch.
    const Vec2 left = p + left_normal(heading_vec(h)) * 0.3;
    const auto off = ref.project(left, h);
    CHECK(off.e_y == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("path frame: off-track poses rejected") {
    const Track t = generate_loop(circle_spec(15.0), 1);
    const ReferencePath ref = ReferencePath::from_track(t);
    CHECK_THROWS_AS(ref.project({100.0, 100.0}, 0.0), OffTrackError);
}

TEST_CASE("path frame: matches dense brute-force projection") {
    const Track t = generate_loop(TrackSpec{}, 55);
    const ReferencePath ref = ReferencePath::from_track(t, 0.25);
    const double total = t.total_length();
    Rng rng(7);
    for (int i = 0; i < 40; ++i) {
        const double s = rng.uniform(0.0, total);
        const Vec2 offset = left_normal(heading_vec(t.heading_at(s))) * rng.uniform(-1.5, 1.5);
        const Vec2 pose = t.centerline_at(s) + offset;
        const auto frame = ref.project(pose, t.heading_at(s));
        const auto brute = oracles::brute_project(
            [&](double ss) { return t.centerline_at(ss); }, total, pose, 20000);
        // Compare distances; s can legitimately differ near equidistant arcs.
        const double d_frame = (ref.interpolate(frame.s).position - pose).norm();
        CHECK(d_frame == doctest::Approx(brute.distance).epsilon(0.01));
        CHECK(std::abs(std::abs(frame.e_y) - brute.distance) < 1e-3);
    }
}

TEST_CASE("path frame: round trip of generated (s, e_y, e_psi)") {
    const Track t = generate_loop(TrackSpec{}, 71);
    const ReferencePath ref = ReferencePath::from_track(t, 0.25);
    Rng rng(13);
    for (int i = 0; i < 60; ++i) {
        const double s = rng.uniform(1.0, t.total_length() - 1.0);
        const double e_y = rng.uniform(-1.2, 1.2);
        const double e_psi = rng.uniform(-0.4, 0.4);
        const double h = t.heading_at(s);
        const Vec2 pose = t.centerline_at(s) + left_normal(heading_vec(h)) * e_y;
        const auto frame = ref.project(pose, h + e_psi);
        CHECK(frame.e_y == doctest::Approx(e_y).epsilon(2e-3));
        CHECK(frame.e_psi == doctest::Approx(e_psi).epsilon(2e-3));
        const double ds = std::abs(frame.s - s);
        CHECK(std::min(ds, t.total_length() - ds) < 0.05);
    }
}

TEST_CASE("cone csv round trip") {
    const Track t = generate_loop(TrackSpec{}, 3);
    const std::string path = "/tmp/fsd_test_cones.csv";
    t.save_cones_csv(path);
    const auto cones = Track::load_cones_csv(path);
    CHECK(cones.size() == t.blue_cones.size() + t.red_cones.size());
    CHECK(cones.front().position.x == t.blue_cones.front().position.x);
    std::filesystem::remove(path);
}

TEST_CASE("projection tie-break picks the smallest s") {
    // Two parallel straights equidistant from the probe.
    std::vector<PathSample> samples;
    for (int i = 0; i <= 10; ++i) {
        PathSample p;
        p.s = i * 1.0;
        p.position = {static_cast<double>(i) <= 5 ? i * 1.0 : 5.0 - (i - 5) * 1.0,
                      static_cast<double>(i) <= 5 ? 0.0 : 2.0};
        p.heading = i <= 5 ? 0.0 : M_PI;
        samples.push_back(p);
    }
    // Fix s to be strictly increasing arc length of that polyline.
    for (int i = 1; i <= 10; ++i)
        samples[i].s = samples[i - 1].s + (samples[i].position - samples[i - 1].position).norm();
    const ReferencePath ref(samples, false);
    const auto frame = ref.project({2.5, 1.0}, 0.0);
    CHECK(frame.s == doctest::Approx(2.5).epsilon(1e-6));
}
