#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsd/dynamics.hpp"
#include "fsd/rng.hpp"
#include "oracles.hpp"

using namespace fsd;
using namespace fsd::dynamics;

namespace {

VehicleParams params() { return {}; }

VehicleState random_state(Rng& rng) {
    VehicleState s;
    s.x = rng.uniform(-20.0, 20.0);
    s.y = rng.uniform(-20.0, 20.0);
    s.psi = rng.uniform(-3.0, 3.0);
    s.u = rng.uniform(1.5, 8.0);
    s.v = rng.uniform(-1.0, 1.0);
    s.r = rng.uniform(-1.0, 1.0);
    s.delta_f = rng.uniform(-0.3, 0.3);
    s.a_x = rng.uniform(-3.0, 3.0);
    s.e_y = rng.uniform(-1.0, 1.0);
    s.e_psi = rng.uniform(-0.5, 0.5);
    return s;
}

}  // namespace

TEST_CASE("slip angles: zero lateral motion gives zero slip") {
    VehicleState s;
    s.u = 5.0;
    const auto slip = slip_angles(s, params());
    CHECK(slip.front == doctest::Approx(0.0));
    CHECK(slip.rear == doctest::Approx(0.0));
}

TEST_CASE("slip angles: hand-evaluated case") {
    VehicleState s;
    s.u = 10.0;
    s.v = 0.5;
    s.r = 0.2;
    s.delta_f = 0.05;
    const auto slip = slip_angles(s, params());
    // atan((0.5 + 0.8*0.2)/10) - 0.05 and atan((0.5 - 0.8*0.2)/10)
    CHECK(slip.front == doctest::Approx(0.0159042).epsilon(1e-4));
    CHECK(slip.rear == doctest::Approx(0.0339869).epsilon(1e-4));
}

TEST_CASE("slip angles: steering that cancels the kinematic angle") {
    VehicleState s;
    s.v = 1.0;
    for (double u : {2.0, 5.0, 11.0}) {
        s.u = u;
        s.delta_f = std::atan(1.0 / u);
        CHECK(slip_angles(s, params()).front == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("slip angles: domain error below u_min") {
    VehicleState s;
    s.u = 0.3;
    CHECK_THROWS_AS(slip_angles(s, params()), std::domain_error);
}

TEST_CASE("tire forces: linear, odd, 1-homogeneous") {
    const auto p = params();
    CHECK(tire_forces({0.0, 0.0}, p).front == 0.0);
    CHECK(tire_forces({0.01, 0.0}, p).front == doctest::Approx(-500.0));

    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double af = rng.uniform(-0.1, 0.1), ar = rng.uniform(-0.1, 0.1);
        const auto fwd = tire_forces({af, ar}, p);
        const auto neg = tire_forces({-af, -ar}, p);
        CHECK(fwd.front == doctest::Approx(-neg.front));
        CHECK(fwd.rear == doctest::Approx(-neg.rear));
        const auto scaled = tire_forces({3.0 * af, 3.0 * ar}, p);
        CHECK(scaled.front == doctest::Approx(3.0 * fwd.front));
        CHECK(scaled.rear == doctest::Approx(3.0 * fwd.rear));
    }
}

TEST_CASE("derivative: straight rolling state") {
    VehicleState s;
    s.u = 5.0;
    const auto d = derivative(s, {}, 0.0, params());
    CHECK(d[kX] == doctest::Approx(5.0));
    for (int i : {kY, kPsi, kU, kV, kR, kDeltaF, kAx, kEy, kEpsi})
        CHECK(d[i] == doctest::Approx(0.0));
}

TEST_CASE("derivative: lateral error row") {
    VehicleState s;
    s.u = 5.0;
    s.e_psi = 0.1;
    const auto d = derivative(s, {}, 0.0, params());
    CHECK(d[kEy] == doctest::Approx(0.5));
}

TEST_CASE("derivative: rows match independent scalar evaluation") {
    const auto p = params();
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const VehicleState s = random_state(rng);
        const ControlRates u{rng.uniform(-1.0, 1.0), rng.uniform(-5.0, 5.0)};
        const double kappa = rng.uniform(-0.1, 0.1);
        const auto d = derivative(s, u, kappa, p);

        const double af = std::atan((s.v + p.lf * s.r) / s.u) - s.delta_f;
        const double ar = std::atan((s.v - p.lr * s.r) / s.u);
        const double fyf = -p.cf * af, fyr = -p.cr * ar;

        CHECK(d[kX] == doctest::Approx(s.u * std::cos(s.psi) - s.v * std::sin(s.psi)));
        CHECK(d[kY] == doctest::Approx(s.u * std::sin(s.psi) + s.v * std::cos(s.psi)));
        CHECK(d[kPsi] == doctest::Approx(s.r));
        CHECK(d[kU] == doctest::Approx(s.a_x));
        CHECK(d[kV] == doctest::Approx((fyf + fyr) / p.mass - s.u * s.r));
        CHECK(d[kR] == doctest::Approx((fyf * p.lf - fyr * p.lr) / p.inertia_zz));
        CHECK(d[kDeltaF] == doctest::Approx(u.zeta_f));
        CHECK(d[kAx] == doctest::Approx(u.j_x));
        CHECK(d[kEy] == doctest::Approx(s.u * s.e_psi + s.v));
        CHECK(d[kEpsi] == doctest::Approx(s.r - s.u * kappa));
    }
}

TEST_CASE("derivative: e_y row identity on random states") {
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        const VehicleState s = random_state(rng);
        const auto d = derivative(s, {}, 0.0, params());
        CHECK(d[kEy] == s.u * s.e_psi + s.v);
    }
}

TEST_CASE("step: straight motion integrated exactly") {
    VehicleState s;
    s.u = 4.0;
    const VehicleState next = step(s, {}, 0.0, 0.01, params());
    CHECK(next.x == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(next.y == doctest::Approx(0.0));
    CHECK(next.u == doctest::Approx(4.0));
}

TEST_CASE("step: dt validation") {
    VehicleState s;
    s.u = 4.0;
    CHECK_THROWS_AS(step(s, {}, 0.0, 0.0, params()), std::invalid_argument);
    CHECK_THROWS_AS(step(s, {}, 0.0, 0.06, params()), std::invalid_argument);
}

TEST_CASE("step: RK4 self-convergence order over a curved maneuver") {
    const auto p = params();
    const ControlRates u{0.2, 1.0};
    const double kappa = 0.05;
    VehicleState start;
    start.u = 5.0;
    start.v = 0.2;
    start.r = 0.1;
    start.delta_f = 0.05;

    // Integrate 1 s at several step sizes against a dt/64 reference.
    const auto integrate = [&](double dt) {
        VehicleState s = start;
        const int n = static_cast<int>(std::llround(1.0 / dt));
        for (int i = 0; i < n; ++i) s = step(s, u, kappa, dt, p);
        return s;
    };
    const VehicleState ref = integrate(0.04 / 64.0);
    const auto err = [&](const VehicleState& s) {
        const auto a = s.to_array(), b = ref.to_array();
        double e = 0.0;
        for (int i = 0; i < 10; ++i) e = std::max(e, std::abs(a[i] - b[i]));
        return e;
    };
    const double e1 = err(integrate(0.04));
    const double e2 = err(integrate(0.02));
    const double e3 = err(integrate(0.01));
    const double order12 = std::log2(e1 / e2);
    const double order23 = std::log2(e2 / e3);
    CHECK(order12 > 3.9);
    CHECK(order23 > 3.9);
}

TEST_CASE("step: reversed controls return near start on a straight segment") {
    // Straight rolling with zero accel: stepping with +u then -u must bring
    // every row except the traveled distance back within 1e-6.
    const auto p = params();
    VehicleState s;
    s.u = 5.0;
    const ControlRates fwd{0.1, 0.5};
    const ControlRates back{-0.1, -0.5};
    const double dt = 1e-4;
    const VehicleState mid = step(s, fwd, 0.0, dt, p);
    const VehicleState end = step(mid, back, 0.0, dt, p);
    const auto a = s.to_array(), b = end.to_array();
    for (int i = 0; i < 10; ++i) {
        if (i == kX) continue;  // the car rolled forward
        CHECK(std::abs(a[i] - b[i]) < 1e-6);
    }
    CHECK(end.x == doctest::Approx(2.0 * 5.0 * dt).epsilon(1e-6));
}

TEST_CASE("jacobians: analytic matches finite differences") {
    const auto p = params();
    Rng rng(23);
    double max_rel = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const VehicleState s = random_state(rng);
        const ControlRates u{rng.uniform(-1.0, 1.0), rng.uniform(-5.0, 5.0)};
        const double kappa = rng.uniform(-0.1, 0.1);
        const auto jac = derivative_jacobians(s, kappa, p);

        Eigen::VectorXd x0(10);
        const auto arr = s.to_array();
        for (int i = 0; i < 10; ++i) x0[i] = arr[i];
        const auto f = [&](const Eigen::VectorXd& x) {
            std::array<double, 10> a;
            for (int i = 0; i < 10; ++i) a[i] = x[i];
            const auto d = derivative(VehicleState::from_array(a), u, kappa, p);
            Eigen::VectorXd out(10);
            for (int i = 0; i < 10; ++i) out[i] = d[i];
            return out;
        };
        const Eigen::MatrixXd fd = oracles::fd_jacobian(f, x0);
        for (int r = 0; r < 10; ++r)
            for (int c = 0; c < 10; ++c) {
                const double a = jac.d_state[r][c];
                const double scale = std::max({std::abs(a), std::abs(fd(r, c)), 1.0});
                max_rel = std::max(max_rel, std::abs(a - fd(r, c)) / scale);
            }
    }
    CHECK(max_rel < 1e-5);
}

TEST_CASE("params: config round trip and validation") {
    VehicleParams p;
    Config cfg;
    p.to_config(cfg);
    const VehicleParams q = VehicleParams::from_config(cfg);
    CHECK(q.mass == p.mass);
    CHECK(q.alpha_r_lim == p.alpha_r_lim);

    Config bad;
    bad.set("vehicle.mass", -1.0);
    CHECK_THROWS_AS(VehicleParams::from_config(bad), std::invalid_argument);
}
