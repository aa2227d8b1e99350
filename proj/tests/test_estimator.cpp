#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsd/estimator.hpp"
#include "fsd/rng.hpp"
#include "oracles.hpp"

using namespace fsd;
using namespace fsd::estimator;

namespace {

Matrix6 small_q() { return 1e-3 * Matrix6::Identity(); }

Belief random_belief(Rng& rng) {
    Belief b;
    for (int i = 0; i < 6; ++i) b.mean[i] = rng.uniform(-3.0, 3.0);
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
        6, 6, [&](Eigen::Index, Eigen::Index) { return rng.uniform(-1.0, 1.0); });
    b.cov = a * a.transpose() + 0.05 * Matrix6::Identity();
    return b;
}

// Wilson-Hilferty approximation of the chi-square quantile.
double chi2_quantile(double dof, double z) {
    const double a = 2.0 / (9.0 * dof);
    const double c = 1.0 - a + z * std::sqrt(a);
    return dof * c * c * c;
}

}  // namespace

TEST_CASE("predict: stationary belief stays put, covariance grows by Q dt") {
    Belief b;
    b.cov = Matrix6::Zero();
    const Matrix6 q = 0.01 * Matrix6::Identity();
    const Belief p = predict(b, {0.0, 0.0, 0.0}, 0.5, q);
    for (int i = 0; i < 6; ++i) CHECK(p.mean[i] == doctest::Approx(0.0));
    // From a certain prior the posterior uncertainty is exactly Q dt.
    CHECK((p.cov - 0.005 * Matrix6::Identity()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(p.t == doctest::Approx(0.5));
}

TEST_CASE("predict: straight-line integration") {
    Belief b;
    b.mean[kBvx] = 1.0;
    const Belief p = predict(b, {0.0, 0.0, 0.0}, 1.0, small_q());
    CHECK(p.mean[kBx] == doctest::Approx(1.0));
    CHECK(p.mean[kBy] == doctest::Approx(0.0));
}

TEST_CASE("predict: analytic F matches finite differences of the transition") {
    Rng rng(3);
    double max_rel = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Vector6 x;
        for (int i = 0; i < 6; ++i) x[i] = rng.uniform(-2.0, 2.0);
        const ImuInput imu{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                           rng.uniform(-1.0, 1.0)};
        const double dt = 0.05;
        const Matrix6 F = transition_jacobian(x, imu, dt);
        const Eigen::MatrixXd fd = oracles::fd_jacobian(
            [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
                return transition(v, imu, dt);
            },
            x, 1e-6);
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) {
                const double scale = std::max({std::abs(F(r, c)), std::abs(fd(r, c)), 1.0});
                max_rel = std::max(max_rel, std::abs(F(r, c) - fd(r, c)) / scale);
            }
    }
    CHECK(max_rel < 1e-5);
}

TEST_CASE("update: scalar toy case gives K = 1/2") {
    // P = 1 on x, H selects x, R = 1: the posterior mean moves halfway.
    Belief b;
    b.cov = Matrix6::Identity();
    MeasurementModel m;
    m.H = Eigen::MatrixXd::Zero(1, 6);
    m.H(0, kBx) = 1.0;
    Eigen::MatrixXd H = m.H;
    m.h = [H](const Vector6& x) -> Eigen::VectorXd { return H * x; };
    m.R = Eigen::MatrixXd::Identity(1, 1);
    Eigen::VectorXd z(1);
    z << 2.0;
    const Belief out = update(b, z, m);
    CHECK(out.mean[kBx] == doctest::Approx(1.0));  // K z = 0.5 * 2
    CHECK(out.cov(kBx, kBx) == doctest::Approx(0.5));
}

TEST_CASE("update: huge R leaves the prior untouched") {
    Rng rng(5);
    Belief b = random_belief(rng);
    MeasurementModel m = gnss_model(std::sqrt(1e9));
    Eigen::VectorXd z(2);
    z << 100.0, -50.0;
    const Belief out = update(b, z, m);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(out.mean[i] - b.mean[i]) < 1e-6);
}

TEST_CASE("update: zero innovation shrinks the covariance") {
    Rng rng(7);
    Belief b = random_belief(rng);
    MeasurementModel m = gnss_model(0.5);
    const Eigen::VectorXd z = m.h(b.mean);
    const Belief out = update(b, z, m);
    for (int i = 0; i < 6; ++i) CHECK(out.mean[i] == doctest::Approx(b.mean[i]).epsilon(1e-12));
    CHECK(out.cov.trace() < b.cov.trace());
}

TEST_CASE("update: singular innovation covariance is rejected with diagnostics") {
    Belief b;
    b.cov = Matrix6::Zero();
    MeasurementModel m = gnss_model(1.0);
    m.R = Eigen::MatrixXd::Zero(2, 2);  // degenerate on purpose
    Eigen::VectorXd z(2);
    z << 1.0, 1.0;
    UpdateStats stats;
    const Belief out = update(b, z, m, &stats);
    CHECK_FALSE(stats.applied);
    CHECK(out.mean == b.mean);
}

TEST_CASE("joseph form: symmetric PSD over 1e5 random cycles") {
    Rng rng(11);
    Belief b;
    b.cov = Matrix6::Identity();
    const Matrix6 q = 0.01 * Matrix6::Identity();
    const MeasurementModel gnss = gnss_model(0.3);
    const MeasurementModel wheel = wheel_speed_model(0.2);
    const MeasurementModel lidar = lidar_odom_model(0.1, 0.05);

    double worst_asym = 0.0, worst_eig = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const ImuInput imu{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                           rng.uniform(-1.5, 1.5)};
        b = predict(b, imu, 0.01, q);
        const int pick = rng.uniform_int(0, 2);
        const MeasurementModel& m = pick == 0 ? gnss : pick == 1 ? wheel : lidar;
        Eigen::VectorXd z = m.h(b.mean);
        for (int k = 0; k < z.size(); ++k) z[k] += rng.gaussian(0.0, 0.3);
        b = update(b, z, m);

        if (i % 100 == 0) {
            worst_asym = std::max(worst_asym, (b.cov - b.cov.transpose()).cwiseAbs().maxCoeff());
            const Eigen::SelfAdjointEigenSolver<Matrix6> eig(b.cov);
            worst_eig = std::min(worst_eig, eig.eigenvalues().minCoeff());
        }
    }
    CHECK(worst_asym < 1e-12);
    CHECK(worst_eig >= -1e-9);
}

TEST_CASE("fuse_step: out-of-order measurements throw") {
    FusionConfig cfg;
    Belief b;
    std::vector<sensors::Measurement> batch;
    batch.push_back({0.2, sensors::Kind::kGnssPos, {0.0, 0.0}});
    batch.push_back({0.1, sensors::Kind::kGnssPos, {0.0, 0.0}});
    CHECK_THROWS_AS(fuse_step(b, batch, cfg), std::runtime_error);
}

TEST_CASE("fuse_step: empty batch leaves the belief unchanged, dropout path works") {
    FusionConfig cfg;
    cfg.Q = small_q();
    Belief b;
    b.mean[kBvx] = 2.0;
    const Belief same = fuse_step(b, {}, cfg);
    CHECK(same.mean == b.mean);

    // Batch without lidar odometry still advances on INS + GNSS.
    std::vector<sensors::Measurement> batch;
    batch.push_back({0.1, sensors::Kind::kIns, {0.0, 0.0, 0.0}});
    batch.push_back({0.2, sensors::Kind::kGnssPos, {0.21, 0.0}});
    const Belief out = fuse_step(b, batch, cfg);
    CHECK(out.t == doctest::Approx(0.2));
    CHECK(out.mean[kBx] > 0.1);
}

TEST_CASE("fuse_step: same-timestamp batch equals sequential updates") {
    FusionConfig cfg;
    cfg.Q = small_q();
    cfg.gnss_sigma = 0.3;
    cfg.wheel_sigma = 0.2;
    cfg.lidar_sigma_xy = 0.1;
    cfg.lidar_sigma_psi = 0.05;
    Rng rng(13);
    Belief b = random_belief(rng);
    b.t = 1.0;

    std::vector<sensors::Measurement> batch;
    batch.push_back({1.0, sensors::Kind::kGnssPos, {0.4, -0.2}});
    batch.push_back({1.0, sensors::Kind::kWheelSpeed, {1.6}});
    batch.push_back({1.0, sensors::Kind::kLidarOdom, {0.35, -0.15, 0.1}});

    const Belief whole = fuse_step(b, batch, cfg);

    Belief stepwise = b;
    stepwise = update(stepwise, Eigen::Vector2d(0.4, -0.2), gnss_model(cfg.gnss_sigma));
    Eigen::VectorXd zw(1);
    zw << 1.6;
    stepwise = update(stepwise, zw, wheel_speed_model(cfg.wheel_sigma));
    stepwise = update(stepwise, Eigen::Vector3d(0.35, -0.15, 0.1),
                      lidar_odom_model(cfg.lidar_sigma_xy, cfg.lidar_sigma_psi));

    CHECK((whole.mean - stepwise.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((whole.cov - stepwise.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("order invariance of simultaneous independent linear updates") {
    Rng rng(17);
    Belief b = random_belief(rng);
    const MeasurementModel gnss = gnss_model(0.3);
    const MeasurementModel wheel = wheel_speed_model(0.2);
    Eigen::VectorXd zg(2), zw(1);
    zg << b.mean[kBx] + 0.2, b.mean[kBy] - 0.1;
    zw << b.mean[kBvx] + 0.15;

    const Belief ab = update(update(b, zg, gnss), zw, wheel);
    const Belief ba = update(update(b, zw, wheel), zg, gnss);
    CHECK((ab.mean - ba.mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("NEES consistency on a matched-noise 60 s run") {
    // Ground truth follows the filter's own discrete model with noise drawn
    // from the exact Q and R used by the filter.
    const double dt = 0.01;
    Matrix6 q = Matrix6::Zero();
    q(kBx, kBx) = q(kBy, kBy) = 1e-5;
    q(kBtheta, kBtheta) = 1e-5;
    q(kBvx, kBvx) = q(kBvy, kBvy) = 1e-3;
    q(kBr, kBr) = 4e-4 / dt;  // gyro replacement noise

    const MeasurementModel gnss = gnss_model(0.5);
    const MeasurementModel lidar = lidar_odom_model(0.15, 0.03);
    const MeasurementModel wheel = wheel_speed_model(0.2);

    Rng rng(23);
    Vector6 truth = Vector6::Zero();
    truth[kBvx] = 3.0;
    Belief belief;
    belief.mean = truth;
    belief.cov = 1e-6 * Matrix6::Identity();

    double nees_sum = 0.0;
    int nees_n = 0;
    const int steps = 6000;
    for (int i = 1; i <= steps; ++i) {
        const double t = i * dt;
        const ImuInput imu{0.8 * std::sin(0.3 * t), 0.5 * std::cos(0.4 * t),
                           0.6 * std::sin(0.2 * t)};
        // Truth: same transition plus process noise sampled from Q dt.
        truth = transition(truth, imu, dt);
        for (int k = 0; k < 6; ++k) truth[k] += rng.gaussian(0.0, std::sqrt(q(k, k) * dt));
        truth[kBtheta] = wrap_angle(truth[kBtheta]);

        belief = predict(belief, imu, dt, q);

        const auto measure = [&](const MeasurementModel& m) {
            Eigen::VectorXd z = m.h(truth);
            for (int k = 0; k < z.size(); ++k)
                z[k] += rng.gaussian(0.0, std::sqrt(m.R(k, k)));
            belief = update(belief, z, m);
        };
        if (i % 10 == 0) measure(gnss);
        if (i % 20 == 0) measure(lidar);
        if (i % 2 == 0) measure(wheel);

        if (i % 50 == 0) {
            Vector6 err = belief.mean - truth;
            err[kBtheta] = wrap_angle(err[kBtheta]);
            nees_sum += err.dot(belief.cov.ldlt().solve(err));
            ++nees_n;
        }
    }
    const double avg_nees = nees_sum / nees_n;
    const double dof = 6.0 * nees_n;
    const double lo = chi2_quantile(dof, -1.959964) / nees_n;
    const double hi = chi2_quantile(dof, 1.959964) / nees_n;
    INFO("avg NEES ", avg_nees, " band [", lo, ", ", hi, "]");
    CHECK(avg_nees >= lo);
    CHECK(avg_nees <= hi);
}

TEST_CASE("dropout robustness: losing lidar keeps position error bounded") {
    // 60 s matched-noise run; lidar odometry vanishes halfway through.
    const double dt = 0.01;
    Matrix6 q = Matrix6::Zero();
    q(kBx, kBx) = q(kBy, kBy) = 1e-5;
    q(kBtheta, kBtheta) = 1e-5;
    q(kBvx, kBvx) = q(kBvy, kBvy) = 1e-3;
    q(kBr, kBr) = 4e-4 / dt;

    const MeasurementModel gnss = gnss_model(0.5);
    const MeasurementModel lidar = lidar_odom_model(0.15, 0.03);
    const MeasurementModel wheel = wheel_speed_model(0.2);

    Rng rng(29);
    Vector6 truth = Vector6::Zero();
    truth[kBvx] = 3.0;
    Belief belief;
    belief.mean = truth;
    belief.cov = 1e-6 * Matrix6::Identity();

    double pre = 0.0, post = 0.0;
    int n_pre = 0, n_post = 0;
    const int steps = 6000;
    for (int i = 1; i <= steps; ++i) {
        const double t = i * dt;
        const ImuInput imu{0.8 * std::sin(0.3 * t), 0.5 * std::cos(0.4 * t),
                           0.6 * std::sin(0.2 * t)};
        truth = transition(truth, imu, dt);
        for (int k = 0; k < 6; ++k) truth[k] += rng.gaussian(0.0, std::sqrt(q(k, k) * dt));
        truth[kBtheta] = wrap_angle(truth[kBtheta]);
        belief = predict(belief, imu, dt, q);

        const auto measure = [&](const MeasurementModel& m) {
            Eigen::VectorXd z = m.h(truth);
            for (int k = 0; k < z.size(); ++k)
                z[k] += rng.gaussian(0.0, std::sqrt(m.R(k, k)));
            belief = update(belief, z, m);
        };
        if (i % 10 == 0) measure(gnss);
        if (i % 20 == 0 && i < steps / 2) measure(lidar);  // dropout at t = 30 s
        if (i % 2 == 0) measure(wheel);

        const double e2 = (belief.mean.head<2>() - truth.head<2>()).squaredNorm();
        if (i < steps / 2) {
            pre += e2;
            ++n_pre;
        } else {
            post += e2;
            ++n_post;
        }
    }
    const double rmse_pre = std::sqrt(pre / n_pre);
    const double rmse_post = std::sqrt(post / n_post);
    INFO("rmse pre ", rmse_pre, " post ", rmse_post);
    CHECK(rmse_post <= 3.0 * rmse_pre);
}
