#include "fsd/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "fsd/geometry.hpp"

namespace fsd::estimator {

namespace {

// Continuous-time rates for the pose/velocity block, with the yaw rate
// already replaced by the gyro value.
Vector6 rates(const Vector6& x, const ImuInput& imu) {
    Vector6 d = Vector6::Zero();
    const double c = std::cos(x[kBtheta]), s = std::sin(x[kBtheta]);
    d[kBx] = c * x[kBvx] - s * x[kBvy];
    d[kBy] = s * x[kBvx] + c * x[kBvy];
    d[kBtheta] = imu.yaw_rate;
    d[kBvx] = imu.a_x + x[kBvy] * imu.yaw_rate;
    d[kBvy] = imu.a_y - x[kBvx] * imu.yaw_rate;
    d[kBr] = 0.0;
    return d;
}

// Jacobian of `rates` w.r.t. the state.
Matrix6 rates_jacobian(const Vector6& x, const ImuInput& imu) {
    Matrix6 A = Matrix6::Zero();
    const double c = std::cos(x[kBtheta]), s = std::sin(x[kBtheta]);
    A(kBx, kBtheta) = -s * x[kBvx] - c * x[kBvy];
    A(kBx, kBvx) = c;
    A(kBx, kBvy) = -s;
    A(kBy, kBtheta) = c * x[kBvx] - s * x[kBvy];
    A(kBy, kBvx) = s;
    A(kBy, kBvy) = c;
    A(kBvx, kBvy) = imu.yaw_rate;
    A(kBvy, kBvx) = -imu.yaw_rate;
    return A;
}

}  // namespace

Vector6 transition(const Vector6& state, const ImuInput& imu, double dt) {
    // RK2 midpoint on the pose/velocity block, gyro replacement on r.
    const Vector6 k1 = rates(state, imu);
    const Vector6 mid = state + 0.5 * dt * k1;
    const Vector6 k2 = rates(mid, imu);
    Vector6 next = state + dt * k2;
    next[kBr] = imu.yaw_rate;
    next[kBtheta] = wrap_angle(next[kBtheta]);
    return next;
}

Matrix6 transition_jacobian(const Vector6& state, const ImuInput& imu, double dt) {
    const Vector6 k1 = rates(state, imu);
    const Vector6 mid = state + 0.5 * dt * k1;
    const Matrix6 A0 = rates_jacobian(state, imu);
    const Matrix6 Am = rates_jacobian(mid, imu);
    Matrix6 F = Matrix6::Identity() + dt * Am * (Matrix6::Identity() + 0.5 * dt * A0);
    // r is replaced by the gyro, so it carries no dependence on the prior state.
    F.row(kBr).setZero();
    return F;
}

Belief predict(const Belief& belief, const ImuInput& imu, double dt, const Matrix6& Q) {
    if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be > 0");
    if (!belief.mean.allFinite() || !std::isfinite(imu.a_x) || !std::isfinite(imu.a_y) ||
        !std::isfinite(imu.yaw_rate))
        throw std::runtime_error("predict: non-finite input");

    Belief out;
    out.mean = transition(belief.mean, imu, dt);
    const Matrix6 F = transition_jacobian(belief.mean, imu, dt);
    out.cov = F * belief.cov * F.transpose() + Q * dt;
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    out.t = belief.t + dt;
    return out;
}

Belief update(const Belief& belief, const Eigen::VectorXd& z, const MeasurementModel& model,
              UpdateStats* stats) {
    if (model.H.rows() != z.size() || model.R.rows() != z.size())
        throw std::invalid_argument("update: model dimensions do not match measurement");

    const Eigen::MatrixXd S = model.H * belief.cov * model.H.transpose() + model.R;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    const double min_pivot = ldlt.vectorD().minCoeff();
    if (ldlt.info() != Eigen::Success || min_pivot < 1e-12) {
        if (stats) {
            stats->applied = false;
            stats->note = "singular innovation covariance for " + model.name;
        }
        return belief;
    }

    Eigen::VectorXd innovation = z - model.h(belief.mean);
    for (int idx : model.angle_residuals) innovation[idx] = wrap_angle(innovation[idx]);

    const Eigen::MatrixXd K = ldlt.solve(model.H * belief.cov).transpose();

    Belief out = belief;
    out.mean += K * innovation;
    out.mean[kBtheta] = wrap_angle(out.mean[kBtheta]);

    // Joseph form keeps the posterior covariance symmetric PSD.
    const Matrix6 IKH = Matrix6::Identity() - K * model.H;
    out.cov = IKH * belief.cov * IKH.transpose() + K * model.R * K.transpose();
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    if (stats) stats->applied = true;
    return out;
}

MeasurementModel gnss_model(double sigma) {
    MeasurementModel m;
    m.H = Eigen::MatrixXd::Zero(2, 6);
    m.H(0, kBx) = 1.0;
    m.H(1, kBy) = 1.0;
    Eigen::MatrixXd H = m.H;
    m.h = [H](const Vector6& x) -> Eigen::VectorXd { return H * x; };
    m.R = sigma * sigma * Eigen::Matrix2d::Identity();
    m.name = "gnss_pos";
    return m;
}

MeasurementModel wheel_speed_model(double sigma) {
    MeasurementModel m;
    m.H = Eigen::MatrixXd::Zero(1, 6);
    m.H(0, kBvx) = 1.0;
    Eigen::MatrixXd H = m.H;
    m.h = [H](const Vector6& x) -> Eigen::VectorXd { return H * x; };
    m.R = sigma * sigma * Eigen::MatrixXd::Identity(1, 1);
    m.name = "wheel_speed";
    return m;
}

MeasurementModel lidar_odom_model(double sigma_xy, double sigma_psi) {
    MeasurementModel m;
    m.H = Eigen::MatrixXd::Zero(3, 6);
    m.H(0, kBx) = 1.0;
    m.H(1, kBy) = 1.0;
    m.H(2, kBtheta) = 1.0;
    Eigen::MatrixXd H = m.H;
    m.h = [H](const Vector6& x) -> Eigen::VectorXd { return H * x; };
    m.R = Eigen::Matrix3d::Identity();
    m.R(0, 0) = m.R(1, 1) = sigma_xy * sigma_xy;
    m.R(2, 2) = sigma_psi * sigma_psi;
    m.angle_residuals = {2};
    m.name = "lidar_odom";
    return m;
}

FusionConfig FusionConfig::from_schedule(const sensors::SensorSchedule& s, const Config& cfg) {
    FusionConfig f;
    // R floors keep the models SPD even in noise-free runs.
    f.gnss_sigma = std::max(s.gnss_sigma, 1e-4);
    f.wheel_sigma = std::max(s.wheel_sigma, 1e-4);
    f.lidar_sigma_xy = std::max(s.lidar_odom_sigma_xy, 1e-4);
    f.lidar_sigma_psi = std::max(s.lidar_odom_sigma_psi, 1e-4);

    // Continuous-time process noise rates. The velocity rows absorb the
    // accelerometer noise, the heading row absorbs gyro noise integrated
    // over one INS period, and the r row is reset to gyro variance each
    // predict (divided by dt so the dt scaling in predict cancels).
    const double ins_dt = 1.0 / s.ins.rate_hz;
    const double sa2 = s.ins_sigma_a * s.ins_sigma_a + 1e-8;
    const double sg2 = s.ins_sigma_gyro * s.ins_sigma_gyro + 1e-10;
    f.Q = Matrix6::Zero();
    f.Q(kBx, kBx) = f.Q(kBy, kBy) = 1e-6;
    f.Q(kBtheta, kBtheta) = sg2 * ins_dt;
    f.Q(kBvx, kBvx) = f.Q(kBvy, kBvy) = sa2 * ins_dt * 100.0;
    f.Q(kBr, kBr) = sg2 / ins_dt;

    // Config overrides for tuning.
    f.Q(kBx, kBx) = cfg.get_double("estimator.q_pos", f.Q(kBx, kBx));
    f.Q(kBy, kBy) = f.Q(kBx, kBx);
    f.Q(kBtheta, kBtheta) = cfg.get_double("estimator.q_theta", f.Q(kBtheta, kBtheta));
    f.Q(kBvx, kBvx) = cfg.get_double("estimator.q_vel", f.Q(kBvx, kBvx));
    f.Q(kBvy, kBvy) = f.Q(kBvx, kBvx);
    f.Q(kBr, kBr) = cfg.get_double("estimator.q_r", f.Q(kBr, kBr));
    return f;
}

FusionRunner::FusionRunner(const Belief& initial, const FusionConfig& config)
    : belief_(initial),
      config_(config),
      gnss_(gnss_model(config.gnss_sigma)),
      wheel_(wheel_speed_model(config.wheel_sigma)),
      lidar_(lidar_odom_model(config.lidar_sigma_xy, config.lidar_sigma_psi)) {}

void FusionRunner::advance_to(double t) {
    const double dt = t - belief_.t;
    if (dt < -1e-9) throw std::runtime_error("fusion: time went backwards");
    if (dt > 1e-9) belief_ = predict(belief_, held_imu_, dt, config_.Q);
}

void FusionRunner::process(const sensors::Measurement& m) {
    advance_to(m.t);
    UpdateStats stats;
    switch (m.kind) {
        case sensors::Kind::kIns:
            held_imu_ = {m.values[0], m.values[1], m.values[2]};
            break;
        case sensors::Kind::kGnssPos:
            belief_ = update(belief_, Eigen::Vector2d(m.values[0], m.values[1]), gnss_, &stats);
            break;
        case sensors::Kind::kWheelSpeed: {
            Eigen::VectorXd z(1);
            z << m.values[0];
            belief_ = update(belief_, z, wheel_, &stats);
            break;
        }
        case sensors::Kind::kLidarOdom:
            belief_ = update(belief_, Eigen::Vector3d(m.values[0], m.values[1], m.values[2]),
                             lidar_, &stats);
            break;
        case sensors::Kind::kConeScan:
        case sensors::Kind::kCameraDetections:
            break;  // perception channels, not localization
    }
    if (!stats.applied) ++rejected_;
}

Belief fuse_step(const Belief& belief, const std::vector<sensors::Measurement>& measurements,
                 const FusionConfig& config) {
    for (std::size_t i = 1; i < measurements.size(); ++i)
        if (measurements[i].t < measurements[i - 1].t - 1e-12)
            throw std::runtime_error("fuse_step: measurements out of order");
    FusionRunner runner(belief, config);
    for (const auto& m : measurements) runner.process(m);
    return runner.belief();
}

}  // namespace fsd::estimator
