#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsd/config.hpp"
#include "fsd/sensors.hpp"

namespace fsd::estimator {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

// Mean is [x, y, theta, v_x, v_y, r]: planar pose, body-frame velocity and
// yaw rate.
struct Belief {
    Vector6 mean{Vector6::Zero()};
    Matrix6 cov{Matrix6::Identity()};
    double t{0.0};
};

enum BeliefIndex : int { kBx = 0, kBy = 1, kBtheta = 2, kBvx = 3, kBvy = 4, kBr = 5 };

struct ImuInput {
    double a_x{0.0};      // body-frame accelerometer
    double a_y{0.0};
    double yaw_rate{0.0};  // gyro
};

// Linear(ized) measurement model evaluated around the current mean.
struct MeasurementModel {
    std::function<Eigen::VectorXd(const Vector6&)> h;
    Eigen::MatrixXd H;                 // rows = measurement dim
    Eigen::MatrixXd R;                 // SPD
    std::vector<int> angle_residuals;  // residual rows wrapped to (-pi, pi]
    std::string name;
};

struct UpdateStats {
    bool applied{true};
    std::string note;
};

// Process step. The body velocity integrates the accelerometer input and the
// yaw rate is driven directly by the gyro; the mean advances by one RK2 step
// and the covariance by F P F^T + Q with the analytic discrete Jacobian F.
Belief predict(const Belief& belief, const ImuInput& imu, double dt, const Matrix6& Q);

// Discrete transition used by predict, exposed for Jacobian checks.
Vector6 transition(const Vector6& state, const ImuInput& imu, double dt);
Matrix6 transition_jacobian(const Vector6& state, const ImuInput& imu, double dt);

// Joseph-form EKF correction. A singular innovation covariance rejects the
// update (belief returned unchanged, stats flagged) instead of aborting.
Belief update(const Belief& belief, const Eigen::VectorXd& z, const MeasurementModel& model,
              UpdateStats* stats = nullptr);

// Measurement models for the simulated sensor suite.
MeasurementModel gnss_model(double sigma);
MeasurementModel wheel_speed_model(double sigma);
MeasurementModel lidar_odom_model(double sigma_xy, double sigma_psi);

struct FusionConfig {
    Matrix6 Q{Matrix6::Identity()};
    double gnss_sigma{0.05};
    double wheel_sigma{0.05};
    double lidar_sigma_xy{0.03};
    double lidar_sigma_psi{0.01};

    // Q derived from the sensor noise of the schedule that feeds the filter.
    static FusionConfig from_schedule(const sensors::SensorSchedule& s, const Config& cfg);
};

// Sequential fuser: feeds time-ordered measurements through predict/update.
// The INS stream drives prediction (zero-order held between samples); every
// other kind corrects. One instance per episode; replay uses the same path.
class FusionRunner {
public:
    FusionRunner(const Belief& initial, const FusionConfig& config);

    // Throws std::runtime_error when fed a measurement older than the belief.
    void process(const sensors::Measurement& m);
    // Pure prediction up to time t with the held INS input.
    void advance_to(double t);

    const Belief& belief() const { return belief_; }
    int rejected_updates() const { return rejected_; }

private:
    Belief belief_;
    FusionConfig config_;
    ImuInput held_imu_{};
    MeasurementModel gnss_, wheel_, lidar_;
    int rejected_{0};
};

// fuse_step of a whole batch: applies `measurements` (time-ordered) to the
// belief and returns the result.
Belief fuse_step(const Belief& belief, const std::vector<sensors::Measurement>& measurements,
                 const FusionConfig& config);

}  // namespace fsd::estimator
