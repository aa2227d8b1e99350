#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fsd/config.hpp"
#include "fsd/dynamics.hpp"
#include "fsd/qp.hpp"
#include "fsd/track.hpp"

namespace fsd::control {

struct MpcConfig {
    int horizon{20};        // steps
    double dt{0.1};         // s, controller step
    int substeps{10};       // Euler substeps per controller step
    double w_steer{60.0};   // steering-difference weight
    double w_epsi{3.0};
    double w_ey{6.0};
    double w_speed{2.0};    // speed-profile tracking
    double w_slack{1000.0};
    double w_reg{2.0};      // input regularization, keeps the Hessian PD
    double comfort_dist{0.3};  // m, margin inside the corridor
    double a_lat_max{0.5};     // m/s^2 for the speed profile; 0 = derived

    static MpcConfig from_config(const Config& cfg);
    void to_config(Config& cfg) const;
    void validate() const;

    double lateral_accel_limit(const dynamics::VehicleParams& p) const {
        return a_lat_max > 0.0 ? a_lat_max : 0.8 * p.alpha_r_lim * p.cr * 2.0 / p.mass;
    }
};

// Discrete LTV model about a nominal trajectory, full 10-dim state.
struct LtvStep {
    Eigen::Matrix<double, 10, 10> A;
    Eigen::Matrix<double, 10, 2> B;
    Eigen::Matrix<double, 10, 1> c;
};

struct Nominal {
    std::vector<dynamics::VehicleState> states;  // horizon + 1
    std::vector<dynamics::ControlRates> inputs;  // horizon
    std::vector<double> s;                       // projected arc length per knot
};

struct LinearizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Forward-Euler discretization composed over `substeps` per controller
// step; curvature held at the start-of-step value. Throws when the nominal
// speed drops below u_min anywhere on the horizon.
std::vector<LtvStep> linearize(const Nominal& nominal, const track::ReferencePath& path,
                               const MpcConfig& config, const dynamics::VehicleParams& params);

// One discrete step of the LTV model (exposed for the Jacobian tests).
LtvStep linearize_step(const dynamics::VehicleState& state, const dynamics::ControlRates& input,
                       double kappa, double dt, int substeps,
                       const dynamics::VehicleParams& params);

// Curvature-limited speed profile with accel/decel smoothing passes.
class SpeedProfile {
public:
    SpeedProfile() = default;
    SpeedProfile(const track::ReferencePath& path, const dynamics::VehicleParams& params,
                 const MpcConfig& config, double ds = 1.0);
    double at(double s) const;
    bool empty() const { return u_.empty(); }

private:
    std::vector<double> u_;
    double ds_{1.0};
    double length_{0.0};
    bool closed_{false};
};

struct OcpProblem {
    Eigen::MatrixXd hessian;  // over [inputs (2N); env slacks (N); slip slacks (N)]
    Eigen::VectorXd gradient;
    Eigen::MatrixXd a_ineq;   // exactly 14 N rows
    Eigen::VectorXd b_ineq;
    int horizon{0};

    int n_inputs() const { return 2 * horizon; }
    int n_vars() const { return 4 * horizon; }
};

struct InfeasibleCorridor : std::runtime_error {
    using std::runtime_error::runtime_error;
};

OcpProblem build_ocp(const dynamics::VehicleState& state, const std::vector<LtvStep>& ltv,
                     const Nominal& nominal, const track::ReferencePath& path,
                     const SpeedProfile& speed, double speed_cap, const MpcConfig& config,
                     const dynamics::VehicleParams& params);

struct OcpSolution {
    std::vector<dynamics::ControlRates> inputs;
    std::vector<dynamics::VehicleState> predicted;  // LTV prediction, horizon + 1
    Eigen::VectorXd env_slack;
    Eigen::VectorXd slip_slack;
    QpStatus status{QpStatus::kOptimal};
    int iterations{0};
    std::vector<int> active_set;
};

struct MpcStepResult {
    dynamics::ControlRates command;
    bool fallback{false};  // safe-stop issued instead of an optimized command
    OcpSolution solution;
};

// Receding-horizon LTV-SQP controller: one linearization about the shifted
// previous solution and one QP solve per call, warm started.
class MpcController {
public:
    MpcController(const MpcConfig& config, const dynamics::VehicleParams& params);

    void set_reference(const track::ReferencePath& path);
    void set_speed_cap(double cap) { speed_cap_ = cap; }  // <= 0 disables

    // `state` pose fields are re-projected onto the reference internally.
    MpcStepResult step(const dynamics::VehicleState& state);

    const MpcConfig& config() const { return config_; }
    const track::ReferencePath& reference() const { return path_; }

private:
    Nominal make_nominal(const dynamics::VehicleState& state);
    void rollout(Nominal& nom, const dynamics::VehicleState& state);
    dynamics::ControlRates safe_stop(const dynamics::VehicleState& state) const;

    MpcConfig config_;
    dynamics::VehicleParams params_;
    track::ReferencePath path_;
    SpeedProfile speed_;
    double speed_cap_{0.0};
    std::optional<OcpSolution> previous_;
};

struct PurePursuitConfig {
    double lookahead_base{4.0};
    double lookahead_time{0.5};  // s; effective lookahead = max(min, time * u)
    double lookahead_min{2.5};
    double target_speed{2.4};
    double kp_speed{1.0};

    static PurePursuitConfig from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

struct PurePursuitCommand {
    double delta_f{0.0};  // rad, absolute steering command
    double a_x{0.0};      // m/s^2, absolute acceleration command
};

struct OffPathError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometric pure pursuit with proportional speed tracking.
PurePursuitCommand pure_pursuit_step(const dynamics::VehicleState& state,
                                     const track::ReferencePath& path, double lookahead,
                                     double speed_target, const dynamics::VehicleParams& params,
                                     double kp_speed = 1.0);

}  // namespace fsd::control
