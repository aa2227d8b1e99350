#pragma once

#include <array>

#include "fsd/config.hpp"

namespace fsd::dynamics {

// 10-dim plant state: pose, body speeds, actuator states and path-relative
// errors. Also the prediction model inside the MPC, so there is no model
// mismatch between simulation and control by construction.
struct VehicleState {
    double x{0.0};        // m, global
    double y{0.0};        // m, global
    double psi{0.0};      // rad, heading, kept in (-pi, pi]
    double u{0.0};        // m/s, longitudinal speed
    double v{0.0};        // m/s, lateral speed
    double r{0.0};        // rad/s, yaw rate
    double delta_f{0.0};  // rad, front steering angle
    double a_x{0.0};      // m/s^2, longitudinal acceleration
    double e_y{0.0};      // m, lateral path error (left positive)
    double e_psi{0.0};    // rad, heading deviation, kept in (-pi, pi]

    static constexpr int kDim = 10;
    std::array<double, kDim> to_array() const {
        return {x, y, psi, u, v, r, delta_f, a_x, e_y, e_psi};
    }
    static VehicleState from_array(const std::array<double, kDim>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8], a[9]};
    }
};

// State indices, shared with the controller's linearization.
enum StateIndex : int {
    kX = 0, kY = 1, kPsi = 2, kU = 3, kV = 4, kR = 5,
    kDeltaF = 6, kAx = 7, kEy = 8, kEpsi = 9,
};

struct ControlRates {
    double zeta_f{0.0};  // rad/s, steering rate
    double j_x{0.0};     // m/s^3, longitudinal jerk
};

struct VehicleParams {
    double mass{300.0};        // kg
    double inertia_zz{180.0};  // kg m^2
    double lf{0.8};            // m, CoG to front axle
    double lr{0.8};            // m, CoG to rear axle
    double cf{5.0e4};          // N/rad, front cornering stiffness
    double cr{5.0e4};          // N/rad, rear cornering stiffness

    // Box bounds. Steering, steering rate and jerk boxes are symmetric.
    double delta_max{0.4};     // rad
    double u_min{0.5};         // m/s
    double u_max{5.0};         // m/s
    double ax_min{-6.0};       // m/s^2
    double ax_max{6.0};        // m/s^2
    double zeta_max{2.0};      // rad/s
    double jerk_max{10.0};     // m/s^3
    double alpha_r_lim{0.08};  // rad, rear slip angle where the linear tire range ends

    double wheelbase() const { return lf + lr; }

    void validate() const;
    static VehicleParams from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

struct SlipAngles {
    double front{0.0};  // rad
    double rear{0.0};   // rad
};

struct TireForces {
    double front{0.0};  // N
    double rear{0.0};   // N
};

// Front/rear slip angles. Throws std::domain_error when u < params.u_min;
// the u -> 0 singularity makes the model meaningless there.
SlipAngles slip_angles(const VehicleState& state, const VehicleParams& params);

// Linear region of the brush tire model. F = -C * alpha, so a positive slip
// angle produces a restoring (negative) lateral force.
TireForces tire_forces(const SlipAngles& slip, const VehicleParams& params);

// State derivative. kappa is the reference-path curvature feeding the
// heading-deviation row (e_psi_dot = r - u * kappa). Slip angles are
// evaluated with u clamped to u_min so low-speed startup stays finite;
// a non-positive or non-finite u is a domain error.
std::array<double, VehicleState::kDim> derivative(const VehicleState& state,
                                                  const ControlRates& rates, double kappa,
                                                  const VehicleParams& params);

// Fixed-step RK4 advance; psi and e_psi renormalized to (-pi, pi].
// Requires dt in (0, 0.05].
VehicleState step(const VehicleState& state, const ControlRates& rates, double kappa, double dt,
                  const VehicleParams& params);

// Analytic Jacobians of `derivative` at (state, kappa): d(xdot)/d(state) and
// d(xdot)/d(rates). Valid where the startup clamp is inactive (u > u_min).
struct Jacobians {
    std::array<std::array<double, VehicleState::kDim>, VehicleState::kDim> d_state{};
    std::array<std::array<double, 2>, VehicleState::kDim> d_control{};
};
Jacobians derivative_jacobians(const VehicleState& state, double kappa,
                               const VehicleParams& params);

}  // namespace fsd::dynamics
