#include "fsd/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "fsd/geometry.hpp"

namespace fsd::dynamics {

void VehicleParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw std::invalid_argument(std::string("VehicleParams: ") + name + " must be > 0");
    };
    positive(mass, "mass");
    positive(inertia_zz, "inertia_zz");
    positive(lf, "lf");
    positive(lr, "lr");
    positive(cf, "cf");
    positive(cr, "cr");
    positive(delta_max, "delta_max");
    positive(u_min, "u_min");
    positive(zeta_max, "zeta_max");
    positive(jerk_max, "jerk_max");
    positive(alpha_r_lim, "alpha_r_lim");
    if (!(u_max > u_min)) throw std::invalid_argument("VehicleParams: u_max must exceed u_min");
    if (!(ax_min < 0.0 && ax_max > 0.0))
        throw std::invalid_argument("VehicleParams: acceleration box must contain 0");
}

VehicleParams VehicleParams::from_config(const Config& cfg) {
    VehicleParams p;
    p.mass = cfg.get_double("vehicle.mass", p.mass);
    p.inertia_zz = cfg.get_double("vehicle.inertia_zz", p.inertia_zz);
    p.lf = cfg.get_double("vehicle.lf", p.lf);
    p.lr = cfg.get_double("vehicle.lr", p.lr);
    p.cf = cfg.get_double("vehicle.cf", p.cf);
    p.cr = cfg.get_double("vehicle.cr", p.cr);
    p.delta_max = cfg.get_double("vehicle.delta_max", p.delta_max);
    p.u_min = cfg.get_double("vehicle.u_min", p.u_min);
    p.u_max = cfg.get_double("vehicle.u_max", p.u_max);
    p.ax_min = cfg.get_double("vehicle.ax_min", p.ax_min);
    p.ax_max = cfg.get_double("vehicle.ax_max", p.ax_max);
    p.zeta_max = cfg.get_double("vehicle.zeta_max", p.zeta_max);
    p.jerk_max = cfg.get_double("vehicle.jerk_max", p.jerk_max);
    p.alpha_r_lim = cfg.get_double("vehicle.alpha_r_lim", p.alpha_r_lim);
    p.validate();
    return p;
}

void VehicleParams::to_config(Config& cfg) const {
    cfg.set("vehicle.mass", mass);
    cfg.set("vehicle.inertia_zz", inertia_zz);
    cfg.set("vehicle.lf", lf);
    cfg.set("vehicle.lr", lr);
    cfg.set("vehicle.cf", cf);
    cfg.set("vehicle.cr", cr);
    cfg.set("vehicle.delta_max", delta_max);
    cfg.set("vehicle.u_min", u_min);
    cfg.set("vehicle.u_max", u_max);
    cfg.set("vehicle.ax_min", ax_min);
    cfg.set("vehicle.ax_max", ax_max);
    cfg.set("vehicle.zeta_max", zeta_max);
    cfg.set("vehicle.jerk_max", jerk_max);
    cfg.set("vehicle.alpha_r_lim", alpha_r_lim);
}

SlipAngles slip_angles(const VehicleState& state, const VehicleParams& params) {
    if (!(state.u >= params.u_min))
        throw std::domain_error("slip_angles: u below u_min");
    SlipAngles s;
    s.front = std::atan((state.v + params.lf * state.r) / state.u) - state.delta_f;
    s.rear = std::atan((state.v - params.lr * state.r) / state.u);
    return s;
}

TireForces tire_forces(const SlipAngles& slip, const VehicleParams& params) {
    return {-params.cf * slip.front, -params.cr * slip.rear};
}

std::array<double, VehicleState::kDim> derivative(const VehicleState& state,
                                                  const ControlRates& rates, double kappa,
                                                  const VehicleParams& params) {
    if (!(state.u > 0.0) || !std::isfinite(state.u))
        throw std::domain_error("derivative: longitudinal speed must be positive and finite");

    // Startup clamp: slip angles are evaluated at u_min when u is below it.
    VehicleState slip_state = state;
    slip_state.u = std::max(state.u, params.u_min);
    const TireForces f = tire_forces(slip_angles(slip_state, params), params);

    std::array<double, VehicleState::kDim> d{};
    d[kX] = state.u * std::cos(state.psi) - state.v * std::sin(state.psi);
    d[kY] = state.u * std::sin(state.psi) + state.v * std::cos(state.psi);
    d[kPsi] = state.r;
    d[kU] = state.a_x;
    d[kV] = (f.front + f.rear) / params.mass - state.u * state.r;
    d[kR] = (f.front * params.lf - f.rear * params.lr) / params.inertia_zz;
    d[kDeltaF] = rates.zeta_f;
    d[kAx] = rates.j_x;
    d[kEy] = state.u * state.e_psi + state.v;
    d[kEpsi] = state.r - state.u * kappa;
    return d;
}

VehicleState step(const VehicleState& state, const ControlRates& rates, double kappa, double dt,
                  const VehicleParams& params) {
    if (!(dt > 0.0 && dt <= 0.05)) throw std::invalid_argument("step: dt must be in (0, 0.05]");

    const auto eval = [&](const std::array<double, VehicleState::kDim>& base, double scale,
                          const std::array<double, VehicleState::kDim>& k) {
        std::array<double, VehicleState::kDim> s = base;
        for (int i = 0; i < VehicleState::kDim; ++i) s[i] += scale * k[i];
        return derivative(VehicleState::from_array(s), rates, kappa, params);
    };

    const auto x0 = state.to_array();
    const auto k1 = derivative(state, rates, kappa, params);
    const auto k2 = eval(x0, 0.5 * dt, k1);
    const auto k3 = eval(x0, 0.5 * dt, k2);
    const auto k4 = eval(x0, dt, k3);

    std::array<double, VehicleState::kDim> out = x0;
    for (int i = 0; i < VehicleState::kDim; ++i)
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

    VehicleState next = VehicleState::from_array(out);
    next.psi = wrap_angle(next.psi);
    next.e_psi = wrap_angle(next.e_psi);
    return next;
}

Jacobians derivative_jacobians(const VehicleState& state, double kappa,
                               const VehicleParams& params) {
    Jacobians jac{};
    auto& A = jac.d_state;
    auto& B = jac.d_control;

    const double u_slip = std::max(state.u, params.u_min);
    const bool clamped = state.u < params.u_min;

    const double qf = (state.v + params.lf * state.r) / u_slip;
    const double qr = (state.v - params.lr * state.r) / u_slip;
    const double gf = 1.0 / (1.0 + qf * qf);  // d atan
    const double gr = 1.0 / (1.0 + qr * qr);

    // alpha_f = atan(qf) - delta_f, alpha_r = atan(qr)
    const double daf_dv = gf / u_slip;
    const double daf_dr = gf * params.lf / u_slip;
    const double daf_du = clamped ? 0.0 : -gf * qf / u_slip;
    const double dar_dv = gr / u_slip;
    const double dar_dr = -gr * params.lr / u_slip;
    const double dar_du = clamped ? 0.0 : -gr * qr / u_slip;

    const double cp = std::cos(state.psi), sp = std::sin(state.psi);

    A[kX][kPsi] = -state.u * sp - state.v * cp;
    A[kX][kU] = cp;
    A[kX][kV] = -sp;

    A[kY][kPsi] = state.u * cp - state.v * sp;
    A[kY][kU] = sp;
    A[kY][kV] = cp;

    A[kPsi][kR] = 1.0;
    A[kU][kAx] = 1.0;

    // v_dot = (-cf*af - cr*ar)/M - u*r
    const double im = 1.0 / params.mass;
    A[kV][kU] = (-params.cf * daf_du - params.cr * dar_du) * im - state.r;
    A[kV][kV] = (-params.cf * daf_dv - params.cr * dar_dv) * im;
    A[kV][kR] = (-params.cf * daf_dr - params.cr * dar_dr) * im - state.u;
    A[kV][kDeltaF] = params.cf * im;

    // r_dot = (-cf*af*lf + cr*ar*lr)/Izz
    const double iz = 1.0 / params.inertia_zz;
    A[kR][kU] = (-params.cf * params.lf * daf_du + params.cr * params.lr * dar_du) * iz;
    A[kR][kV] = (-params.cf * params.lf * daf_dv + params.cr * params.lr * dar_dv) * iz;
    A[kR][kR] = (-params.cf * params.lf * daf_dr + params.cr * params.lr * dar_dr) * iz;
    A[kR][kDeltaF] = params.cf * params.lf * iz;

    A[kEy][kU] = state.e_psi;
    A[kEy][kV] = 1.0;
    A[kEy][kEpsi] = state.u;

    A[kEpsi][kU] = -kappa;
    A[kEpsi][kR] = 1.0;

    B[kDeltaF][0] = 1.0;
    B[kAx][1] = 1.0;
    return jac;
}

}  // namespace fsd::dynamics
