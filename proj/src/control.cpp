#include "fsd/control.hpp"

#include <algorithm>
#include <cmath>

#include "fsd/geometry.hpp"

namespace fsd::control {

using dynamics::ControlRates;
using dynamics::VehicleParams;
using dynamics::VehicleState;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MpcConfig MpcConfig::from_config(const Config& cfg) {
    MpcConfig m;
    m.horizon = cfg.get_int("mpc.horizon", m.horizon);
    m.dt = cfg.get_double("mpc.dt", m.dt);
    m.substeps = cfg.get_int("mpc.substeps", m.substeps);
    m.w_steer = cfg.get_double("mpc.w_steer", m.w_steer);
    m.w_epsi = cfg.get_double("mpc.w_epsi", m.w_epsi);
    m.w_ey = cfg.get_double("mpc.w_ey", m.w_ey);
    m.w_speed = cfg.get_double("mpc.w_speed", m.w_speed);
    m.w_slack = cfg.get_double("mpc.w_slack", m.w_slack);
    m.w_reg = cfg.get_double("mpc.w_reg", m.w_reg);
    m.comfort_dist = cfg.get_double("mpc.comfort_dist", m.comfort_dist);
    m.a_lat_max = cfg.get_double("mpc.a_lat_max", m.a_lat_max);
    m.validate();
    return m;
}

void MpcConfig::to_config(Config& cfg) const {
    cfg.set("mpc.horizon", horizon);
    cfg.set("mpc.dt", dt);
    cfg.set("mpc.substeps", substeps);
    cfg.set("mpc.w_steer", w_steer);
    cfg.set("mpc.w_epsi", w_epsi);
    cfg.set("mpc.w_ey", w_ey);
    cfg.set("mpc.w_speed", w_speed);
    cfg.set("mpc.w_slack", w_slack);
    cfg.set("mpc.w_reg", w_reg);
    cfg.set("mpc.comfort_dist", comfort_dist);
    cfg.set("mpc.a_lat_max", a_lat_max);
}

void MpcConfig::validate() const {
    if (horizon < 5) throw ConfigError("mpc.horizon must be >= 5");
    if (!(dt > 0.0)) throw ConfigError("mpc.dt must be > 0");
    if (substeps < 1) throw ConfigError("mpc.substeps must be >= 1");
    for (double w : {w_steer, w_epsi, w_ey, w_speed, w_slack, w_reg})
        if (w < 0.0) throw ConfigError("mpc weights must be >= 0");
}

LtvStep linearize_step(const VehicleState& state, const ControlRates& input, double kappa,
                       double dt, int substeps, const VehicleParams& params) {
    using Mat10 = Eigen::Matrix<double, 10, 10>;
    using Mat10x2 = Eigen::Matrix<double, 10, 2>;

    LtvStep out;
    out.A = Mat10::Identity();
    out.B = Mat10x2::Zero();

    const double h = dt / substeps;
    VehicleState cur = state;
    for (int j = 0; j < substeps; ++j) {
        const auto jac = dynamics::derivative_jacobians(cur, kappa, params);
        Mat10 a_sub = Mat10::Identity();
        Mat10x2 b_sub = Mat10x2::Zero();
        for (int r = 0; r < 10; ++r) {
            for (int c = 0; c < 10; ++c) a_sub(r, c) += h * jac.d_state[r][c];
            b_sub(r, 0) = h * jac.d_control[r][0];
            b_sub(r, 1) = h * jac.d_control[r][1];
        }
        out.A = a_sub * out.A;
        out.B = a_sub * out.B + b_sub;

        const auto d = dynamics::derivative(cur, input, kappa, params);
        auto arr = cur.to_array();
        for (int r = 0; r < 10; ++r) arr[r] += h * d[r];
        cur = VehicleState::from_array(arr);
    }

    Eigen::Matrix<double, 10, 1> x0, x1;
    const auto a0 = state.to_array();
    const auto a1 = cur.to_array();
    for (int r = 0; r < 10; ++r) {
        x0(r) = a0[r];
        x1(r) = a1[r];
    }
    Eigen::Vector2d u(input.zeta_f, input.j_x);
    out.c = x1 - out.A * x0 - out.B * u;
    return out;
}

std::vector<LtvStep> linearize(const Nominal& nominal, const track::ReferencePath& path,
                               const MpcConfig& config, const VehicleParams& params) {
    if (nominal.inputs.size() + 1 != nominal.states.size())
        throw LinearizationError("linearize: nominal sizes inconsistent");
    std::vector<LtvStep> ltv;
    ltv.reserve(nominal.inputs.size());
    for (std::size_t k = 0; k < nominal.inputs.size(); ++k) {
        if (!(nominal.states[k].u > 0.0))
            throw LinearizationError("linearize: nominal speed not positive");
        const double kappa = path.kappa_at(path.wrap_s(nominal.s[k]));
        ltv.push_back(linearize_step(nominal.states[k], nominal.inputs[k], kappa, config.dt,
                                     config.substeps, params));
    }
    return ltv;
}

SpeedProfile::SpeedProfile(const track::ReferencePath& path, const VehicleParams& params,
                           const MpcConfig& config, double ds)
    : ds_(ds), length_(path.length()), closed_(path.closed()) {
    const double a_lat = config.lateral_accel_limit(params);
    const int n = std::max(2, static_cast<int>(std::ceil(length_ / ds_)));
    u_.resize(n);
    for (int i = 0; i < n; ++i) {
        const double kappa = std::abs(path.interpolate(i * ds_).kappa);
        u_[i] = std::min(params.u_max, std::sqrt(a_lat / std::max(kappa, 1e-6)));
        u_[i] = std::max(u_[i], params.u_min);
    }
    // Backward pass (braking feasibility), then forward (acceleration).
    const double a_brake = 0.7 * std::abs(params.ax_min);
    const double a_acc = 0.7 * params.ax_max;
    const int laps = closed_ ? 2 : 1;
    for (int lap = 0; lap < laps; ++lap)
        for (int i = n - 1; i >= 0; --i) {
            const int next = closed_ ? (i + 1) % n : std::min(i + 1, n - 1);
            u_[i] = std::min(u_[i], std::sqrt(u_[next] * u_[next] + 2.0 * a_brake * ds_));
        }
    for (int lap = 0; lap < laps; ++lap)
        for (int i = 0; i < n; ++i) {
            const int prev = closed_ ? (i + n - 1) % n : std::max(i - 1, 0);
            u_[i] = std::min(u_[i], std::sqrt(u_[prev] * u_[prev] + 2.0 * a_acc * ds_));
        }
}

double SpeedProfile::at(double s) const {
    if (u_.empty()) return 0.0;
    if (closed_) {
        s = std::fmod(s, length_);
        if (s < 0.0) s += length_;
    } else {
        s = std::clamp(s, 0.0, length_);
    }
    const double idx = s / ds_;
    const int i = std::min(static_cast<int>(idx), static_cast<int>(u_.size()) - 1);
    const int j = closed_ ? (i + 1) % u_.size() : std::min<int>(i + 1, u_.size() - 1);
    const double t = idx - i;
    return u_[i] + t * (u_[j] - u_[i]);
}

namespace {

// Prediction block: rows of the full state that the OCP acts on.
constexpr int kPredIdx[7] = {dynamics::kU,  dynamics::kV,  dynamics::kR, dynamics::kDeltaF,
                             dynamics::kAx, dynamics::kEy, dynamics::kEpsi};
constexpr int PU = 0, PV = 1, PR = 2, PDELTA = 3, PAX = 4, PEY = 5, PEPSI = 6;

struct Condensed {
    // x_k = phi[k] + gamma[k] * u for k = 1..N (index 0 unused).
    std::vector<Eigen::Matrix<double, 7, 1>> phi;
    std::vector<Eigen::Matrix<double, 7, Eigen::Dynamic>> gamma;
};

Condensed condense(const VehicleState& state, const std::vector<LtvStep>& ltv) {
    const int n = static_cast<int>(ltv.size());
    Condensed c;
    c.phi.resize(n + 1);
    c.gamma.resize(n + 1);

    Eigen::Matrix<double, 7, 7> a7;
    Eigen::Matrix<double, 7, 2> b7;
    Eigen::Matrix<double, 7, 1> c7;

    const auto arr = state.to_array();
    Eigen::Matrix<double, 7, 1> x0;
    for (int i = 0; i < 7; ++i) x0(i) = arr[kPredIdx[i]];

    c.phi[0] = x0;
    c.gamma[0] = Eigen::Matrix<double, 7, Eigen::Dynamic>::Zero(7, 2 * n);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < 7; ++i) {
            for (int j = 0; j < 7; ++j) a7(i, j) = ltv[k].A(kPredIdx[i], kPredIdx[j]);
            b7(i, 0) = ltv[k].B(kPredIdx[i], 0);
            b7(i, 1) = ltv[k].B(kPredIdx[i], 1);
            c7(i) = ltv[k].c(kPredIdx[i]);
        }
        c.phi[k + 1] = a7 * c.phi[k] + c7;
        c.gamma[k + 1] = a7 * c.gamma[k];
        c.gamma[k + 1].block(0, 2 * k, 7, 2) += b7;
    }
    return c;
}

}  // namespace

OcpProblem build_ocp(const VehicleState& state, const std::vector<LtvStep>& ltv,
                     const Nominal& nominal, const track::ReferencePath& path,
                     const SpeedProfile& speed, double speed_cap, const MpcConfig& config,
                     const VehicleParams& params) {
    const int n = config.horizon;
    if (static_cast<int>(ltv.size()) != n)
        throw std::invalid_argument("build_ocp: LTV length != horizon");

    const int n_u = 2 * n;
    const int n_vars = 4 * n;  // inputs, env slacks, slip slacks
    const Condensed cd = condense(state, ltv);

    OcpProblem ocp;
    ocp.horizon = n;
    ocp.hessian = MatrixXd::Zero(n_vars, n_vars);
    ocp.gradient = VectorXd::Zero(n_vars);

    // Quadratic term helper for w * (row . u + offset)^2 over the inputs.
    VectorXd row = VectorXd::Zero(n_u);
    const auto add_cost = [&](const VectorXd& r, double offset, double w) {
        if (w == 0.0) return;
        ocp.hessian.topLeftCorner(n_u, n_u) += 2.0 * w * r * r.transpose();
        ocp.gradient.head(n_u) += 2.0 * w * offset * r;
    };

    for (int k = 1; k <= n; ++k) {
        // Path deviation.
        row = cd.gamma[k].row(PEY).transpose();
        add_cost(row, cd.phi[k](PEY), config.w_ey);
        row = cd.gamma[k].row(PEPSI).transpose();
        add_cost(row, cd.phi[k](PEPSI), config.w_epsi);

        // Speed tracking against the curvature-limited profile.
        double u_ref = speed.empty() ? params.u_max : speed.at(path.wrap_s(nominal.s[k]));
        if (speed_cap > 0.0) u_ref = std::min(u_ref, speed_cap);
        row = cd.gamma[k].row(PU).transpose();
        add_cost(row, cd.phi[k](PU) - u_ref, config.w_speed);

        // Steering smoothness: successive steering-angle differences.
        row = cd.gamma[k].row(PDELTA).transpose();
        double offset = cd.phi[k](PDELTA);
        if (k >= 2) {
            row -= cd.gamma[k - 1].row(PDELTA).transpose();
            offset -= cd.phi[k - 1](PDELTA);
        } else {
            offset -= state.delta_f;
        }
        add_cost(row, offset, config.w_steer);
    }
    // Input regularization and slack penalties.
    for (int i = 0; i < n_u; ++i) ocp.hessian(i, i) += 2.0 * config.w_reg;
    for (int i = n_u; i < n_vars; ++i) ocp.hessian(i, i) += 2.0 * config.w_slack;

    // Constraints: per step 10 boxes + 2 sideslip + 2 corridor = 14 rows.
    const int n_rows = 14 * n;
    ocp.a_ineq = MatrixXd::Zero(n_rows, n_vars);
    ocp.b_ineq = VectorXd::Zero(n_rows);
    int r = 0;

    const auto add_state_row = [&](int k, int comp, double sign, double rhs, int slack_col) {
        ocp.a_ineq.block(r, 0, 1, n_u) = sign * cd.gamma[k].row(comp);
        if (slack_col >= 0) ocp.a_ineq(r, slack_col) = -1.0;
        ocp.b_ineq(r) = rhs - sign * cd.phi[k](comp);
        ++r;
    };

    for (int k = 1; k <= n; ++k) {
        const int env_slack = n_u + (k - 1);
        const int slip_slack = n_u + n + (k - 1);

        // (21) steering angle, (22) speed, (23) acceleration boxes.
        add_state_row(k, PDELTA, 1.0, params.delta_max, -1);
        add_state_row(k, PDELTA, -1.0, params.delta_max, -1);
        add_state_row(k, PU, 1.0, params.u_max, -1);
        add_state_row(k, PU, -1.0, -params.u_min, -1);
        add_state_row(k, PAX, 1.0, params.ax_max, -1);
        add_state_row(k, PAX, -1.0, -params.ax_min, -1);

        // (24)-(25) input boxes.
        const int col_z = 2 * (k - 1), col_j = col_z + 1;
        ocp.a_ineq(r, col_z) = 1.0;
        ocp.b_ineq(r++) = params.zeta_max;
        ocp.a_ineq(r, col_z) = -1.0;
        ocp.b_ineq(r++) = params.zeta_max;
        ocp.a_ineq(r, col_j) = 1.0;
        ocp.b_ineq(r++) = params.jerk_max;
        ocp.a_ineq(r, col_j) = -1.0;
        ocp.b_ineq(r++) = params.jerk_max;

        // (26) rear sideslip, linearized about the nominal speed, softened.
        const double u_nom = std::max(nominal.states[k].u, params.u_min);
        const double slip_rhs = params.alpha_r_lim * u_nom;
        Eigen::RowVectorXd vr = cd.gamma[k].row(PV) - params.lr * cd.gamma[k].row(PR);
        const double vr_off = cd.phi[k](PV) - params.lr * cd.phi[k](PR);
        ocp.a_ineq.block(r, 0, 1, n_u) = vr;
        ocp.a_ineq(r, slip_slack) = -1.0;
        ocp.b_ineq(r) = slip_rhs - vr_off;
        ++r;
        ocp.a_ineq.block(r, 0, 1, n_u) = -vr;
        ocp.a_ineq(r, slip_slack) = -1.0;
        ocp.b_ineq(r) = slip_rhs + vr_off;
        ++r;

        // (27) corridor with comfort distance, softened.
        const auto sample = path.interpolate(path.wrap_s(nominal.s[k]));
        const double hi = sample.ey_max - config.comfort_dist;
        const double lo = sample.ey_min + config.comfort_dist;
        if (hi < lo)
            throw InfeasibleCorridor("build_ocp: corridor empty after comfort distance");
        add_state_row(k, PEY, 1.0, hi, env_slack);
        add_state_row(k, PEY, -1.0, -lo, env_slack);
    }
    return ocp;
}

MpcController::MpcController(const MpcConfig& config, const VehicleParams& params)
    : config_(config), params_(params) {
    config_.validate();
}

void MpcController::set_reference(const track::ReferencePath& path) {
    path_ = path;
    speed_ = SpeedProfile(path_, params_, config_);
    previous_.reset();
}

ControlRates MpcController::safe_stop(const VehicleState& state) const {
    ControlRates cmd;
    cmd.zeta_f = 0.0;
    if (state.u < 1.5 * params_.u_min) {
        // Already at crawl speed; braking further would pin the vehicle on
        // the speed floor where the boxed QP stays infeasible. Creep instead.
        const double a_des = std::min(1.0, params_.ax_max);
        cmd.j_x = std::clamp((a_des - state.a_x) / config_.dt, -params_.jerk_max,
                             params_.jerk_max);
    } else {
        cmd.j_x = std::clamp((params_.ax_min - state.a_x) / config_.dt, -params_.jerk_max,
                             params_.jerk_max);
    }
    return cmd;
}

Nominal MpcController::make_nominal(const VehicleState& state) {
    const int n = config_.horizon;
    Nominal nom;
    nom.inputs.resize(n);

    if (previous_ && static_cast<int>(previous_->inputs.size()) == n) {
        // Shift the previous plan one step, repeating the tail.
        for (int k = 0; k < n - 1; ++k) nom.inputs[k] = previous_->inputs[k + 1];
        nom.inputs[n - 1] = previous_->inputs[n - 1];
    } else {
        // Cold start: unwind steering and bleed acceleration to zero.
        VehicleState sim = state;
        for (int k = 0; k < n; ++k) {
            nom.inputs[k].zeta_f =
                std::clamp(-sim.delta_f / config_.dt, -params_.zeta_max, params_.zeta_max);
            nom.inputs[k].j_x =
                std::clamp(-sim.a_x / config_.dt, -params_.jerk_max, params_.jerk_max);
            sim.delta_f += nom.inputs[k].zeta_f * config_.dt;
            sim.a_x += nom.inputs[k].j_x * config_.dt;
        }
    }

    rollout(nom, state);
    return nom;
}

// Nonlinear rollout with the same Euler substepping the LTV uses; fills the
// nominal's states and arc-length knots from its inputs.
void MpcController::rollout(Nominal& nom, const VehicleState& state) {
    const int n = config_.horizon;
    nom.states.assign(n + 1, state);
    nom.s.assign(n + 1, 0.0);
    const auto frame = path_.project({state.x, state.y}, state.psi);
    nom.s[0] = frame.s;
    VehicleState cur = state;
    cur.e_y = frame.e_y;
    cur.e_psi = frame.e_psi;
    nom.states[0] = cur;
    const double h = config_.dt / config_.substeps;
    double s_run = frame.s;
    for (int k = 0; k < n; ++k) {
        const double kappa = path_.kappa_at(path_.wrap_s(s_run));
        for (int j = 0; j < config_.substeps; ++j) {
            const auto d = dynamics::derivative(cur, nom.inputs[k], kappa, params_);
            auto arr = cur.to_array();
            for (int i = 0; i < 10; ++i) arr[i] += h * d[i];
            cur = VehicleState::from_array(arr);
            cur.u = std::max(cur.u, params_.u_min);  // rollout guard
            s_run += h * cur.u;
        }
        nom.states[k + 1] = cur;
        nom.s[k + 1] = s_run;
    }
}

MpcStepResult MpcController::step(const VehicleState& state) {
    MpcStepResult result;
    if (path_.samples().empty()) {
        result.command = safe_stop(state);
        result.fallback = true;
        return result;
    }

    try {
        Nominal nominal = make_nominal(state);
        for (int attempt = 0; attempt < 2; ++attempt) {
        const auto ltv = linearize(nominal, path_, config_, params_);
        const OcpProblem ocp = build_ocp(nominal.states[0], ltv, nominal, path_, speed_,
                                         speed_cap_, config_, params_);

        const int n = config_.horizon;
        const int n_u = 2 * n;
        const int n_vars = ocp.n_vars();

        // Full problem: OCP rows plus slack nonnegativity.
        QpProblem qp;
        qp.H = ocp.hessian;
        qp.g = ocp.gradient;
        qp.A = MatrixXd::Zero(14 * n + 2 * n, n_vars);
        qp.b = VectorXd::Zero(14 * n + 2 * n);
        qp.A.topRows(14 * n) = ocp.a_ineq;
        qp.b.head(14 * n) = ocp.b_ineq;
        for (int i = 0; i < 2 * n; ++i) qp.A(14 * n + i, n_u + i) = -1.0;

        // Feasible start: nominal inputs clamped to their boxes; slacks
        // raised to cover whatever the soft rows still violate.
        QpWarmStart warm;
        warm.x0 = VectorXd::Zero(n_vars);
        for (int k = 0; k < n; ++k) {
            warm.x0(2 * k) =
                std::clamp(nominal.inputs[k].zeta_f, -params_.zeta_max, params_.zeta_max);
            warm.x0(2 * k + 1) =
                std::clamp(nominal.inputs[k].j_x, -params_.jerk_max, params_.jerk_max);
        }
        for (int pass = 0; pass < 2; ++pass) {
            const VectorXd resid = ocp.a_ineq * warm.x0 - ocp.b_ineq;
            for (int k = 0; k < n; ++k) {
                const int base = 14 * k;
                const double env_need =
                    std::max(resid(base + 12), resid(base + 13));
                const double slip_need = std::max(resid(base + 10), resid(base + 11));
                if (env_need > 0.0) warm.x0(n_u + k) += env_need + 1e-9;
                if (slip_need > 0.0) warm.x0(n_u + n + k) += slip_need + 1e-9;
            }
        }
        if (previous_) warm.working_set = previous_->active_set;

        QpResult sol = solve_qp(qp, warm);
        if (sol.status == QpStatus::kInfeasible) {
            if (attempt == 0) {
                // The shifted plan starts outside the hard boxes (typically
                // the speed floor after heavy braking). Retry once from a
                // gentle-recovery nominal before giving up.
                previous_.reset();
                VehicleState sim = state;
                for (int k = 0; k < config_.horizon; ++k) {
                    nominal.inputs[k].zeta_f = std::clamp(-sim.delta_f / config_.dt,
                                                          -params_.zeta_max, params_.zeta_max);
                    nominal.inputs[k].j_x = std::clamp((0.8 - sim.a_x) / config_.dt,
                                                       -params_.jerk_max, params_.jerk_max);
                    sim.delta_f += nominal.inputs[k].zeta_f * config_.dt;
                    sim.a_x += nominal.inputs[k].j_x * config_.dt;
                }
                rollout(nominal, state);
                continue;
            }
            previous_.reset();
            result.command = safe_stop(state);
            result.fallback = true;
            return result;
        }

        OcpSolution out;
        out.inputs.resize(n);
        for (int k = 0; k < n; ++k)
            out.inputs[k] = {sol.x(2 * k), sol.x(2 * k + 1)};
        out.env_slack = sol.x.segment(n_u, n);
        out.slip_slack = sol.x.segment(n_u + n, n);
        out.status = sol.status;
        out.iterations = sol.iterations;
        out.active_set = sol.active_set;

        // LTV-predicted trajectory for telemetry and compliance checks.
        out.predicted.resize(n + 1);
        out.predicted[0] = nominal.states[0];
        {
            const Condensed cd = condense(nominal.states[0], ltv);
            const VectorXd u = sol.x.head(n_u);
            for (int k = 1; k <= n; ++k) {
                const Eigen::Matrix<double, 7, 1> xk = cd.phi[k] + cd.gamma[k] * u;
                VehicleState s = nominal.states[k];
                s.u = xk(PU);
                s.v = xk(PV);
                s.r = xk(PR);
                s.delta_f = xk(PDELTA);
                s.a_x = xk(PAX);
                s.e_y = xk(PEY);
                s.e_psi = xk(PEPSI);
                out.predicted[k] = s;
            }
        }

        result.command = out.inputs[0];
        result.solution = out;
        previous_ = std::move(out);
        return result;
        }
        // not reached: both attempts return or fall through to safe stop
        result.command = safe_stop(state);
        result.fallback = true;
        return result;
    } catch (const LinearizationError&) {
        previous_.reset();
        result.command = safe_stop(state);
        result.fallback = true;
        return result;
    } catch (const InfeasibleCorridor&) {
        previous_.reset();
        result.command = safe_stop(state);
        result.fallback = true;
        return result;
    } catch (const track::OffTrackError&) {
        previous_.reset();
        result.command = safe_stop(state);
        result.fallback = true;
        return result;
    }
}

PurePursuitConfig PurePursuitConfig::from_config(const Config& cfg) {
    PurePursuitConfig p;
    p.lookahead_base = cfg.get_double("pp.lookahead_base", p.lookahead_base);
    p.lookahead_time = cfg.get_double("pp.lookahead_time", p.lookahead_time);
    p.lookahead_min = cfg.get_double("pp.lookahead_min", p.lookahead_min);
    p.target_speed = cfg.get_double("pp.target_speed", p.target_speed);
    p.kp_speed = cfg.get_double("pp.kp_speed", p.kp_speed);
    return p;
}

void PurePursuitConfig::to_config(Config& cfg) const {
    cfg.set("pp.lookahead_base", lookahead_base);
    cfg.set("pp.lookahead_time", lookahead_time);
    cfg.set("pp.lookahead_min", lookahead_min);
    cfg.set("pp.target_speed", target_speed);
    cfg.set("pp.kp_speed", kp_speed);
}

PurePursuitCommand pure_pursuit_step(const VehicleState& state, const track::ReferencePath& path,
                                     double lookahead, double speed_target,
                                     const VehicleParams& params, double kp_speed) {
    if (!(lookahead > 0.0)) throw std::invalid_argument("pure_pursuit: lookahead must be > 0");

    const Vec2 pos{state.x, state.y};
    track::PathFrame frame;
    try {
        frame = path.project(pos, state.psi, 2.0 * lookahead);
    } catch (const track::OffTrackError&) {
        throw OffPathError("pure_pursuit: no path point within twice the lookahead");
    }
    const track::PathSample goal = path.interpolate(path.wrap_s(frame.s + lookahead));

    const Vec2 to_goal = goal.position - pos;
    const double eta = wrap_angle(std::atan2(to_goal.y, to_goal.x) - state.psi);
    const double chord = std::max(to_goal.norm(), 1e-6);

    PurePursuitCommand cmd;
    cmd.delta_f = std::clamp(std::atan(2.0 * params.wheelbase() * std::sin(eta) / chord),
                             -params.delta_max, params.delta_max);
    cmd.a_x = std::clamp(kp_speed * (speed_target - state.u), params.ax_min, params.ax_max);
    return cmd;
}

}  // namespace fsd::control
