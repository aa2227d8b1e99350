#include "fsd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fsd/csv.hpp"
#include "fsd/geometry.hpp"
#include "fsd/perception.hpp"
#include "fsd/planner.hpp"
#include "fsd/rng.hpp"

namespace fsd::harness {

namespace fs = std::filesystem;

std::string to_string(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::kCompleted: return "completed";
        case EpisodeStatus::kCrashed: return "crashed";
        case EpisodeStatus::kTimeout: return "timeout";
        case EpisodeStatus::kPlannerError: return "planner_error";
    }
    return "unknown";
}

EpisodeConfig EpisodeConfig::defaults() { return from_config(Config{}); }

EpisodeConfig EpisodeConfig::from_config(const Config& cfg) {
    EpisodeConfig e;
    e.track_spec = track::TrackSpec::from_config(cfg);
    e.track_file = cfg.get_str("track.file", "");
    e.track_seed = cfg.get_u64("track.seed", e.track_seed);

    e.schedule = sensors::SensorSchedule::from_config(cfg);
    e.camera = sensors::CameraModel::from_config(cfg);
    e.vehicle = dynamics::VehicleParams::from_config(cfg);
    e.mpc = control::MpcConfig::from_config(cfg);
    e.pp = control::PurePursuitConfig::from_config(cfg);

    const std::string ctrl = cfg.get_str("mission.controller", "mpc");
    if (ctrl == "mpc")
        e.controller = ControllerKind::kMpc;
    else if (ctrl == "pp" || ctrl == "pure_pursuit")
        e.controller = ControllerKind::kPurePursuit;
    else
        throw ConfigError("mission.controller must be mpc or pp");

    const std::string mission = cfg.get_str("mission.type", "two_lap");
    if (mission == "two_lap")
        e.mission = MissionKind::kTwoLap;
    else if (mission == "fixed_path")
        e.mission = MissionKind::kFixedPath;
    else
        throw ConfigError("mission.type must be two_lap or fixed_path");

    e.duration = cfg.get_double("mission.duration", e.duration);
    e.target_laps = cfg.get_int("mission.target_laps", e.target_laps);
    e.lap1_speed_cap = cfg.get_double("mission.lap1_speed_cap", e.lap1_speed_cap);
    e.plant_dt = cfg.get_double("mission.plant_dt", e.plant_dt);
    e.control_dt = cfg.get_double("mission.control_dt", e.control_dt);
    e.seed = cfg.get_u64("mission.seed", e.seed);
    e.use_truth_state = cfg.get_bool("estimator.use_truth", e.use_truth_state);

    e.cluster_eps = cfg.get_double("perception.eps", e.cluster_eps);
    e.cluster_min_pts = cfg.get_int("perception.min_pts", e.cluster_min_pts);
    e.cluster_max_extent = cfg.get_double("perception.max_extent", e.cluster_max_extent);
    e.cluster_max_count = cfg.get_int("perception.max_count", e.cluster_max_count);
    e.grid_resolution = cfg.get_double("gridmap.resolution", e.grid_resolution);
    e.grid_s_max = cfg.get_double("gridmap.s_max", e.grid_s_max);
    e.grid_s_min_extract = cfg.get_double("gridmap.s_min_extract", e.grid_s_min_extract);
    e.grid_stamp_weight = cfg.get_double("gridmap.stamp_weight", e.grid_stamp_weight);
    e.lidar_hit_confidence = cfg.get_double("gridmap.lidar_hit_confidence", e.lidar_hit_confidence);
    e.pair_gate = cfg.get_double("planner.pair_gate", e.pair_gate);
    e.map_max_range = cfg.get_double("gridmap.max_range", e.map_max_range);
    e.crash_margin = cfg.get_double("mission.crash_margin", e.crash_margin);
    e.conenet_model = cfg.get_str("conenet.model", "");

    if (!(e.duration > 0.0)) throw ConfigError("mission.duration must be > 0");
    if (!(e.plant_dt > 0.0 && e.plant_dt <= 0.05)) throw ConfigError("mission.plant_dt out of range");

    e.raw = e.to_config();
    return e;
}

Config EpisodeConfig::to_config() const {
    Config cfg;
    track_spec.to_config(cfg);
    cfg.set("track.file", track_file);
    cfg.set("track.seed", track_seed);
    schedule.to_config(cfg);
    camera.to_config(cfg);
    vehicle.to_config(cfg);
    mpc.to_config(cfg);
    pp.to_config(cfg);
    cfg.set("mission.controller", controller == ControllerKind::kMpc ? "mpc" : "pp");
    cfg.set("mission.type", mission == MissionKind::kTwoLap ? "two_lap" : "fixed_path");
    cfg.set("mission.duration", duration);
    cfg.set("mission.target_laps", target_laps);
    cfg.set("mission.lap1_speed_cap", lap1_speed_cap);
    cfg.set("mission.plant_dt", plant_dt);
    cfg.set("mission.control_dt", control_dt);
    cfg.set("mission.seed", seed);
    cfg.set("mission.crash_margin", crash_margin);
    cfg.set("estimator.use_truth", use_truth_state);
    cfg.set("perception.eps", cluster_eps);
    cfg.set("perception.min_pts", cluster_min_pts);
    cfg.set("perception.max_extent", cluster_max_extent);
    cfg.set("perception.max_count", cluster_max_count);
    cfg.set("gridmap.resolution", grid_resolution);
    cfg.set("gridmap.s_max", grid_s_max);
    cfg.set("gridmap.s_min_extract", grid_s_min_extract);
    cfg.set("gridmap.stamp_weight", grid_stamp_weight);
    cfg.set("gridmap.lidar_hit_confidence", lidar_hit_confidence);
    cfg.set("planner.pair_gate", pair_gate);
    cfg.set("gridmap.max_range", map_max_range);
    cfg.set("conenet.model", conenet_model);
    return cfg;
}

namespace {

struct PlannerState {
    std::optional<track::ReferencePath> reference;
    std::optional<Vec2> aim_point;  // lap-1 steering target when no line exists yet
    bool frozen{false};
};

// Forward midpoints chained outward from the vehicle, never doubling back,
// truncated at the first large gap (extend-as-you-see policy).
std::vector<planner::Midpoint> order_for_lap1(const std::vector<planner::Midpoint>& mids,
                                              const Vec2& pos, double psi, double max_gap) {
    std::vector<planner::Midpoint> forward;
    for (const auto& m : mids) {
        const Vec2 body = world_to_body(m.position, pos, psi);
        if (body.x > -1.0) forward.push_back(m);
    }
    if (forward.empty()) return {};

    std::size_t start = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < forward.size(); ++i) {
        const double d = (forward[i].position - pos).squared_norm();
        if (d < best) {
            best = d;
            start = i;
        }
    }
    std::vector<char> used(forward.size(), 0);
    std::vector<planner::Midpoint> chain{forward[start]};
    used[start] = 1;
    Vec2 cur = forward[start].position;
    Vec2 dir = heading_vec(psi);
    while (true) {
        int next = -1;
        double next_d = max_gap * max_gap;
        for (std::size_t j = 0; j < forward.size(); ++j) {
            if (used[j]) continue;
            const Vec2 hop = forward[j].position - cur;
            if (hop.dot(dir) <= 0.0) continue;  // no doubling back
            const double d = hop.squared_norm();
            if (d < next_d) {
                next_d = d;
                next = static_cast<int>(j);
            }
        }
        if (next < 0) break;
        const Vec2 hop = forward[next].position - cur;
        dir = hop * (1.0 / std::max(hop.norm(), 1e-9));
        cur = forward[next].position;
        chain.push_back(forward[next]);
        used[next] = 1;
    }
    return chain;
}

std::vector<planner::Midpoint> close_loop_order(const std::vector<planner::Midpoint>& mids,
                                                const Vec2& pos, double psi) {
    // pair_cones already chains; align orientation with the vehicle.
    std::vector<planner::Midpoint> out = mids;
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = (out[i].position - pos).squared_norm();
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    const Vec2 dir = out[(nearest + 1) % out.size()].position - out[nearest].position;
    if (dir.dot(heading_vec(psi)) < 0.0) std::reverse(out.begin(), out.end());
    return out;
}

struct ConeSplit {
    std::vector<Vec2> blue, red;
};

// Pose noise smears a cone's evidence; satellite blobs under a metre from a
// stronger blob are the same cone.
std::vector<gridmap::ExtractedCone> merge_close_cones(std::vector<gridmap::ExtractedCone> cones,
                                                      double radius = 0.8) {
    std::stable_sort(cones.begin(), cones.end(),
                     [](const auto& a, const auto& b) { return a.strength > b.strength; });
    std::vector<gridmap::ExtractedCone> kept;
    for (const auto& c : cones) {
        bool dup = false;
        for (const auto& k : kept)
            if ((k.position - c.position).norm() < radius) {
                dup = true;
                break;
            }
        if (!dup) kept.push_back(c);
    }
    return kept;
}

ConeSplit split_cones(const std::vector<gridmap::ExtractedCone>& cones) {
    ConeSplit s;
    for (const auto& c : cones)
        (c.color == track::ConeColor::kBlue ? s.blue : s.red).push_back(c.position);
    return s;
}

}  // namespace

EpisodeLog run_episode(const EpisodeConfig& config) {
    EpisodeLog log;

    // Plant and world. A track file holds cones only; the centreline comes
    // back through cone pairing, with circumcircle curvature.
    track::ReferencePath true_ref;
    if (config.track_file.empty()) {
        log.track = track::generate_loop(config.track_spec, config.track_seed);
        true_ref = track::ReferencePath::from_track(log.track);
    } else {
        const auto cones = track::Track::load_cones_csv(config.track_file);
        ConeSplit split;
        log.track.width = config.track_spec.width;
        log.track.spacing = config.track_spec.spacing;
        for (const auto& c : cones) {
            (c.color == track::ConeColor::kBlue ? split.blue : split.red).push_back(c.position);
            (c.color == track::ConeColor::kBlue ? log.track.blue_cones : log.track.red_cones)
                .push_back(c);
        }
        const auto mids = planner::pair_cones(split.blue, split.red, config.pair_gate);
        true_ref = planner::build_reference(mids, true);
        for (std::size_t i = 0; i + 1 < true_ref.samples().size(); ++i) {
            track::Segment seg;
            seg.start = true_ref.samples()[i].position;
            const Vec2 d = true_ref.samples()[i + 1].position - seg.start;
            seg.heading = std::atan2(d.y, d.x);
            seg.length = d.norm();
            seg.kappa = true_ref.samples()[i].kappa;
            log.track.segments.push_back(seg);
        }
    }
    log.reference = true_ref;
    const double track_len = true_ref.length();
    const double corridor_bound = log.track.width / 2.0 - 0.15;

    dynamics::VehicleState truth;
    {
        const auto& s0 = true_ref.samples().front();
        truth.x = s0.position.x;
        truth.y = s0.position.y;
        truth.psi = s0.heading;
        truth.u = 1.0;
    }

    // Sensing and estimation.
    sensors::SensorSampler sampler(config.schedule, config.camera, config.vehicle,
                                   derive_seed(config.seed, 0x53454e53ULL));
    const sensors::Homography pixel_to_ground = config.camera.calibrate();
    const estimator::FusionConfig fusion_cfg =
        estimator::FusionConfig::from_schedule(config.schedule, config.raw);
    estimator::Belief belief;
    belief.mean << truth.x, truth.y, truth.psi, truth.u, truth.v, truth.r;
    belief.cov = 1e-4 * estimator::Matrix6::Identity();
    estimator::FusionRunner fusion(belief, fusion_cfg);

    // Mapping pipeline.
    gridmap::ConeMap map(config.grid_resolution, config.grid_s_max);
    std::optional<conenet::Network> colornet;
    if (!config.conenet_model.empty()) colornet = conenet::Network::load(config.conenet_model);

    // Controllers.
    control::MpcController mpc(config.mpc, config.vehicle);
    PlannerState plan;
    const bool fixed_path = config.mission == MissionKind::kFixedPath;
    if (fixed_path) {
        plan.reference = true_ref;
        plan.frozen = true;
        mpc.set_reference(true_ref);
    } else {
        mpc.set_speed_cap(config.lap1_speed_cap);
    }

    // Timing.
    const double dt = config.plant_dt;
    const int n_steps = static_cast<int>(std::llround(config.duration / dt));
    const int ctrl_every = std::max(1, static_cast<int>(std::llround(config.control_dt / dt)));
    const int plan_every = std::max(1, static_cast<int>(std::llround(0.5 / dt)));

    dynamics::ControlRates command;
    int lap = 0;
    bool lap_armed = false;
    log.status = EpisodeStatus::kTimeout;

    for (int step_i = 0; step_i <= n_steps; ++step_i) {
        const double t = step_i * dt;

        // True path frame drives logging, crash and lap bookkeeping.
        const auto frame = true_ref.project({truth.x, truth.y}, truth.psi);
        truth.e_y = frame.e_y;
        truth.e_psi = frame.e_psi;

        if (std::abs(frame.e_y) > corridor_bound + config.crash_margin) {
            log.status = EpisodeStatus::kCrashed;
            break;
        }
        if (frame.s > 0.5 * track_len) lap_armed = true;
        if (lap_armed && frame.s < 0.2 * track_len) {
            ++lap;
            log.lap_times.push_back(t);
            lap_armed = false;
            if (!fixed_path && !plan.frozen) {
                // Lap-1 exit test: coverage or loop closure of the midpoints.
                const auto cones = merge_close_cones(map.extract_cones(config.grid_s_min_extract));
                int matched = 0;
                for (const auto& c : log.track.all_cones())
                    for (const auto& e : cones)
                        if ((e.position - c.position).norm() < 1.0) {
                            ++matched;
                            break;
                        }
                const double coverage =
                    static_cast<double>(matched) / log.track.all_cones().size();
                try {
                    const ConeSplit split = split_cones(cones);
                    auto mids = planner::pair_cones(split.blue, split.red, config.pair_gate);
                    const bool closure =
                        mids.size() >= 10 &&
                        (mids.front().position - mids.back().position).norm() <= config.pair_gate;
                    if (coverage >= 0.9 || closure) {
                        mids = close_loop_order(mids, {truth.x, truth.y}, truth.psi);
                        plan.reference = planner::build_reference(mids, true);
                        plan.frozen = true;
                        log.freeze_time = t;
                        log.mapped_cones = cones;
                        mpc.set_reference(*plan.reference);
                        mpc.set_speed_cap(0.0);
                    }
                } catch (const planner::PlanningError&) {
                    // stay in mapping mode for another lap
                }
            }
            if (lap >= config.target_laps) {
                log.status = EpisodeStatus::kCompleted;
                break;
            }
        }

        // Sensors fire on their own schedules.
        const auto measurements = sampler.sample(truth, log.track, t);
        bool belief_touched = false;
        for (const auto& m : measurements) {
            log.measurements.push_back(m);
            if (!config.use_truth_state) {
                fusion.process(m);
                belief_touched = true;
            }

            if (!fixed_path) {
                const Pose2 obs_pose = config.use_truth_state
                                           ? Pose2{{truth.x, truth.y}, truth.psi}
                                           : Pose2{{fusion.belief().mean[estimator::kBx],
                                                    fusion.belief().mean[estimator::kBy]},
                                                   fusion.belief().mean[estimator::kBtheta]};
                if (m.kind == sensors::Kind::kConeScan) {
                    const auto clusters = perception::detect_cones(
                        m.scan_points(), config.cluster_eps, config.cluster_min_pts,
                        {config.cluster_max_extent, config.cluster_max_count});
                    std::vector<Vec2> centers;
                    for (const auto& c : clusters) centers.push_back(c.centroid);
                    if (colornet && !centers.empty()) {
                        const auto sample = conenet::encode_input(centers);
                        const auto probs = colornet->forward(sample.input);
                        std::vector<gridmap::ConeDetection> dets;
                        for (std::size_t i = 0; i < std::min<std::size_t>(centers.size(),
                                                                          conenet::kMaxCones);
                             ++i) {
                            const Vec2 p{sample.input[2 * i], sample.input[2 * i + 1]};
                            const double p_red = probs[i][1], p_blue = probs[i][2];
                            gridmap::ConeDetection d;
                            d.position = p;
                            d.color = p_red >= p_blue ? track::ConeColor::kRed
                                                      : track::ConeColor::kBlue;
                            d.confidence = std::clamp(std::max(p_red, p_blue), 0.55, 0.95);
                            dets.push_back(d);
                        }
                        map.integrate_detections(dets, obs_pose, config.grid_stamp_weight);
                    } else if (!centers.empty()) {
                        map.integrate_uncolored(centers, obs_pose, config.lidar_hit_confidence,
                                                config.grid_stamp_weight);
                    }
                } else if (m.kind == sensors::Kind::kCameraDetections) {
                    std::vector<gridmap::ConeDetection> dets;
                    for (const auto& cd : m.detections()) {
                        try {
                            const Vec2 ground = pixel_to_ground.apply({cd.u, cd.v});
                            // Noisy pixels near the horizon invert to wild
                            // ranges; keep only plausible forward returns.
                            if (ground.x < 0.3 || ground.norm() > config.map_max_range)
                                continue;
                            dets.push_back({ground, cd.color, std::clamp(cd.confidence, 0.55, 0.9)});
                        } catch (const std::domain_error&) {
                            // horizon pixel after noise; skip
                        }
                    }
                    map.integrate_detections(dets, obs_pose, config.grid_stamp_weight);
                }
            }
        }

        // Lap-1 planning from the accumulating map.
        if (!fixed_path && !plan.frozen && step_i % plan_every == 0 && t > 0.4) {
            std::optional<track::ReferencePath> fresh;
            plan.aim_point.reset();
            try {
                const auto cones = merge_close_cones(map.extract_cones(config.grid_s_min_extract));
                const ConeSplit split = split_cones(cones);
                auto mids = planner::pair_cones(split.blue, split.red, config.pair_gate);
                mids = order_for_lap1(mids, {truth.x, truth.y}, truth.psi,
                                      3.0 * log.track.spacing);
                if (!mids.empty()) {
                    // Aim a few meters down the chain, not across the corner.
                    plan.aim_point = mids.back().position;
                    for (const auto& m : mids)
                        if ((m.position - Vec2{truth.x, truth.y}).norm() >= 4.0) {
                            plan.aim_point = m.position;
                            break;
                        }
                    if (mids.size() >= 3 &&
                        (mids.front().position - Vec2{truth.x, truth.y}).norm() < 10.0)
                        fresh = planner::build_reference(mids, false);
                }
                if (std::getenv("FSD_DEBUG_PLANNER"))
                    std::fprintf(stderr, "[plan t=%.1f] cones=%zu mids=%zu ref=%d near=%.1f\n", t,
                                 cones.size(), mids.size(), fresh ? 1 : 0,
                                 mids.empty() ? -1.0
                                              : (mids.front().position - Vec2{truth.x, truth.y})
                                                    .norm());
            } catch (const planner::PlanningError& e) {
                if (std::getenv("FSD_DEBUG_PLANNER"))
                    std::fprintf(stderr, "[plan t=%.1f] planning error: %s\n", t, e.what());
            } catch (const track::OffTrackError&) {
            }
            if (fresh) {
                plan.reference = std::move(fresh);
            } else {
                // No usable middle line from here; steer by sight instead.
                plan.reference.reset();
            }
        }

        // Controller tick.
        StepRecord rec;
        rec.solver_status = -1;
        if (step_i % ctrl_every == 0) {
            dynamics::VehicleState ctrl_state = truth;
            if (!config.use_truth_state) {
                const auto& b = fusion.belief().mean;
                ctrl_state.x = b[estimator::kBx];
                ctrl_state.y = b[estimator::kBy];
                ctrl_state.psi = b[estimator::kBtheta];
                ctrl_state.u = std::max(b[estimator::kBvx], config.vehicle.u_min);
                ctrl_state.v = b[estimator::kBvy];
                ctrl_state.r = b[estimator::kBr];
            }

            const bool mapping_phase = !fixed_path && !plan.frozen;
            if (mapping_phase || !plan.reference) {
                // Exploration driving: geometric steering along whatever
                // middle line exists so far, at the lap-1 cap. The selected
                // controller takes over once the map freezes.
                double delta_cmd = 0.0;
                bool steered = false;
                if (plan.reference) {
                    try {
                        const auto cmd = control::pure_pursuit_step(
                            ctrl_state, *plan.reference, 3.0, config.lap1_speed_cap,
                            config.vehicle, config.pp.kp_speed);
                        delta_cmd = cmd.delta_f;
                        steered = true;
                    } catch (const control::OffPathError&) {
                    }
                }
                if (!steered && plan.aim_point) {
                    const Vec2 body = world_to_body(*plan.aim_point, {ctrl_state.x, ctrl_state.y},
                                                    ctrl_state.psi);
                    if (body.x > 2.0) {
                        const double eta = std::atan2(body.y, body.x);
                        delta_cmd = std::clamp(
                            std::atan(2.0 * config.vehicle.wheelbase() * std::sin(eta) /
                                      std::max(body.norm(), 1e-3)),
                            -config.vehicle.delta_max, config.vehicle.delta_max);
                        steered = true;
                    }
                }
                command.zeta_f =
                    std::clamp((delta_cmd - truth.delta_f) / config.control_dt,
                               -config.vehicle.zeta_max, config.vehicle.zeta_max);
                const double a_des = std::clamp(config.lap1_speed_cap - truth.u,
                                                config.vehicle.ax_min, config.vehicle.ax_max);
                command.j_x = std::clamp((a_des - truth.a_x) / config.control_dt,
                                         -config.vehicle.jerk_max, config.vehicle.jerk_max);
                rec.fallback = !steered;
            } else if (config.controller == ControllerKind::kMpc) {
                const auto out = mpc.step(ctrl_state);
                command = out.command;
                rec.fallback = out.fallback;
                if (!out.fallback) {
                    rec.solver_iterations = out.solution.iterations;
                    rec.solver_status = static_cast<int>(out.solution.status);
                    rec.env_slack = out.solution.env_slack.size()
                                        ? out.solution.env_slack.maxCoeff()
                                        : 0.0;
                    rec.slip_slack = out.solution.slip_slack.size()
                                         ? out.solution.slip_slack.maxCoeff()
                                         : 0.0;
                }
            } else {
                const double lookahead =
                    std::max(config.pp.lookahead_min,
                             std::min(config.pp.lookahead_base,
                                      config.pp.lookahead_time * ctrl_state.u));
                double target = config.pp.target_speed;
                if (!plan.frozen) target = std::min(target, config.lap1_speed_cap);
                try {
                    const auto cmd = control::pure_pursuit_step(ctrl_state, *plan.reference,
                                                                lookahead, target, config.vehicle,
                                                                config.pp.kp_speed);
                    command.zeta_f =
                        std::clamp((cmd.delta_f - truth.delta_f) / config.control_dt,
                                   -config.vehicle.zeta_max, config.vehicle.zeta_max);
                    command.j_x = std::clamp((cmd.a_x - truth.a_x) / config.control_dt,
                                             -config.vehicle.jerk_max, config.vehicle.jerk_max);
                } catch (const control::OffPathError&) {
                    command.zeta_f = std::clamp(-truth.delta_f / config.control_dt,
                                                -config.vehicle.zeta_max,
                                                config.vehicle.zeta_max);
                    command.j_x = std::clamp((0.0 - truth.a_x) / config.control_dt,
                                             -config.vehicle.jerk_max, config.vehicle.jerk_max);
                    rec.fallback = true;
                }
            }
        } else {
            rec.fallback = false;
        }

        // Log the step.
        const auto deriv = dynamics::derivative(truth, command, true_ref.kappa_at(frame.s),
                                                config.vehicle);
        rec.t = t;
        rec.truth = truth;
        if (config.use_truth_state) {
            rec.belief_mean << truth.x, truth.y, truth.psi, truth.u, truth.v, truth.r;
            rec.belief_var.setZero();
            rec.belief_updated = true;
        } else {
            rec.belief_mean = fusion.belief().mean;
            rec.belief_var = fusion.belief().cov.diagonal();
            rec.belief_updated = belief_touched;
        }
        rec.zeta_f = command.zeta_f;
        rec.j_x = command.j_x;
        rec.e_y = frame.e_y;
        rec.e_psi = frame.e_psi;
        rec.s = frame.s;
        rec.a_lat = truth.u * truth.r + deriv[dynamics::kV];
        const double u_slip = std::max(truth.u, config.vehicle.u_min);
        rec.slip_front =
            std::atan((truth.v + config.vehicle.lf * truth.r) / u_slip) - truth.delta_f;
        rec.slip_rear = std::atan((truth.v - config.vehicle.lr * truth.r) / u_slip);
        rec.sideslip = std::atan(truth.v / u_slip);
        rec.lap = lap;
        log.steps.push_back(rec);

        // Plant step with actuator stops; no reverse gear.
        truth = dynamics::step(truth, command, true_ref.kappa_at(frame.s), dt, config.vehicle);
        truth.delta_f =
            std::clamp(truth.delta_f, -config.vehicle.delta_max, config.vehicle.delta_max);
        truth.a_x = std::clamp(truth.a_x, config.vehicle.ax_min, config.vehicle.ax_max);
        if (truth.u < 0.1) {
            truth.u = 0.1;
            if (truth.a_x < 0.0) truth.a_x = 0.0;
        }
    }

    if (!fixed_path) {
        if (!plan.frozen && log.status != EpisodeStatus::kCrashed)
            log.status = EpisodeStatus::kPlannerError;
        log.map = std::move(map);
        if (log.mapped_cones.empty() && log.map)
            log.mapped_cones = merge_close_cones(log.map->extract_cones(config.grid_s_min_extract));
        if (plan.frozen && plan.reference) log.reference = *plan.reference;
    }
    return log;
}

Metrics compute_metrics(const EpisodeLog& log) {
    std::vector<const StepRecord*> rows;
    for (const auto& r : log.steps)
        if (r.lap >= 1) rows.push_back(&r);
    if (rows.empty())
        throw std::runtime_error("compute_metrics: log has no post-lap-1 segment");

    Metrics m;
    double sum_alat = 0.0, sum_ey = 0.0, sum_u = 0.0, sum_slip = 0.0;
    for (const auto* r : rows) {
        sum_alat += r->a_lat;
        sum_ey += std::abs(r->e_y);
        sum_u += r->truth.u;
        sum_slip += std::abs(r->sideslip);
    }
    const double n = static_cast<double>(rows.size());
    const double mean_alat = sum_alat / n;
    double var = 0.0;
    for (const auto* r : rows) var += (r->a_lat - mean_alat) * (r->a_lat - mean_alat);
    m.lat_accel_std = std::sqrt(var / n);
    m.mean_abs_lateral_error = sum_ey / n;
    m.average_speed = sum_u / n;
    m.average_abs_sideslip = sum_slip / n;

    for (std::size_t i = 1; i < log.lap_times.size(); ++i)
        m.lap_times.push_back(log.lap_times[i] - log.lap_times[i - 1]);
    return m;
}

void Metrics::save_csv(const std::string& path, const std::string& label) const {
    CsvWriter w(path);
    w.header({"controller", "lat_accel_std", "mean_abs_lateral_error", "average_speed",
              "average_abs_sideslip", "n_laps"});
    w.field(label);
    w.field(lat_accel_std);
    w.field(mean_abs_lateral_error);
    w.field(average_speed);
    w.field(average_abs_sideslip);
    w.field(lap_times.size());
    w.end_row();
}

namespace {

const char* kRunReadme =
    "# Run directory\n"
    "\n"
    "- `config.ini` - resolved configuration the episode ran with.\n"
    "- `measurements.csv` - raw sensor stream: t, kind, then kind-specific values\n"
    "  (gnss_pos: x,y | ins: ax,ay,yaw_rate | wheel_speed: vx | lidar_odom: x,y,psi |\n"
    "   cone_scan: x1,y1,... body frame | camera_detections: color,conf,u,v per cone).\n"
    "- `belief.csv` - t, estimated [x y theta vx vy r], covariance diagonal.\n"
    "- `telemetry.csv` - per plant tick: t, truth state (x y psi u v r delta_f a_x),\n"
    "  commands (zeta_f j_x), path frame (e_y e_psi s), a_lat, slip angles, sideslip,\n"
    "  lap, solver iterations/status, slack maxima, fallback flag.\n"
    "- `cones.csv` - cones extracted from the occupancy map: x, y, color, strength.\n"
    "- `map_red.pgm` / `map_blue.pgm` - log-odds channels, 0.5 = uninformed.\n"
    "- `reference.csv` - reference path used after the mapping lap (s, x, y,\n"
    "  heading, kappa, corridor bounds).\n"
    "- `metrics.csv` - Table-style summary over completed laps (when available).\n"
    "- `status.txt` - final episode status and lap times.\n";

}  // namespace

void write_outputs(const EpisodeLog& log, const EpisodeConfig& config, const std::string& dir) {
    fs::create_directories(dir);
    const auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

    {
        std::ofstream out(path("config.ini"));
        out << config.to_config().dump();
    }
    {
        std::ofstream out(path("README.md"));
        out << kRunReadme;
    }
    sensors::save_measurements_csv(path("measurements.csv"), log.measurements);

    {
        CsvWriter w(path("belief.csv"));
        w.header({"t", "x", "y", "theta", "vx", "vy", "r", "var_x", "var_y", "var_theta",
                  "var_vx", "var_vy", "var_r"});
        for (const auto& r : log.steps) {
            if (!r.belief_updated) continue;
            w.field(r.t);
            for (int i = 0; i < 6; ++i) w.field(r.belief_mean[i]);
            for (int i = 0; i < 6; ++i) w.field(r.belief_var[i]);
            w.end_row();
        }
    }
    {
        CsvWriter w(path("telemetry.csv"));
        w.header({"t",      "x",     "y",      "psi",       "u",          "v",
                  "r",      "delta_f", "a_x",  "zeta_f",    "j_x",        "e_y",
                  "e_psi",  "s",     "a_lat",  "slip_front", "slip_rear", "sideslip",
                  "lap",    "solver_iterations", "solver_status", "env_slack", "slip_slack",
                  "fallback"});
        for (const auto& r : log.steps) {
            w.field(r.t);
            w.field(r.truth.x);
            w.field(r.truth.y);
            w.field(r.truth.psi);
            w.field(r.truth.u);
            w.field(r.truth.v);
            w.field(r.truth.r);
            w.field(r.truth.delta_f);
            w.field(r.truth.a_x);
            w.field(r.zeta_f);
            w.field(r.j_x);
            w.field(r.e_y);
            w.field(r.e_psi);
            w.field(r.s);
            w.field(r.a_lat);
            w.field(r.slip_front);
            w.field(r.slip_rear);
            w.field(r.sideslip);
            w.field(r.lap);
            w.field(r.solver_iterations);
            w.field(r.solver_status);
            w.field(r.env_slack);
            w.field(r.slip_slack);
            w.field(std::string(r.fallback ? "1" : "0"));
            w.end_row();
        }
    }
    {
        CsvWriter w(path("cones.csv"));
        w.header({"x", "y", "color", "strength"});
        for (const auto& c : log.mapped_cones) {
            w.field(c.position.x);
            w.field(c.position.y);
            w.field(std::string(c.color == track::ConeColor::kBlue ? "blue" : "red"));
            w.field(c.strength);
            w.end_row();
        }
    }
    if (log.map) {
        log.map->save_pgm(track::ConeColor::kRed, path("map_red.pgm"));
        log.map->save_pgm(track::ConeColor::kBlue, path("map_blue.pgm"));
    }
    try {
        const Metrics m = compute_metrics(log);
        m.save_csv(path("metrics.csv"),
                   config.controller == ControllerKind::kMpc ? "mpc" : "pp");
    } catch (const std::runtime_error&) {
        // not enough laps for metrics; leave the file out
    }
    {
        std::ofstream out(path("status.txt"));
        out << to_string(log.status) << "\n";
        for (std::size_t i = 0; i < log.lap_times.size(); ++i)
            out << "lap" << (i + 1) << " " << format_double(log.lap_times[i]) << "\n";
    }
    if (!log.reference.samples().empty()) log.reference.save_csv(path("reference.csv"));
}

std::pair<Metrics, Metrics> compare_controllers(const EpisodeConfig& base,
                                                const std::string& out_dir) {
    std::array<EpisodeConfig, 2> configs{base, base};
    configs[0].controller = ControllerKind::kMpc;
    configs[1].controller = ControllerKind::kPurePursuit;
    std::array<EpisodeLog, 2> logs;

#pragma omp parallel for schedule(static)
    for (int i = 0; i < 2; ++i) logs[i] = run_episode(configs[i]);

    write_outputs(logs[0], configs[0], (fs::path(out_dir) / "mpc").string());
    write_outputs(logs[1], configs[1], (fs::path(out_dir) / "pp").string());

    const Metrics mpc = compute_metrics(logs[0]);
    const Metrics pp = compute_metrics(logs[1]);

    fs::create_directories(out_dir);
    CsvWriter w((fs::path(out_dir) / "metrics.csv").string());
    w.header({"controller", "lat_accel_std", "mean_abs_lateral_error", "average_speed",
              "average_abs_sideslip", "n_laps"});
    for (const auto& [label, m] : {std::pair<std::string, const Metrics&>{"mpc", mpc},
                                   std::pair<std::string, const Metrics&>{"pp", pp}}) {
        w.field(label);
        w.field(m.lat_accel_std);
        w.field(m.mean_abs_lateral_error);
        w.field(m.average_speed);
        w.field(m.average_abs_sideslip);
        w.field(m.lap_times.size());
        w.end_row();
    }
    return {mpc, pp};
}

std::vector<std::pair<double, estimator::Belief>> replay_measurements(
    const std::vector<sensors::Measurement>& measurements, const EpisodeConfig& config,
    const estimator::Belief& initial) {
    const estimator::FusionConfig fusion_cfg =
        estimator::FusionConfig::from_schedule(config.schedule, config.raw);
    estimator::FusionRunner fusion(initial, fusion_cfg);

    std::vector<std::pair<double, estimator::Belief>> out;
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        fusion.process(measurements[i]);
        const bool last_at_t =
            i + 1 == measurements.size() || measurements[i + 1].t > measurements[i].t + 1e-12;
        if (last_at_t) out.emplace_back(measurements[i].t, fusion.belief());
    }
    return out;
}

}  // namespace fsd::harness
