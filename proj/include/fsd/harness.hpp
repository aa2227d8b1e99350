#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsd/config.hpp"
#include "fsd/control.hpp"
#include "fsd/conenet.hpp"
#include "fsd/dynamics.hpp"
#include "fsd/estimator.hpp"
#include "fsd/gridmap.hpp"
#include "fsd/sensors.hpp"
#include "fsd/track.hpp"

namespace fsd::harness {

enum class ControllerKind { kMpc, kPurePursuit };
enum class MissionKind { kTwoLap, kFixedPath };
enum class EpisodeStatus { kCompleted, kCrashed, kTimeout, kPlannerError };

std::string to_string(EpisodeStatus s);

struct EpisodeConfig {
    Config raw;  // resolved config snapshot (defaults + file + overrides)

    track::TrackSpec track_spec;
    std::string track_file;  // cones csv; empty = generate
    std::uint64_t track_seed{42};

    sensors::SensorSchedule schedule;
    sensors::CameraModel camera;
    dynamics::VehicleParams vehicle;
    control::MpcConfig mpc;
    control::PurePursuitConfig pp;

    ControllerKind controller{ControllerKind::kMpc};
    MissionKind mission{MissionKind::kTwoLap};
    double duration{320.0};
    int target_laps{3};        // stop once this many laps are complete
    double lap1_speed_cap{2.0};
    double plant_dt{0.01};
    double control_dt{0.1};
    std::uint64_t seed{1};
    bool use_truth_state{false};  // bypass the estimator (noise-free runs)

    // Mapping pipeline.
    double cluster_eps{0.3};
    int cluster_min_pts{3};
    double cluster_max_extent{0.5};
    int cluster_max_count{200};
    double grid_resolution{0.1};
    double grid_s_max{10.0};
    double grid_s_min_extract{2.5};
    double grid_stamp_weight{0.3};
    double lidar_hit_confidence{0.53};
    double pair_gate{6.0};
    double map_max_range{9.0};  // integrate detections only this close
    double crash_margin{1.0};
    std::string conenet_model;  // optional model file for LiDAR colouring

    static EpisodeConfig defaults();
    static EpisodeConfig from_config(const Config& cfg);
    Config to_config() const;
};

struct StepRecord {
    double t{0.0};
    dynamics::VehicleState truth;
    estimator::Vector6 belief_mean{estimator::Vector6::Zero()};
    estimator::Vector6 belief_var{estimator::Vector6::Zero()};
    bool belief_updated{false};
    double zeta_f{0.0}, j_x{0.0};
    double e_y{0.0}, e_psi{0.0}, s{0.0};  // against the true middle line
    double a_lat{0.0};
    double slip_front{0.0}, slip_rear{0.0};
    double sideslip{0.0};
    int lap{0};
    int solver_iterations{0};
    int solver_status{0};  // QpStatus as int; -1 when not a solve step
    double env_slack{0.0}, slip_slack{0.0};
    bool fallback{false};
};

struct Metrics {
    double lat_accel_std{0.0};
    double mean_abs_lateral_error{0.0};
    double average_speed{0.0};
    double average_abs_sideslip{0.0};
    std::vector<double> lap_times;

    void save_csv(const std::string& path, const std::string& label) const;
};

struct EpisodeLog {
    std::vector<StepRecord> steps;
    std::vector<sensors::Measurement> measurements;
    std::vector<double> lap_times;
    std::vector<gridmap::ExtractedCone> mapped_cones;
    EpisodeStatus status{EpisodeStatus::kTimeout};
    double freeze_time{-1.0};  // reference frozen after lap 1 (two-lap mission)
    std::optional<gridmap::ConeMap> map;
    track::Track track;
    track::ReferencePath reference;  // active reference at episode end
};

EpisodeLog run_episode(const EpisodeConfig& config);

// Table II quantities over the post-lap-1 portion of the log. Throws
// std::runtime_error when the log has no completed-lap segment.
Metrics compute_metrics(const EpisodeLog& log);

// All per-run artifacts under `dir` (created if missing).
void write_outputs(const EpisodeLog& log, const EpisodeConfig& config, const std::string& dir);

// Paired runs of both controllers on the same seed; returns {mpc, pp}.
std::pair<Metrics, Metrics> compare_controllers(const EpisodeConfig& base,
                                                const std::string& out_dir);

// Re-runs the fusion filter over a measurement log.
std::vector<std::pair<double, estimator::Belief>> replay_measurements(
    const std::vector<sensors::Measurement>& measurements, const EpisodeConfig& config,
    const estimator::Belief& initial);

}  // namespace fsd::harness
