#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "fsd/conenet.hpp"
#include "fsd/csv.hpp"
#include "fsd/harness.hpp"
#include "fsd/rng.hpp"
#include "fsd/track.hpp"

namespace fs = std::filesystem;
using namespace fsd;

namespace {

struct CommonOpts {
    std::string config_file;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = "out";
    std::string controller;
};

harness::EpisodeConfig resolve_config(const CommonOpts& opts) {
    Config cfg;
    if (!opts.config_file.empty()) cfg = Config::parse_file(opts.config_file);
    if (opts.seed_set) cfg.set("mission.seed", opts.seed);
    if (!opts.controller.empty()) cfg.set("mission.controller", opts.controller);
    return harness::EpisodeConfig::from_config(cfg);
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_controller = true) {
    cmd->add_option("--config", opts.config_file, "config file (ini-style)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "master seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--out", opts.out_dir, "output directory");
    if (with_controller)
        cmd->add_option("--controller", opts.controller, "controller: mpc or pp")
            ->check(CLI::IsMember({"mpc", "pp"}));
}

int cmd_sim(const CommonOpts& opts, bool dump_config) {
    if (dump_config) {
        std::cout << harness::EpisodeConfig::defaults().to_config().dump();
        return 0;
    }
    const auto cfg = resolve_config(opts);
    const auto log = harness::run_episode(cfg);
    harness::write_outputs(log, cfg, opts.out_dir);
    std::printf("status: %s, laps: %zu, steps: %zu\n", harness::to_string(log.status).c_str(),
                log.lap_times.size(), log.steps.size());
    return log.status == harness::EpisodeStatus::kCompleted ? 0 : 2;
}

int cmd_gen_track(const CommonOpts& opts) {
    const auto cfg = resolve_config(opts);
    const auto trk = track::generate_loop(cfg.track_spec, cfg.track_seed);
    fs::create_directories(opts.out_dir);
    trk.save_cones_csv((fs::path(opts.out_dir) / "track_cones.csv").string());
    trk.save_centerline_csv((fs::path(opts.out_dir) / "centerline.csv").string());
    std::printf("track: %.1f m, %zu + %zu cones\n", trk.total_length(), trk.blue_cones.size(),
                trk.red_cones.size());
    return 0;
}

int cmd_gen_dataset(const CommonOpts& opts, int n_samples) {
    const auto cfg = resolve_config(opts);
    conenet::DatasetSpec spec = conenet::DatasetSpec::from_config(cfg.raw);
    if (n_samples > 0) spec.n_samples = n_samples;
    const auto data = conenet::generate_dataset(spec, cfg.seed);
    fs::create_directories(opts.out_dir);
    const auto path = (fs::path(opts.out_dir) / "dataset.csv").string();
    conenet::save_dataset_csv(path, data);
    std::printf("wrote %zu samples to %s\n", data.size(), path.c_str());
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_file) {
    const auto cfg = resolve_config(opts);
    const auto dataset = conenet::load_dataset_csv(data_file);
    conenet::TrainConfig tc = conenet::TrainConfig::from_config(cfg.raw);
    if (opts.seed_set) tc.seed = opts.seed;
    const auto result = conenet::train(tc, dataset);

    fs::create_directories(opts.out_dir);
    result.net.save((fs::path(opts.out_dir) / "conenet.bin").string());
    CsvWriter curve((fs::path(opts.out_dir) / "training.csv").string());
    curve.header({"epoch", "train_loss", "val_accuracy"});
    for (const auto& e : result.history) {
        curve.field(e.epoch);
        curve.field(e.train_loss);
        curve.field(e.val_accuracy);
        curve.end_row();
    }
    std::printf("best epoch %d, test accuracy %.4f\n", result.best_epoch, result.test_accuracy);
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& model_file,
             const std::string& data_file) {
    const auto cfg = resolve_config(opts);
    const auto net = conenet::Network::load(model_file);
    const auto dataset = conenet::load_dataset_csv(data_file);
    const conenet::TrainConfig tc = conenet::TrainConfig::from_config(cfg.raw);
    const std::size_t test_begin = dataset.size() > static_cast<std::size_t>(tc.n_test)
                                       ? dataset.size() - tc.n_test
                                       : 0;
    const double acc = conenet::evaluate_accuracy(net, dataset, test_begin, dataset.size());
    std::printf("test accuracy over %zu samples: %.4f\n", dataset.size() - test_begin, acc);
    return 0;
}

int cmd_compare(const CommonOpts& opts) {
    const auto cfg = resolve_config(opts);
    const auto [mpc, pp] = harness::compare_controllers(cfg, opts.out_dir);
    std::printf("%-22s %10s %10s\n", "metric", "mpc", "pp");
    std::printf("%-22s %10.4f %10.4f\n", "lat_accel_std", mpc.lat_accel_std, pp.lat_accel_std);
    std::printf("%-22s %10.4f %10.4f\n", "mean_abs_lateral_err", mpc.mean_abs_lateral_error,
                pp.mean_abs_lateral_error);
    std::printf("%-22s %10.4f %10.4f\n", "average_speed", mpc.average_speed, pp.average_speed);
    std::printf("%-22s %10.4f %10.4f\n", "average_abs_sideslip", mpc.average_abs_sideslip,
                pp.average_abs_sideslip);
    return 0;
}

int cmd_replay(const CommonOpts& opts, const std::string& log_file) {
    const auto cfg = resolve_config(opts);
    const auto measurements = sensors::load_measurements_csv(log_file);
    estimator::Belief initial;
    if (!measurements.empty()) {
        // Seed the pose from the first direct observations.
        for (const auto& m : measurements) {
            if (m.kind == sensors::Kind::kLidarOdom) {
                initial.mean[estimator::kBx] = m.values[0];
                initial.mean[estimator::kBy] = m.values[1];
                initial.mean[estimator::kBtheta] = m.values[2];
                break;
            }
        }
    }
    initial.cov = 1e-2 * estimator::Matrix6::Identity();
    const auto trajectory = harness::replay_measurements(measurements, cfg, initial);

    fs::create_directories(opts.out_dir);
    CsvWriter w((fs::path(opts.out_dir) / "belief_replay.csv").string());
    w.header({"t", "x", "y", "theta", "vx", "vy", "r", "var_x", "var_y", "var_theta", "var_vx",
              "var_vy", "var_r"});
    for (const auto& [t, belief] : trajectory) {
        w.field(t);
        for (int i = 0; i < 6; ++i) w.field(belief.mean[i]);
        for (int i = 0; i < 6; ++i) w.field(belief.cov(i, i));
        w.end_row();
    }
    std::printf("replayed %zu measurements\n", measurements.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop driverless racecar simulator and autonomy stack"};
    app.require_subcommand(1);

    CommonOpts opts;
    bool dump_config = false;
    int n_samples = 0;
    std::string data_file, model_file, log_file;

    auto* sim = app.add_subcommand("sim", "run a closed-loop episode");
    add_common(sim, opts);
    sim->add_flag("--dump-config", dump_config, "print the default config and exit");

    auto* gen_track = app.add_subcommand("gen-track", "generate a cone track");
    add_common(gen_track, opts, false);

    auto* gen_dataset = app.add_subcommand("gen-dataset", "generate classifier training data");
    add_common(gen_dataset, opts, false);
    gen_dataset->add_option("--n", n_samples, "number of samples");

    auto* train = app.add_subcommand("train", "train the cone-colour classifier");
    add_common(train, opts, false);
    train->add_option("--data", data_file, "dataset csv")->required()->check(CLI::ExistingFile);

    auto* eval = app.add_subcommand("eval-conenet", "evaluate a trained classifier");
    add_common(eval, opts, false);
    eval->add_option("--model", model_file, "model file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_file, "dataset csv")->required()->check(CLI::ExistingFile);

    auto* compare = app.add_subcommand("compare", "paired MPC / pure-pursuit episodes");
    add_common(compare, opts, false);

    auto* replay = app.add_subcommand("replay", "re-run the estimator over a measurement log");
    add_common(replay, opts, false);
    replay->add_option("--log", log_file, "measurements csv")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) return cmd_sim(opts, dump_config);
        if (gen_track->parsed()) return cmd_gen_track(opts);
        if (gen_dataset->parsed()) return cmd_gen_dataset(opts, n_samples);
        if (train->parsed()) return cmd_train(opts, data_file);
        if (eval->parsed()) return cmd_eval(opts, model_file, data_file);
        if (compare->parsed()) return cmd_compare(opts);
        if (replay->parsed()) return cmd_replay(opts, log_file);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
