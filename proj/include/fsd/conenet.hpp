#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fsd/config.hpp"
#include "fsd/geometry.hpp"
#include "fsd/track.hpp"

namespace fsd::conenet {

inline constexpr int kMaxCones = 15;
inline constexpr int kInputDim = 2 * kMaxCones;  // interleaved (x, y)
inline constexpr int kClasses = 3;               // 0 pad, 1 red, 2 blue

// One training item: body-frame cone positions nearest-first, zero-padded,
// with a per-slot class label (pad slots are labelled 0).
struct ConeSample {
    std::array<double, kInputDim> input{};
    std::array<int, kMaxCones> labels{};
};

// Nearest-first interleaved encoding; cones beyond the 15 nearest are dropped.
ConeSample encode_input(const std::vector<Vec2>& cones_body);

// Four 1-d convolutions (kernel 3, zero padded) over the 15-slot cone
// sequence with ReLU after each, then a fully-connected layer to per-slot
// class scores. Parameters live in one flat vector so the optimizer and the
// gradient check stay simple.
class Network {
public:
    static constexpr int kConvLayers = 4;
    static constexpr int kKernel = 3;
    static constexpr std::array<int, kConvLayers + 1> kChannels = {2, 16, 32, 32, 32};

    explicit Network(std::uint64_t seed = 0);

    int parameter_count() const { return static_cast<int>(params_.size()); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    // Softmax-normalized class probabilities per cone slot.
    std::array<std::array<double, kClasses>, kMaxCones> forward(
        const std::array<double, kInputDim>& input) const;

    // Masked mean cross-entropy over non-pad slots and its parameter
    // gradient. Gradient vector is accumulated into `grad` (must be
    // parameter_count() long, caller-zeroed).
    double backward(const ConeSample& sample, std::vector<double>& grad) const;

    double sample_loss(const ConeSample& sample) const;

    // Per-slot argmax over {pad, red, blue}.
    std::array<int, kMaxCones> classify(const std::array<double, kInputDim>& input) const;

    void save(const std::string& path) const;
    static Network load(const std::string& path);

private:
    std::vector<double> params_;
    std::array<int, kConvLayers + 1> weight_offsets_{};  // per layer, then FC
    std::array<int, kConvLayers + 1> bias_offsets_{};
    friend struct NetWorkspace;
};

enum class ExecMode { kSerial, kParallel };

// Mean loss and mean parameter gradient over a batch. The parallel path
// computes per-sample gradients independently and reduces them in sample
// order, so both modes produce bit-identical results.
double batch_gradient(const Network& net, const std::vector<ConeSample>& samples,
                      const std::vector<int>& indices, std::vector<double>& grad,
                      ExecMode mode = ExecMode::kParallel);

struct AdamConfig {
    double lr{0.001};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step{0};

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam step (t = state.step after increment).
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
    double lr{0.001};
    int batch_size{16};
    int epochs{200};
    int n_train{6000};
    int n_val{2000};
    int n_test{2000};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
    std::uint64_t seed{1};
    ExecMode mode{ExecMode::kParallel};

    static TrainConfig from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

struct EpochMetrics {
    int epoch{0};
    double train_loss{0.0};
    double val_accuracy{0.0};
};

struct TrainResult {
    Network net{0};           // best validation snapshot
    std::vector<EpochMetrics> history;
    double test_accuracy{0.0};
    int best_epoch{0};
};

// Full training recipe over a pre-split dataset (train | val | test in
// order). Throws std::runtime_error when the loss diverges.
TrainResult train(const TrainConfig& config, const std::vector<ConeSample>& dataset);

// Per-slot accuracy on non-pad labels.
double evaluate_accuracy(const Network& net, const std::vector<ConeSample>& samples,
                         std::size_t begin, std::size_t end, ExecMode mode = ExecMode::kParallel);

struct DatasetSpec {
    int n_samples{10000};
    double visibility_range{10.0};
    double lateral_jitter{1.0};
    double heading_jitter{0.4};

    static DatasetSpec from_config(const Config& cfg);
};

// Samples virtual poses on randomly generated closed tracks and records the
// visible cones with their true colors. Deterministic in (spec, seed).
std::vector<ConeSample> generate_dataset(const DatasetSpec& spec, std::uint64_t seed,
                                         ExecMode mode = ExecMode::kParallel);

void save_dataset_csv(const std::string& path, const std::vector<ConeSample>& data);
std::vector<ConeSample> load_dataset_csv(const std::string& path);

}  // namespace fsd::conenet
