#include "fsd/conenet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fsd/csv.hpp"
#include "fsd/rng.hpp"

namespace fsd::conenet {

namespace {

constexpr int kLen = kMaxCones;
constexpr int kFcIn = Network::kChannels[Network::kConvLayers] * kLen;
constexpr int kFcOut = kClasses * kLen;

// Activation buffers sized for the widest layer.
struct Workspace {
    // Pre-activations of each conv layer, input, and post-ReLU of the last.
    std::array<double, 2 * kLen> a0;
    std::array<std::array<double, 32 * kLen>, Network::kConvLayers> z;
    std::array<double, 32 * kLen> a_last;
    std::array<double, kFcOut> logits;
    std::array<double, kFcOut> probs;
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

ConeSample encode_input(const std::vector<Vec2>& cones_body) {
    std::vector<Vec2> cones = cones_body;
    std::sort(cones.begin(), cones.end(), [](const Vec2& a, const Vec2& b) {
        const double ra = a.squared_norm(), rb = b.squared_norm();
        if (ra != rb) return ra < rb;
        if (a.x != b.x) return a.x < b.x;
        return a.y < b.y;
    });
    if (cones.size() > kMaxCones) cones.resize(kMaxCones);

    ConeSample s{};
    for (std::size_t i = 0; i < cones.size(); ++i) {
        s.input[2 * i] = cones[i].x;
        s.input[2 * i + 1] = cones[i].y;
    }
    return s;
}

Network::Network(std::uint64_t seed) {
    int offset = 0;
    for (int l = 0; l < kConvLayers; ++l) {
        weight_offsets_[l] = offset;
        offset += kChannels[l + 1] * kChannels[l] * kKernel;
        bias_offsets_[l] = offset;
        offset += kChannels[l + 1];
    }
    weight_offsets_[kConvLayers] = offset;
    offset += kFcOut * kFcIn;
    bias_offsets_[kConvLayers] = offset;
    offset += kFcOut;
    params_.assign(offset, 0.0);

    Rng rng(seed);
    for (int l = 0; l < kConvLayers; ++l) {
        const double std_dev = std::sqrt(2.0 / (kChannels[l] * kKernel));
        const int n_w = kChannels[l + 1] * kChannels[l] * kKernel;
        for (int i = 0; i < n_w; ++i) params_[weight_offsets_[l] + i] = rng.gaussian(0.0, std_dev);
    }
    const double fc_std = std::sqrt(1.0 / kFcIn);
    for (int i = 0; i < kFcOut * kFcIn; ++i)
        params_[weight_offsets_[kConvLayers] + i] = rng.gaussian(0.0, fc_std);
}

std::array<std::array<double, kClasses>, kMaxCones> Network::forward(
    const std::array<double, kInputDim>& input) const {
    Workspace ws;
    // Deinterleave into channel-major [c * kLen + pos].
    for (int pos = 0; pos < kLen; ++pos) {
        ws.a0[pos] = input[2 * pos];
        ws.a0[kLen + pos] = input[2 * pos + 1];
    }
    const double* in = ws.a0.data();
    for (int l = 0; l < kConvLayers; ++l) {
        const int c_in = kChannels[l];
        const int c_out = kChannels[l + 1];
        double* z = ws.z[l].data();
        for (int co = 0; co < c_out; ++co) {
            const double bias = params_[bias_offsets_[l] + co];
            for (int pos = 0; pos < kLen; ++pos) z[co * kLen + pos] = bias;
            for (int ci = 0; ci < c_in; ++ci) {
                const double* w = &params_[weight_offsets_[l] + (co * c_in + ci) * kKernel];
                const double* x = in + ci * kLen;
                for (int pos = 0; pos < kLen; ++pos) {
                    double acc = 0.0;
                    if (pos > 0) acc += w[0] * x[pos - 1];
                    acc += w[1] * x[pos];
                    if (pos < kLen - 1) acc += w[2] * x[pos + 1];
                    z[co * kLen + pos] += acc;
                }
            }
        }
        // The z pass only reads the previous activation, so a_last can be
        // reused as the next layer's input.
        for (int i = 0; i < c_out * kLen; ++i) ws.a_last[i] = relu(z[i]);
        in = ws.a_last.data();
    }

    // Fully connected + per-slot softmax.
    std::array<std::array<double, kClasses>, kMaxCones> out{};
    for (int pos = 0; pos < kLen; ++pos) {
        std::array<double, kClasses> logit{};
        for (int c = 0; c < kClasses; ++c) {
            const int o = pos * kClasses + c;
            double acc = params_[bias_offsets_[kConvLayers] + o];
            const double* w = &params_[weight_offsets_[kConvLayers] + o * kFcIn];
            for (int i = 0; i < kFcIn; ++i) acc += w[i] * ws.a_last[i];
            logit[c] = acc;
        }
        const double mx = std::max({logit[0], logit[1], logit[2]});
        double denom = 0.0;
        for (int c = 0; c < kClasses; ++c) denom += std::exp(logit[c] - mx);
        for (int c = 0; c < kClasses; ++c) out[pos][c] = std::exp(logit[c] - mx) / denom;
    }
    return out;
}

std::array<int, kMaxCones> Network::classify(const std::array<double, kInputDim>& input) const {
    const auto probs = forward(input);
    std::array<int, kMaxCones> labels{};
    for (int pos = 0; pos < kLen; ++pos) {
        int best = 0;
        for (int c = 1; c < kClasses; ++c)
            if (probs[pos][c] > probs[pos][best]) best = c;
        labels[pos] = best;
    }
    return labels;
}

double Network::sample_loss(const ConeSample& sample) const {
    const auto probs = forward(sample.input);
    double loss = 0.0;
    int count = 0;
    for (int pos = 0; pos < kLen; ++pos) {
        if (sample.labels[pos] == 0) continue;
        loss -= std::log(std::max(probs[pos][sample.labels[pos]], 1e-300));
        ++count;
    }
    return count > 0 ? loss / count : 0.0;
}

double Network::backward(const ConeSample& sample, std::vector<double>& grad) const {
    if (grad.size() != params_.size())
        throw std::invalid_argument("backward: gradient buffer size mismatch");

    // Forward pass keeping every pre-activation.
    std::array<double, 2 * kLen> a0;
    for (int pos = 0; pos < kLen; ++pos) {
        a0[pos] = sample.input[2 * pos];
        a0[kLen + pos] = sample.input[2 * pos + 1];
    }
    std::array<std::array<double, 32 * kLen>, kConvLayers> z;
    std::array<std::array<double, 32 * kLen>, kConvLayers> act;
    const double* in = a0.data();
    for (int l = 0; l < kConvLayers; ++l) {
        const int c_in = kChannels[l];
        const int c_out = kChannels[l + 1];
        for (int co = 0; co < c_out; ++co) {
            const double bias = params_[bias_offsets_[l] + co];
            double* zl = &z[l][co * kLen];
            for (int pos = 0; pos < kLen; ++pos) zl[pos] = bias;
            for (int ci = 0; ci < c_in; ++ci) {
                const double* w = &params_[weight_offsets_[l] + (co * c_in + ci) * kKernel];
                const double* x = in + ci * kLen;
                for (int pos = 0; pos < kLen; ++pos) {
                    double acc = 0.0;
                    if (pos > 0) acc += w[0] * x[pos - 1];
                    acc += w[1] * x[pos];
                    if (pos < kLen - 1) acc += w[2] * x[pos + 1];
                    zl[pos] += acc;
                }
            }
        }
        for (int i = 0; i < c_out * kLen; ++i) act[l][i] = relu(z[l][i]);
        in = act[l].data();
    }
    const double* a_last = act[kConvLayers - 1].data();

    // Logits, softmax, masked cross-entropy.
    std::array<double, kFcOut> probs;
    double loss = 0.0;
    int count = 0;
    for (int pos = 0; pos < kLen; ++pos)
        if (sample.labels[pos] != 0) ++count;
    for (int pos = 0; pos < kLen; ++pos) {
        std::array<double, kClasses> logit{};
        for (int c = 0; c < kClasses; ++c) {
            const int o = pos * kClasses + c;
            double acc = params_[bias_offsets_[kConvLayers] + o];
            const double* w = &params_[weight_offsets_[kConvLayers] + o * kFcIn];
            for (int i = 0; i < kFcIn; ++i) acc += w[i] * a_last[i];
            logit[c] = acc;
        }
        const double mx = std::max({logit[0], logit[1], logit[2]});
        double denom = 0.0;
        for (int c = 0; c < kClasses; ++c) denom += std::exp(logit[c] - mx);
        for (int c = 0; c < kClasses; ++c) probs[pos * kClasses + c] = std::exp(logit[c] - mx) / denom;
        if (sample.labels[pos] != 0)
            loss -= std::log(std::max(probs[pos * kClasses + sample.labels[pos]], 1e-300));
    }
    if (count == 0) return 0.0;
    loss /= count;

    // dL/dlogits.
    std::array<double, kFcOut> dlogit{};
    for (int pos = 0; pos < kLen; ++pos) {
        if (sample.labels[pos] == 0) continue;
        for (int c = 0; c < kClasses; ++c) {
            const int o = pos * kClasses + c;
            dlogit[o] = (probs[o] - (c == sample.labels[pos] ? 1.0 : 0.0)) / count;
        }
    }

    // FC gradients and upstream into the conv stack.
    std::array<double, 32 * kLen> dact{};
    for (int o = 0; o < kFcOut; ++o) {
        const double g = dlogit[o];
        if (g == 0.0) continue;
        grad[bias_offsets_[kConvLayers] + o] += g;
        double* gw = &grad[weight_offsets_[kConvLayers] + o * kFcIn];
        const double* w = &params_[weight_offsets_[kConvLayers] + o * kFcIn];
        for (int i = 0; i < kFcIn; ++i) {
            gw[i] += g * a_last[i];
            dact[i] += g * w[i];
        }
    }

    // Conv layers in reverse; dact holds dL/da for layer l's output.
    std::array<double, 32 * kLen> dprev;
    for (int l = kConvLayers - 1; l >= 0; --l) {
        const int c_in = kChannels[l];
        const int c_out = kChannels[l + 1];
        // Through ReLU.
        std::array<double, 32 * kLen> dz{};
        for (int i = 0; i < c_out * kLen; ++i) dz[i] = z[l][i] > 0.0 ? dact[i] : 0.0;

        const double* x = l == 0 ? a0.data() : act[l - 1].data();
        std::fill(dprev.begin(), dprev.begin() + c_in * kLen, 0.0);
        for (int co = 0; co < c_out; ++co) {
            const double* dzc = &dz[co * kLen];
            double gb = 0.0;
            for (int pos = 0; pos < kLen; ++pos) gb += dzc[pos];
            grad[bias_offsets_[l] + co] += gb;
            for (int ci = 0; ci < c_in; ++ci) {
                double* gw = &grad[weight_offsets_[l] + (co * c_in + ci) * kKernel];
                const double* w = &params_[weight_offsets_[l] + (co * c_in + ci) * kKernel];
                const double* xc = x + ci * kLen;
                double* dp = dprev.data() + ci * kLen;
                for (int pos = 0; pos < kLen; ++pos) {
                    const double g = dzc[pos];
                    if (g == 0.0) continue;
                    if (pos > 0) {
                        gw[0] += g * xc[pos - 1];
                        dp[pos - 1] += g * w[0];
                    }
                    gw[1] += g * xc[pos];
                    dp[pos] += g * w[1];
                    if (pos < kLen - 1) {
                        gw[2] += g * xc[pos + 1];
                        dp[pos + 1] += g * w[2];
                    }
                }
            }
        }
        std::copy(dprev.begin(), dprev.begin() + c_in * kLen, dact.begin());
    }
    return loss;
}

double batch_gradient(const Network& net, const std::vector<ConeSample>& samples,
                      const std::vector<int>& indices, std::vector<double>& grad, ExecMode mode) {
    const int b = static_cast<int>(indices.size());
    if (b == 0) throw std::invalid_argument("batch_gradient: empty batch");
    const std::size_t n_params = net.parameters().size();

    std::vector<std::vector<double>> sample_grads(b, std::vector<double>(n_params, 0.0));
    std::vector<double> sample_losses(b, 0.0);

    const bool parallel = mode == ExecMode::kParallel;
#pragma omp parallel for schedule(static) if (parallel)
    for (int s = 0; s < b; ++s)
        sample_losses[s] = net.backward(samples[indices[s]], sample_grads[s]);

    // Fixed-order reduction: identical bits regardless of thread count.
    grad.assign(n_params, 0.0);
    double loss = 0.0;
    for (int s = 0; s < b; ++s) {
        loss += sample_losses[s];
        const auto& g = sample_grads[s];
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += g[i];
    }
    const double inv = 1.0 / b;
    for (auto& g : grad) g *= inv;
    return loss * inv;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamConfig& config) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

TrainConfig TrainConfig::from_config(const Config& cfg) {
    TrainConfig t;
    t.lr = cfg.get_double("conenet.lr", t.lr);
    t.batch_size = cfg.get_int("conenet.batch_size", t.batch_size);
    t.epochs = cfg.get_int("conenet.epochs", t.epochs);
    t.n_train = cfg.get_int("conenet.n_train", t.n_train);
    t.n_val = cfg.get_int("conenet.n_val", t.n_val);
    t.n_test = cfg.get_int("conenet.n_test", t.n_test);
    t.seed = cfg.get_u64("conenet.seed", t.seed);
    t.mode = cfg.get_bool("conenet.parallel", true) ? ExecMode::kParallel : ExecMode::kSerial;
    if (t.lr <= 0.0 || t.batch_size < 1 || t.n_train < 1 || t.n_val < 1 || t.n_test < 1)
        throw ConfigError("conenet: invalid training configuration");
    return t;
}

void TrainConfig::to_config(Config& cfg) const {
    cfg.set("conenet.lr", lr);
    cfg.set("conenet.batch_size", batch_size);
    cfg.set("conenet.epochs", epochs);
    cfg.set("conenet.n_train", n_train);
    cfg.set("conenet.n_val", n_val);
    cfg.set("conenet.n_test", n_test);
    cfg.set("conenet.seed", seed);
    cfg.set("conenet.parallel", mode == ExecMode::kParallel);
}

double evaluate_accuracy(const Network& net, const std::vector<ConeSample>& samples,
                         std::size_t begin, std::size_t end, ExecMode mode) {
    long correct = 0, total = 0;
    const bool parallel = mode == ExecMode::kParallel;
    const long n = static_cast<long>(end - begin);
#pragma omp parallel for schedule(static) reduction(+ : correct, total) if (parallel)
    for (long k = 0; k < n; ++k) {
        const ConeSample& s = samples[begin + k];
        const auto predicted = net.classify(s.input);
        for (int pos = 0; pos < kMaxCones; ++pos) {
            if (s.labels[pos] == 0) continue;
            ++total;
            if (predicted[pos] == s.labels[pos]) ++correct;
        }
    }
    return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

namespace {

// Fisher-Yates with our own RNG so the permutation is stable across
// standard libraries.
void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_int(0, static_cast<int>(i) - 1)]);
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<ConeSample>& dataset) {
    const std::size_t needed =
        static_cast<std::size_t>(config.n_train) + config.n_val + config.n_test;
    if (dataset.size() < needed)
        throw std::runtime_error("train: dataset smaller than the configured split");

    Network net(derive_seed(config.seed, 0x6e657477ULL));
    AdamState adam(net.parameters().size());
    const AdamConfig adam_cfg{config.lr, config.beta1, config.beta2, config.epsilon};
    Rng shuffle_rng(derive_seed(config.seed, 0x73687566ULL));

    std::vector<int> train_idx(config.n_train);
    std::iota(train_idx.begin(), train_idx.end(), 0);

    TrainResult result;
    double best_val = -1.0;
    std::vector<double> grad(net.parameters().size());

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_indices(train_idx, shuffle_rng);
        double loss_sum = 0.0;
        int n_batches = 0;
        for (int start = 0; start + config.batch_size <= config.n_train;
             start += config.batch_size) {
            const std::vector<int> batch(train_idx.begin() + start,
                                         train_idx.begin() + start + config.batch_size);
            const double loss = batch_gradient(net, dataset, batch, grad, config.mode);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch));
            adam_step(net.parameters(), grad, adam, adam_cfg);
            loss_sum += loss;
            ++n_batches;
        }
        const double val_acc = evaluate_accuracy(net, dataset, config.n_train,
                                                 config.n_train + config.n_val, config.mode);
        result.history.push_back({epoch, loss_sum / n_batches, val_acc});
        if (val_acc > best_val) {
            best_val = val_acc;
            result.net = net;
            result.best_epoch = epoch;
        }
    }

    result.test_accuracy =
        evaluate_accuracy(result.net, dataset, config.n_train + config.n_val,
                          config.n_train + config.n_val + config.n_test, config.mode);
    return result;
}

std::vector<ConeSample> generate_dataset(const DatasetSpec& spec, std::uint64_t seed,
                                         ExecMode mode) {
    const int per_track = 200;
    const int n_tracks = (spec.n_samples + per_track - 1) / per_track;
    std::vector<std::vector<ConeSample>> per_track_samples(n_tracks);

    const bool parallel = mode == ExecMode::kParallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int ti = 0; ti < n_tracks; ++ti) {
        Rng rng(derive_seed(seed, 0xd5ULL + ti));
        track::TrackSpec ts;
        ts.n_segments = rng.uniform_int(6, 10);
        ts.min_radius = rng.uniform(8.0, 16.0);
        ts.width = 4.0;
        ts.spacing = 5.0;
        ts.scale = ts.min_radius * rng.uniform(2.2, 3.2);
        track::Track trk;
        try {
            trk = track::generate_loop(ts, derive_seed(seed, 0x7261ULL + ti));
        } catch (const track::GenerationError&) {
            ts.n_segments = 6;
            ts.min_radius = 12.0;
            ts.scale = 34.0;
            trk = track::generate_loop(ts, derive_seed(seed, 0x7262ULL + ti));
        }
        const double total = trk.total_length();
        const auto cones = trk.all_cones();

        auto& out = per_track_samples[ti];
        out.reserve(per_track);
        int guard = 0;
        while (static_cast<int>(out.size()) < per_track && guard < per_track * 50) {
            ++guard;
            const double s = rng.uniform(0.0, total);
            const double heading =
                trk.heading_at(s) + rng.uniform(-spec.heading_jitter, spec.heading_jitter);
            const Vec2 n = left_normal(heading_vec(trk.heading_at(s)));
            const Vec2 pos =
                trk.centerline_at(s) + n * rng.uniform(-spec.lateral_jitter, spec.lateral_jitter);

            std::vector<Vec2> visible;
            std::vector<track::ConeColor> colors;
            for (const auto& cone : cones) {
                const Vec2 body = world_to_body(cone.position, pos, heading);
                if (body.norm() > spec.visibility_range) continue;
                visible.push_back(body);
                colors.push_back(cone.color);
            }
            if (visible.size() < 3) continue;

            // Labels must follow the nearest-first encoding order.
            std::vector<int> order(visible.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double ra = visible[a].squared_norm(), rb = visible[b].squared_norm();
                if (ra != rb) return ra < rb;
                if (visible[a].x != visible[b].x) return visible[a].x < visible[b].x;
                return visible[a].y < visible[b].y;
            });

            ConeSample sample{};
            const std::size_t n_keep = std::min<std::size_t>(visible.size(), kMaxCones);
            for (std::size_t i = 0; i < n_keep; ++i) {
                sample.input[2 * i] = visible[order[i]].x;
                sample.input[2 * i + 1] = visible[order[i]].y;
                sample.labels[i] = static_cast<int>(colors[order[i]]);
            }
            out.push_back(sample);
        }
    }

    std::vector<ConeSample> dataset;
    dataset.reserve(spec.n_samples);
    for (const auto& chunk : per_track_samples)
        for (const auto& s : chunk) {
            if (static_cast<int>(dataset.size()) >= spec.n_samples) break;
            dataset.push_back(s);
        }
    if (static_cast<int>(dataset.size()) < spec.n_samples)
        throw std::runtime_error("generate_dataset: could not reach the requested sample count");

    // Class balance guard over non-pad labels.
    long red = 0, blue = 0;
    for (const auto& s : dataset)
        for (int l : s.labels) {
            if (l == 1) ++red;
            if (l == 2) ++blue;
        }
    const double frac_red = static_cast<double>(red) / std::max(1L, red + blue);
    if (frac_red < 0.4 || frac_red > 0.6)
        throw std::runtime_error("generate_dataset: class balance outside 40-60%");
    return dataset;
}

DatasetSpec DatasetSpec::from_config(const Config& cfg) {
    DatasetSpec d;
    d.n_samples = cfg.get_int("conenet.n_samples", d.n_samples);
    d.visibility_range = cfg.get_double("conenet.visibility_range", d.visibility_range);
    d.lateral_jitter = cfg.get_double("conenet.lateral_jitter", d.lateral_jitter);
    d.heading_jitter = cfg.get_double("conenet.heading_jitter", d.heading_jitter);
    return d;
}

void save_dataset_csv(const std::string& path, const std::vector<ConeSample>& data) {
    CsvWriter w(path);
    std::vector<std::string> header;
    for (int i = 0; i < kMaxCones; ++i) {
        header.push_back("x" + std::to_string(i + 1));
        header.push_back("y" + std::to_string(i + 1));
    }
    for (int i = 0; i < kMaxCones; ++i) header.push_back("label" + std::to_string(i + 1));
    w.header(header);
    for (const auto& s : data) {
        for (double v : s.input) w.field(v);
        for (int l : s.labels) w.field(l);
        w.end_row();
    }
}

std::vector<ConeSample> load_dataset_csv(const std::string& path) {
    std::vector<ConeSample> data;
    for (const auto& row : read_csv(path, true)) {
        if (row.size() != kInputDim + kMaxCones)
            throw std::runtime_error("dataset csv: wrong column count");
        ConeSample s{};
        for (int i = 0; i < kInputDim; ++i) s.input[i] = std::stod(row[i]);
        for (int i = 0; i < kMaxCones; ++i) s.labels[i] = std::stoi(row[kInputDim + i]);
        data.push_back(s);
    }
    return data;
}

namespace {
constexpr char kModelMagic[8] = {'F', 'S', 'D', 'C', 'N', 'N', '0', '1'};
}

void Network::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    const std::int32_t dims[] = {kConvLayers,   kKernel,       kChannels[0], kChannels[1],
                                 kChannels[2],  kChannels[3],  kChannels[4], kMaxCones,
                                 kClasses,      static_cast<std::int32_t>(params_.size())};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(params_.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to " + path);
}

Network Network::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a model file: " + path);
    std::int32_t dims[10];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    Network net(0);
    if (!in || dims[9] != static_cast<std::int32_t>(net.params_.size()))
        throw std::runtime_error("model file has incompatible dimensions: " + path);
    in.read(reinterpret_cast<char*>(net.params_.data()),
            static_cast<std::streamsize>(net.params_.size() * sizeof(double)));
    if (!in) throw std::runtime_error("model file truncated: " + path);
    return net;
}

}  // namespace fsd::conenet
