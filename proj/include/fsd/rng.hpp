#pragma once

#include <cstdint>
#include <random>

namespace fsd {

// splitmix64; used to derive independent stream seeds from a master seed
// so that adding a consumer never perturbs the draws of another.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double gaussian(double mean, double sigma) {
        if (sigma <= 0.0) return mean;
        return std::normal_distribution<double>(mean, sigma)(engine_);
    }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }
    double beta(double a, double b) {
        std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
        const double x = ga(engine_), y = gb(engine_);
        return x / (x + y);
    }
    bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace fsd
