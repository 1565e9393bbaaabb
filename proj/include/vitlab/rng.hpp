#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace vitlab {

// Deterministic, implementation-independent RNG. Every random draw in the
// library flows through this so that results are reproducible across
// standard libraries and platforms (std:: distributions are not portable).
struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). Modulo bias is < bound/2^64.
    uint64_t uniform_int(uint64_t bound) { return next() % bound; }

    // Standard normal via Box-Muller (spare value cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // N(0, sigma^2) truncated to [-2 sigma, 2 sigma], by rejection.
    double truncated_normal(double sigma) {
        for (;;) {
            const double g = gaussian();
            if (g >= -2.0 && g <= 2.0) return g * sigma;
        }
    }

    // Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stateless mixing of a seed and a stream id into a fresh seed; used to
// derive independent per-run / per-sample streams from one master seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    SplitMix64 s(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    s.next();
    return s.next();
}

}  // namespace vitlab
