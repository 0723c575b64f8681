#pragma once

#include <cstdint>
#include <string_view>

namespace d3g {

// splitmix64 finalizer. Stateless: the caller supplies the counter.
constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Keyed counter-based generator. Every draw is a pure function of
// (seed, key, counter), so results are identical across platforms, runs and
// thread schedules; no OS entropy is consumed anywhere in the engine.
class CounterRng {
public:
    CounterRng(uint64_t seed, std::string_view key)
        : base_(splitmix64(seed ^ fnv1a64(key))) {}

    explicit CounterRng(uint64_t seed) : base_(splitmix64(seed)) {}

    uint64_t bits(uint64_t counter) const { return splitmix64(base_ + counter); }

    // Uniform double in [0, 1).
    double uniform(uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // Gaussian-like deviate (mean 0, unit variance) via the sum of twelve
    // uniforms. Pure additions keep it bit-reproducible across libms.
    double gaussian_like(uint64_t counter) const {
        double sum = 0.0;
        const uint64_t start = counter * 12;
        for (uint64_t j = 0; j < 12; ++j) {
            sum += uniform(start + j);
        }
        return sum - 6.0;
    }

private:
    uint64_t base_;
};

}  // namespace d3g
