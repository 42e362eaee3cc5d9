#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace hypersci {

// Seed derivation for independent streams (weights, covariates, noise, ...).
// Keeping each stage on its own derived stream means e.g. regenerating with a
// different hypergraph does not shift the noise draws of later stages.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Deterministic RNG. std::mt19937_64 output is fully specified by the
// standard; uniform/normal mappings are implemented here explicitly so values
// are bit-identical across platforms and library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (one spare cached).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [lo, hi], rejection sampled.
    int uniform_int(int lo, int hi);

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hypersci
