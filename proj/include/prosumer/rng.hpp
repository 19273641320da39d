#pragma once

#include <cstdint>
#include <random>

namespace prosumer {

// Seeded RNG wrapper. std::mt19937_64 output is fully specified by the
// standard, and the derived draws below avoid the implementation-defined
// std::uniform_*_distribution, so identical seeds give identical streams
// on every platform. Reproducible seeds are part of the artifact contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform integer in [0, n). Multiply-high mapping; the tiny modulo
    // bias (n / 2^64) is irrelevant at the n used here.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    template <typename T>
    void shuffle(T* data, std::size_t n) {
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(data[i - 1], data[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace prosumer
