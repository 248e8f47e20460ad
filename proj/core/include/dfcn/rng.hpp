#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace dfcn {

// mt19937_64 is fully specified by the standard, so its raw output is the same
// everywhere. The std:: distributions are not, which is why the helpers below
// derive uniform, index and normal draws from the raw engine themselves.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

// Unbiased integer in [0, n). n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

// Standard normal via Box-Muller (one value per call, the pair partner is discarded).
double standard_normal(Rng& rng);

// Bernoulli(p) with p clamped to [0, 1]; p = 0 never fires, p = 1 always fires.
inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = uniform_index(rng, i);
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

// Seed fan-out: splitmix64 over (master, FNV-1a(tag)). Stable across platforms
// and independent of scheduling, so serial and parallel runs agree.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dfcn
