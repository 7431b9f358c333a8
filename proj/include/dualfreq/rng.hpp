#pragma once

#include <cstdint>
#include <vector>

namespace dualfreq {

/// Deterministic, platform-independent random number generator.
///
/// Algorithm: SplitMix64 (Steele, Lea & Flood 2014). The 64-bit state
/// advances by the golden-ratio increment 0x9e3779b97f4a7c15 and each output
/// is the finalizer mix of the new state. Every draw on every platform is a
/// pure function of the seed, so seeds are portable across builds and
/// languages.
///
/// Split rule: `split(tag)` returns an independent child stream seeded with
/// mix(state ^ (golden * (tag + 1))). It does not advance the parent, so the
/// same (parent state, tag) pair always yields the same child. Purpose
/// streams (init, shuffle, dropout, augment, synth) are split off one root
/// generator; drawing from one stream never perturbs another.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    /// Independent child stream; pure in (current state, tag).
    Rng split(std::uint64_t tag) const {
        return Rng(mix(state_ ^ (kGolden * (tag + 1))));
    }

    /// Uniform double in [0, 1): top 53 bits scaled by 2^-53.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform float in [0, 1): top 24 bits scaled by 2^-24.
    float next_float() {
        return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
    }

    /// Unbiased uniform integer in [0, n) by rejection sampling.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t threshold = (~n + 1) % n; // (2^64 - n) mod n
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    bool bernoulli(double p) { return next_double() < p; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

/// Purpose tags for the streams split off a run's root generator.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kDropout = 3;
inline constexpr std::uint64_t kAugment = 4;
inline constexpr std::uint64_t kSynth = 5;
} // namespace stream

/// Seeded Fisher-Yates shuffle, high index down, swap with bounded(i+1).
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace dualfreq
