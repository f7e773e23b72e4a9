#pragma once

#include <cstdint>
#include <limits>

namespace tnq {

namespace detail {

// SplitMix64 finalizer (Stafford mix13). Bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Splittable counter-based generator: the word at counter i is a pure
/// function of (key, i), so streams never depend on evaluation order and
/// a stream can be reproduced from its key alone. Keys for related streams
/// are derived by absorbing labels (seed, client, round, ...) one at a time.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed) : key_(detail::mix64(seed + detail::kGolden)) {}

    /// Derive an independent child stream labelled by `label`.
    CounterRng split(std::uint64_t label) const {
        CounterRng child(0);
        child.key_ = detail::mix64(key_ + detail::kGolden * (label + 1));
        return child;
    }

    /// Stream for (seed, client, round) triples used by the simulator.
    static CounterRng for_round(std::uint64_t seed, std::uint64_t client, std::uint64_t round) {
        return CounterRng(seed).split(client).split(round);
    }

    std::uint64_t operator()() { return detail::mix64(key_ + detail::kGolden * ++counter_); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        // 128-bit multiply rejection-free shortcut; bias < 2^-64 is immaterial here.
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace tnq
