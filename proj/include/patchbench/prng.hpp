#pragma once

// Portable seeded permutation used by every split and sampling operation.
//
// Generator: PCG32 (PCG-XSH-RR, 64-bit state, 32-bit output) as published by
// M. O'Neill, seeded through pcg32_srandom_r(initstate, initseq). The
// initstate is the user seed; initseq selects an independent stream per
// operation so that e.g. the split and the 1% sample drawn with the same seed
// are not the same permutation.
//
// Shuffle: Fisher-Yates from the last index down to 1, each draw taken with
// pcg32_boundedrand_r (rejection below 2^32 mod bound), so results are
// bit-identical on every platform and standard library.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace patchbench {

class Pcg32 {
  public:
    Pcg32(std::uint64_t init_state, std::uint64_t init_seq) noexcept {
        inc_ = (init_seq << 1u) | 1u;
        state_ = 0;
        next();
        state_ += init_state;
        next();
    }

    std::uint32_t next() noexcept {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((0u - rot) & 31u));
    }

    /// Uniform in [0, bound). bound must be > 0.
    std::uint32_t bounded(std::uint32_t bound) noexcept {
        const std::uint32_t threshold = (0u - bound) % bound;
        for (;;) {
            const std::uint32_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

  private:
    std::uint64_t state_{};
    std::uint64_t inc_{};
};

/// Stream selectors, one per operation.
enum class RngStream : std::uint64_t {
    split = 0x73706c6974ULL,        // "split"
    fraction = 0x6672616374ULL,     // "fract"
    shots = 0x73686f7473ULL,        // "shots"
    test_reserve = 0x7465737472ULL, // "testr"
};

template <typename T>
void seeded_shuffle(std::span<T> items, std::uint64_t seed, RngStream stream) {
    if (items.size() < 2) return;
    Pcg32 rng(seed, static_cast<std::uint64_t>(stream));
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        const std::size_t j = rng.bounded(static_cast<std::uint32_t>(i + 1));
        using std::swap;
        swap(items[i], items[j]);
    }
}

template <typename T>
std::vector<T> seeded_permutation(std::vector<T> items, std::uint64_t seed, RngStream stream) {
    seeded_shuffle(std::span<T>(items), seed, stream);
    return items;
}

} // namespace patchbench
