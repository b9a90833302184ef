#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace gazealign {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for iteration `index` of a stream rooted at `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix_seed(mix_seed(master) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// Seed for a named sub-stream, e.g. derive_seed(seed, "analyze/global/textual").
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

/// Uniform integer in [0, bound) by rejection; portable across standard libraries.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Fisher-Yates shuffle using uniform_below, so results do not depend on the
/// standard library's distribution implementations.
template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

/// Standard normal draw (Box-Muller), portable across standard libraries.
double standard_normal(Rng& rng);

/// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Rng& rng);

}  // namespace gazealign
