#pragma once

#include <cstdint>
#include <vector>

#include "hc3l/grid.hpp"

namespace hc3l {

// Counter-based deterministic random stream: output i is a fixed mix of
// (seed, i), so identical seed + identical call sequence reproduces the
// identical bit pattern. Single-owner, not shared across threads; parallel
// work derives independent substreams instead.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit();

    // Standard normal via Box-Muller; a generated pair is consumed across
    // consecutive calls.
    double next_gaussian();

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi);

    // Uniform integer in [lo, hi] inclusive.
    long next_int(long lo, long hi);

    // Independent stream derived from (seed, tag); does not advance this one.
    RngStream substream(std::uint64_t tag) const;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Grid of i.i.d. standard normal samples. Throws std::invalid_argument on an
// empty shape or zero dimensions.
Grid sample_gaussian(RngStream& rng, const std::vector<std::size_t>& shape);

// Deterministic Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_int(0, static_cast<long>(i) - 1));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace hc3l
