#include "hc3l/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hc3l {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngStream::next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * kGolden);
}

double RngStream::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] keeps the log finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double RngStream::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
}

long RngStream::next_int(long lo, long hi) {
    if (hi < lo) throw std::invalid_argument("next_int: hi < lo");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(next_u64() % span);
}

RngStream RngStream::substream(std::uint64_t tag) const {
    return RngStream(mix64(seed_ ^ mix64(tag + kGolden)));
}

Grid sample_gaussian(RngStream& rng, const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("sample_gaussian: shape must be nonempty");
    Grid g(shape);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.next_gaussian();
    return g;
}

}  // namespace hc3l
