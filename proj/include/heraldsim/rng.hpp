#pragma once

#include <cstdint>
#include <string_view>

namespace heraldsim {

/// SplitMix64 (Steele, Lea, Flood 2014). One independent substream per pulse,
/// seeded from (seed, pulse index), so pulses can be generated in any order.
class SplitMix64 {
public:
    static constexpr std::string_view kName = "splitmix64-per-pulse";

    explicit constexpr SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static constexpr SplitMix64 for_pulse(std::uint64_t seed, std::uint64_t pulse) {
        return SplitMix64(mix(seed ^ mix(pulse + 0x9e3779b97f4a7c15ull)));
    }

    constexpr std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    /// Uniform in the open interval (0, 1).
    constexpr double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

}  // namespace heraldsim
