#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace heraldsim {

/// Neumaier compensated accumulator. Order-dependent but reproducible.
class CompensatedSum {
public:
    constexpr CompensatedSum() = default;
    constexpr explicit CompensatedSum(double init) : sum_(init) {}

    constexpr void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    constexpr CompensatedSum& operator+=(double x) {
        add(x);
        return *this;
    }

    constexpr double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

/// 64-bit FNV-1a; used for scenario digests so they are stable across platforms.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace heraldsim
