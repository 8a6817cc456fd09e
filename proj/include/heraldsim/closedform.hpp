#pragma once

// Generating-function closed forms for products of thermal modes.
// Deliberately self-contained: nothing here is shared with the pattern enumerator.

#include <cmath>
#include <span>

#include "heraldsim/detector.hpp"

namespace heraldsim::closedform {

/// (1 - d) * prod_k (1 - mu_k) / (1 - mu_k (1 - eta)), mu_k = tanh^2 q_k.
inline double noclick_closed(std::span<const double> q, double efficiency, double dark) {
    double p = 1.0 - dark;
    for (double x : q) {
        const double t = std::tanh(x);
        const double mu = t * t;
        p *= (1.0 - mu) / (1.0 - mu * (1.0 - efficiency));
    }
    return p;
}

inline double noclick_closed(std::span<const double> q, const DetectorModel& det) {
    return noclick_closed(q, det.efficiency, det.dark);
}

struct Moments {
    double mean = 0.0;
    double second_factorial = 0.0;  // <n (n - 1)>

    double g2() const { return second_factorial / (mean * mean); }
};

/// Total-photon moments of independent thermal modes.
inline Moments unconditional_moments(std::span<const double> q) {
    double sum_m = 0.0;
    double sum_m2 = 0.0;
    for (double x : q) {
        const double t = std::tanh(x);
        const double mu = t * t;
        const double m = mu / (1.0 - mu);
        sum_m += m;
        sum_m2 += m * m;
    }
    // sum_k 2 m_k^2 + sum_{j != k} m_j m_k = (sum m)^2 + sum m^2
    return {sum_m, sum_m * sum_m + sum_m2};
}

}  // namespace heraldsim::closedform
