#pragma once

// Schmidt coefficients -> bank of two-mode squeezers -> photon-number
// occupation patterns with thermal product weights.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "heraldsim/errors.hpp"
#include "heraldsim/numeric.hpp"
#include "heraldsim/spectra.hpp"

namespace heraldsim {

inline constexpr unsigned kDefaultMaxPhotons = 6;
inline constexpr std::size_t kDefaultMaxModes = 20;
inline constexpr std::size_t kMaxBankModes = 64;

/// Squeezing parameters q_k = B * lambda_k for both filter families.
struct SqueezerBank {
    std::vector<double> transmitted;
    std::vector<double> reflected;
    double pump_factor = 0.0;

    std::size_t mode_count() const { return transmitted.size() + reflected.size(); }

    void validate() const {
        auto check = [](const std::vector<double>& q, const char* key) {
            for (std::size_t k = 0; k < q.size(); ++k) {
                if (!(q[k] >= 0.0) || !std::isfinite(q[k])) throw ConfigError("squeezing must be finite and >= 0", key);
                if (k > 0 && q[k] > q[k - 1]) throw ConfigError("squeezing list must be nonincreasing", key);
            }
        };
        check(transmitted, "bank.transmitted");
        check(reflected, "bank.reflected");
    }
};

struct OccupationPattern {
    std::vector<unsigned> transmitted;
    std::vector<unsigned> reflected;
    unsigned transmitted_total = 0;
    unsigned reflected_total = 0;

    unsigned total() const { return transmitted_total + reflected_total; }
};

struct WeightedPattern {
    OccupationPattern pattern;
    double weight = 0.0;
};

inline SqueezerBank squeezer_bank(const FilteredSchmidt& fs, double pump_factor) {
    if (!(pump_factor >= 0.0) || !std::isfinite(pump_factor)) throw ConfigError("pump factor must be >= 0", "bank.B");
    SqueezerBank bank;
    bank.pump_factor = pump_factor;
    bank.transmitted.reserve(fs.transmitted.size());
    bank.reflected.reserve(fs.reflected.size());
    for (double l : fs.transmitted) bank.transmitted.push_back(pump_factor * l);
    for (double l : fs.reflected) bank.reflected.push_back(pump_factor * l);
    return bank;
}

/// Unfiltered source: every Schmidt mode reaches the herald detector.
inline SqueezerBank squeezer_bank(const SchmidtSpectrum& spectrum, double pump_factor) {
    return squeezer_bank(FilteredSchmidt{spectrum.coefficients, {}, spectrum.discarded_weight}, pump_factor);
}

/// Sum over both families of sinh^2(q_k).
inline double mean_pair_number(const SqueezerBank& bank) {
    CompensatedSum s;
    for (double q : bank.transmitted) s.add(std::pow(std::sinh(q), 2));
    for (double q : bank.reflected) s.add(std::pow(std::sinh(q), 2));
    return s.value();
}

/// Pump factor B with mean_pair_number(squeezer_bank(fs, B)) == target_n.
inline double calibrate_pump_factor(const FilteredSchmidt& fs, double target_n) {
    if (!std::isfinite(target_n)) throw ConfigError("target mean pair number must be finite", "sweep.n_bar");
    if (!(target_n > 0.0)) throw ConfigError("target mean pair number must be positive", "sweep.n_bar");
    const bool any = std::any_of(fs.transmitted.begin(), fs.transmitted.end(), [](double l) { return l > 0.0; }) ||
                     std::any_of(fs.reflected.begin(), fs.reflected.end(), [](double l) { return l > 0.0; });
    if (!any) throw ConfigError("cannot calibrate a bank without nonzero coefficients", "bank");

    auto mean_at = [&](double b) { return mean_pair_number(squeezer_bank(fs, b)); };
    double lo = 0.0;
    double hi = 1.0;
    while (mean_at(hi) < target_n) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw ConfigError("target mean pair number is out of reach", "sweep.n_bar");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_at(mid) < target_n) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline double calibrate_pump_factor(const SchmidtSpectrum& spectrum, double target_n) {
    return calibrate_pump_factor(FilteredSchmidt{spectrum.coefficients, {}, 0.0}, target_n);
}

/// Chernoff bound on P(total photons > n_max) for independent thermal modes:
/// min over x in [1, 1/mu_max) of prod_k (1 - mu_k) / (1 - mu_k x) / x^(n_max + 1).
inline double thermal_tail_bound(std::span<const double> squeezing, unsigned n_max) {
    double mu_max = 0.0;
    for (double q : squeezing) mu_max = std::max(mu_max, std::pow(std::tanh(q), 2));
    if (mu_max <= 0.0) return 0.0;
    auto log_bound = [&](double x) {
        double acc = -static_cast<double>(n_max + 1) * std::log(x);
        for (double q : squeezing) {
            const double mu = std::pow(std::tanh(q), 2);
            acc += std::log1p(-mu) - std::log1p(-mu * x);
        }
        return acc;
    };
    // The log bound is convex in log x; golden-section search over log x.
    double a = 0.0;
    double b = std::log(1.0 / mu_max) - 1e-12;
    if (!(b > a)) return 1.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = log_bound(std::exp(c));
    double fd = log_bound(std::exp(d));
    for (int it = 0; it < 200; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = log_bound(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = log_bound(std::exp(d));
        }
    }
    const double best = std::min({fc, fd, log_bound(1.0)});
    return std::min(1.0, std::exp(best));
}

inline double thermal_tail_bound(const SqueezerBank& bank, unsigned n_max) {
    std::vector<double> all = bank.transmitted;
    all.insert(all.end(), bank.reflected.begin(), bank.reflected.end());
    return thermal_tail_bound(all, n_max);
}

struct EnumerationSummary {
    std::size_t pattern_count = 0;
    double total_weight = 0.0;
    /// Upper bound on the weight of patterns with more than n_max photons.
    double tail_bound = 0.0;
};

namespace detail {

template <class Visitor>
struct PatternWalker {
    const std::vector<double>& mu;       // tanh^2(q_k), transmitted modes first
    std::size_t transmitted_modes;
    WeightedPattern current;
    Visitor& visit;
    std::size_t count = 0;
    CompensatedSum total;

    void set_count(std::size_t mode, unsigned n) {
        if (mode < transmitted_modes) {
            current.pattern.transmitted[mode] = n;
        } else {
            current.pattern.reflected[mode - transmitted_modes] = n;
        }
    }

    void walk(std::size_t mode, unsigned budget, double weight, unsigned t_total, unsigned r_total) {
        if (mode == mu.size()) {
            current.weight = weight;
            current.pattern.transmitted_total = t_total;
            current.pattern.reflected_total = r_total;
            ++count;
            total.add(weight);
            visit(static_cast<const WeightedPattern&>(current));
            return;
        }
        const bool is_t = mode < transmitted_modes;
        double w = weight;
        for (unsigned n = 0; n <= budget; ++n) {
            set_count(mode, n);
            walk(mode + 1, budget - n, w, t_total + (is_t ? n : 0u), r_total + (is_t ? 0u : n));
            w *= mu[mode];
            if (w == 0.0) break;  // remaining counts of this mode carry no weight
        }
        set_count(mode, 0);
    }
};

}  // namespace detail

/// Visits every occupation pattern of nonzero weight with total photon number
/// <= n_max exactly once, in lexicographic order of (transmitted..., reflected...) counts,
/// passing a WeightedPattern whose weight is prod_k sech^2(q_k) tanh^{2 n_k}(q_k).
template <class Visitor>
EnumerationSummary for_each_pattern(const SqueezerBank& bank, unsigned n_max, Visitor&& visit) {
    if (bank.mode_count() > kMaxBankModes) throw ConfigError("bank has more than 64 modes", "truncation.max_modes");
    bank.validate();
    std::vector<double> mu;
    mu.reserve(bank.mode_count());
    double vacuum = 1.0;
    for (double q : bank.transmitted) {
        mu.push_back(std::pow(std::tanh(q), 2));
        vacuum /= std::pow(std::cosh(q), 2);
    }
    for (double q : bank.reflected) {
        mu.push_back(std::pow(std::tanh(q), 2));
        vacuum /= std::pow(std::cosh(q), 2);
    }
    using V = std::remove_reference_t<Visitor>;
    detail::PatternWalker<V> walker{mu, bank.transmitted.size(), {}, visit, 0, CompensatedSum{}};
    walker.current.pattern.transmitted.assign(bank.transmitted.size(), 0u);
    walker.current.pattern.reflected.assign(bank.reflected.size(), 0u);
    walker.walk(0, n_max, vacuum, 0u, 0u);

    EnumerationSummary summary;
    summary.pattern_count = walker.count;
    summary.total_weight = walker.total.value();
    summary.tail_bound = thermal_tail_bound(bank, n_max);
    return summary;
}

/// Materialized enumeration; intended for small banks.
inline std::vector<WeightedPattern> enumerate_patterns(const SqueezerBank& bank, unsigned n_max,
                                                       EnumerationSummary* summary = nullptr) {
    std::vector<WeightedPattern> out;
    auto s = for_each_pattern(bank, n_max, [&](const WeightedPattern& p) { out.push_back(p); });
    if (summary != nullptr) *summary = s;
    return out;
}

/// P(n) for n = 0..n_max of a family's total photon number, from pattern enumeration.
struct PhotonNumberDistribution {
    std::vector<double> probability;
    double tail_bound = 0.0;

    double captured() const { return compensated_total(probability); }
};

inline PhotonNumberDistribution family_distribution(std::span<const double> squeezing, unsigned n_max) {
    SqueezerBank family;
    family.transmitted.assign(squeezing.begin(), squeezing.end());
    std::vector<CompensatedSum> bins(n_max + 1);
    auto summary = for_each_pattern(family, n_max, [&](const WeightedPattern& p) {
        bins[p.pattern.transmitted_total].add(p.weight);
    });
    PhotonNumberDistribution d;
    d.probability.resize(n_max + 1);
    for (unsigned n = 0; n <= n_max; ++n) d.probability[n] = bins[n].value();
    d.tail_bound = summary.tail_bound;
    return d;
}

/// Joint table P(n_t, n_r) from a single enumeration over the combined bank
/// (total photons <= n_max). Row-major, (n_max+1)^2 entries.
struct JointPhotonTable {
    unsigned n_max = 0;
    std::vector<double> probability;
    double tail_bound = 0.0;

    double at(unsigned nt, unsigned nr) const { return probability[nt * (n_max + 1) + nr]; }
};

inline JointPhotonTable joint_distribution(const SqueezerBank& bank, unsigned n_max) {
    std::vector<CompensatedSum> bins((n_max + 1) * (n_max + 1));
    auto summary = for_each_pattern(bank, n_max, [&](const WeightedPattern& p) {
        bins[p.pattern.transmitted_total * (n_max + 1) + p.pattern.reflected_total].add(p.weight);
    });
    JointPhotonTable t;
    t.n_max = n_max;
    t.probability.resize(bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) t.probability[i] = bins[i].value();
    t.tail_bound = summary.tail_bound;
    return t;
}

}  // namespace heraldsim
