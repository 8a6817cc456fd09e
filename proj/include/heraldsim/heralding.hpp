#pragma once

// Detector models applied to the two filter families, and the heralded-source metrics.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heraldsim/detector.hpp"
#include "heraldsim/errors.hpp"
#include "heraldsim/numeric.hpp"
#include "heraldsim/pdcstate.hpp"

namespace heraldsim {

inline constexpr double kTruncationWarning = 1e-3;

/// 1 - (1 - d)(1 - eta)^n
inline double click_coefficient(unsigned n, const DetectorModel& det) {
    return 1.0 - (1.0 - det.dark) * std::pow(1.0 - det.efficiency, static_cast<double>(n));
}

/// (1 - d)(1 - eta)^n
inline double noclick_coefficient(unsigned n, const DetectorModel& det) {
    return (1.0 - det.dark) * std::pow(1.0 - det.efficiency, static_cast<double>(n));
}

/// A probability computed from a truncated photon-number sum.
struct TruncatedProbability {
    double value = 0.0;
    double tail_bound = 0.0;
    bool truncation_warning = false;
};

/// Photon-number statistics of both families conditioned on the heralding event
/// click(T) and no-click(R). Families are independent, so the joint table is the
/// tensor product of the per-family distributions, each truncated at n_max.
class HeraldedState {
public:
    HeraldedState(const SqueezerBank& bank, const DetectorModel& det_t, const DetectorModel& det_r, unsigned n_max)
        : bank_(bank), det_t_(det_t), det_r_(det_r), n_max_(n_max) {
        det_t.validate("detector.T");
        det_r.validate("detector.R");
        pt_ = family_distribution(bank.transmitted, n_max);
        pr_ = family_distribution(bank.reflected, n_max);

        // Both are click probabilities summed over the retained photon numbers;
        // p_ext is their complement, so a blind detector gives exactly 1.
        CompensatedSum herald;
        CompensatedSum ext_click;
        for (unsigned n = 0; n <= n_max; ++n) {
            herald.add(pt_.probability[n] * click_coefficient(n, det_t));
            ext_click.add(pr_.probability[n] * click_coefficient(n, det_r));
        }
        p_herald_ = {herald.value(), pt_.tail_bound, pt_.tail_bound > kTruncationWarning};
        p_ext_ = {1.0 - ext_click.value(), pr_.tail_bound, pr_.tail_bound > kTruncationWarning};
    }

    unsigned n_max() const { return n_max_; }
    const SqueezerBank& bank() const { return bank_; }
    const PhotonNumberDistribution& transmitted_distribution() const { return pt_; }
    const PhotonNumberDistribution& reflected_distribution() const { return pr_; }

    const TruncatedProbability& p_herald() const { return p_herald_; }
    const TruncatedProbability& p_ext() const { return p_ext_; }

    /// Probability of the joint heralding event.
    double event_probability() const { return p_herald_.value * p_ext_.value; }

    /// Unnormalized weight of (n_t, n_r) jointly with the heralding event.
    double heralded_weight(unsigned nt, unsigned nr) const {
        return pt_.probability[nt] * click_coefficient(nt, det_t_) * pr_.probability[nr] * noclick_coefficient(nr, det_r_);
    }

    /// Unnormalized weight of (n_t, n_r) jointly with the complement of the heralding event.
    double unheralded_weight(unsigned nt, unsigned nr) const {
        return pt_.probability[nt] * pr_.probability[nr] - heralded_weight(nt, nr);
    }

    /// Overlap with one photon in the leading transmitted mode and vacuum elsewhere.
    double fidelity() const {
        require_herald();
        if (bank_.transmitted.empty()) return 0.0;
        double vacuum = 1.0;
        for (double q : bank_.transmitted) vacuum /= std::pow(std::cosh(q), 2);
        for (double q : bank_.reflected) vacuum /= std::pow(std::cosh(q), 2);
        const double t0 = std::tanh(bank_.transmitted.front());
        return vacuum * click_coefficient(1, det_t_) * noclick_coefficient(0, det_r_) * t0 * t0 / event_probability();
    }

    /// <N(N-1)>/<N>^2 of the idler total N = n_t + n_r given the heralding event.
    double g2() const {
        require_herald();
        CompensatedSum w;
        CompensatedSum m1;
        CompensatedSum m2;
        for (unsigned nt = 0; nt <= n_max_; ++nt) {
            for (unsigned nr = 0; nr <= n_max_; ++nr) {
                const double x = heralded_weight(nt, nr);
                const double n = nt + nr;
                w.add(x);
                m1.add(x * n);
                m2.add(x * n * (n - 1.0));
            }
        }
        const double mean = m1.value() / w.value();
        if (!(mean > 0.0)) throw UndefinedMetricError("heralded mean photon number is zero");
        return (m2.value() / w.value()) / (mean * mean);
    }

    /// Click probability of the heralded-arm detector on pulses without a heralding event.
    /// `gate_transmission` scales the arm efficiency on those pulses (1 without feed-forward).
    double unheralded_click_probability(const DetectorModel& heralded, double gate_transmission) const {
        heralded.validate("detector.heralded");
        const DetectorModel gated{heralded.efficiency * gate_transmission, heralded.dark};
        CompensatedSum w;
        CompensatedSum click;
        for (unsigned nt = 0; nt <= n_max_; ++nt) {
            for (unsigned nr = 0; nr <= n_max_; ++nr) {
                const double x = unheralded_weight(nt, nr);
                w.add(x);
                click.add(x * click_coefficient(nt + nr, gated));
            }
        }
        if (!(w.value() > 0.0)) throw UndefinedMetricError("no-herald outcome has zero probability");
        return click.value() / w.value();
    }

private:
    void require_herald() const {
        if (!(event_probability() > 0.0)) throw UndefinedMetricError("heralding probability is zero");
    }

    SqueezerBank bank_;
    DetectorModel det_t_;
    DetectorModel det_r_;
    unsigned n_max_;
    PhotonNumberDistribution pt_;
    PhotonNumberDistribution pr_;
    TruncatedProbability p_herald_;
    TruncatedProbability p_ext_;
};

/// Transmitted-family click probability; reflected modes sum out.
inline TruncatedProbability p_herald(const SqueezerBank& bank, const DetectorModel& det_t, unsigned n_max) {
    return HeraldedState(bank, det_t, DetectorModel::blind(), n_max).p_herald();
}

/// Reflected-family no-click probability.
inline TruncatedProbability p_ext(const SqueezerBank& bank, const DetectorModel& det_r, unsigned n_max) {
    return HeraldedState(bank, DetectorModel::blind(), det_r, n_max).p_ext();
}

inline double heralded_fidelity(const SqueezerBank& bank, const DetectorModel& det_t, const DetectorModel& det_r,
                                unsigned n_max) {
    return HeraldedState(bank, det_t, det_r, n_max).fidelity();
}

inline double g2_heralded(const SqueezerBank& bank, const DetectorModel& det_t, const DetectorModel& det_r,
                          unsigned n_max) {
    return HeraldedState(bank, det_t, det_r, n_max).g2();
}

/// sum q^4 / (sum q^2)^2 over the given family.
inline double spectral_purity(std::span<const double> transmitted) {
    CompensatedSum s2;
    CompensatedSum s4;
    for (double q : transmitted) {
        const double q2 = q * q;
        s2.add(q2);
        s4.add(q2 * q2);
    }
    if (!(s2.value() > 0.0)) throw UndefinedMetricError("purity of an all-zero family");
    return s4.value() / (s2.value() * s2.value());
}

inline double spectral_purity(const SqueezerBank& bank) { return spectral_purity(bank.transmitted); }
inline double spectral_purity(const FilteredSchmidt& fs) { return spectral_purity(fs.transmitted); }

/// Total-photon g2 of the idler without any conditioning.
inline double unheralded_g2(const SqueezerBank& bank, unsigned n_max) {
    const auto pt = family_distribution(bank.transmitted, n_max);
    const auto pr = family_distribution(bank.reflected, n_max);
    CompensatedSum w;
    CompensatedSum m1;
    CompensatedSum m2;
    for (unsigned nt = 0; nt <= n_max; ++nt) {
        for (unsigned nr = 0; nr <= n_max; ++nr) {
            const double x = pt.probability[nt] * pr.probability[nr];
            const double n = nt + nr;
            w.add(x);
            m1.add(x * n);
            m2.add(x * n * (n - 1.0));
        }
    }
    const double mean = m1.value() / w.value();
    if (!(mean > 0.0)) throw UndefinedMetricError("mean photon number is zero");
    return (m2.value() / w.value()) / (mean * mean);
}

inline double fidelity_approx(double purity, double g2) { return std::sqrt(purity) * (1.0 - 0.5 * g2); }

/// 1 - P_click / klyshko, with P_click the heralded-arm click probability on pulses
/// without a heralding event.
inline double p_noclick_from_click(double p_click, double klyshko) {
    if (!(klyshko > 0.0 && klyshko <= 1.0)) throw ConfigError("Klyshko efficiency must lie in (0,1]", "losses.klyshko");
    if (p_click > klyshko) throw UndefinedMetricError("inconsistent efficiency: no-herald click probability exceeds Klyshko efficiency");
    return 1.0 - p_click / klyshko;
}

inline double p_noclick_given_no_herald(const HeraldedState& state, const DetectorModel& heralded, double klyshko,
                                        double gate_transmission = 1.0) {
    return p_noclick_from_click(state.unheralded_click_probability(heralded, gate_transmission), klyshko);
}

inline double p_noclick_given_no_herald(const SqueezerBank& bank, const DetectorModel& det_t,
                                        const DetectorModel& det_r, const DetectorModel& heralded, double klyshko,
                                        unsigned n_max, double gate_transmission = 1.0) {
    return p_noclick_given_no_herald(HeraldedState(bank, det_t, det_r, n_max), heralded, klyshko, gate_transmission);
}

inline double source_fitness(double p_herald, double fidelity, double p_noclick) {
    return p_herald * fidelity + (1.0 - p_herald) * p_noclick;
}

enum class Scheme { unfiltered, standard, extended, extended_ffwd };

inline constexpr Scheme kAllSchemes[] = {Scheme::unfiltered, Scheme::standard, Scheme::extended, Scheme::extended_ffwd};

inline std::string_view scheme_name(Scheme s) {
    switch (s) {
        case Scheme::unfiltered: return "unfiltered";
        case Scheme::standard: return "standard";
        case Scheme::extended: return "extended";
        case Scheme::extended_ffwd: return "extended+ffwd";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view name, const std::string& key = "scheme") {
    for (Scheme s : kAllSchemes) {
        if (scheme_name(s) == name) return s;
    }
    throw ConfigError("unknown scheme '" + std::string(name) + "'", key);
}

inline bool uses_reflected_detector(Scheme s) { return s == Scheme::extended || s == Scheme::extended_ffwd; }

/// Detector and loss settings shared by every scheme of a sweep.
struct LossModel {
    DetectorModel herald_t{0.3, 0.0};
    DetectorModel herald_r{0.3, 0.0};
    DetectorModel heralded{0.3, 0.0};
    double klyshko = 0.3;
    double extinction_db = 20.0;

    static LossModel experimental() { return {}; }
    static LossModel lossless() { return {{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, 1.0, 20.0}; }

    double gate_leak() const { return std::pow(10.0, -extinction_db / 10.0); }

    void validate() const {
        herald_t.validate("detector.T");
        herald_r.validate("detector.R");
        heralded.validate("detector.heralded");
        if (!(klyshko > 0.0 && klyshko <= 1.0)) throw ConfigError("Klyshko efficiency must lie in (0,1]", "losses.klyshko");
        if (!(extinction_db >= 0.0)) throw ConfigError("extinction must be >= 0 dB", "switch.extinction_db");
    }
};

/// All metrics of one (scheme, B) point. Undefined entries are NaN.
struct HeraldMetrics {
    double B = 0.0;
    double n_bar = 0.0;
    double p_herald = 0.0;
    double p_ext = 1.0;
    double fidelity = 0.0;
    double purity = 0.0;
    double g2 = 0.0;
    double fidelity_approx = 0.0;
    double p_noclick = 0.0;
    double fitness = 0.0;
    std::size_t mode_count = 0;
    unsigned n_max = 0;
    Scheme scheme = Scheme::standard;
    double tail_bound = 0.0;
    bool truncation_warning = false;

    /// Probability that a pulse raises the scheme's heralding signal.
    double heralding_probability() const { return p_herald * p_ext; }
};

namespace detail {
template <class F>
double or_nan(F&& f) {
    try {
        return f();
    } catch (const UndefinedMetricError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}
}  // namespace detail

/// `bank` is the unfiltered bank for Scheme::unfiltered and the filtered bank otherwise.
inline HeraldMetrics evaluate_metrics(const SqueezerBank& bank, Scheme scheme, const LossModel& losses,
                                      unsigned n_max) {
    losses.validate();
    const DetectorModel det_r = uses_reflected_detector(scheme) ? losses.herald_r : DetectorModel::blind();
    const HeraldedState state(bank, losses.herald_t, det_r, n_max);

    HeraldMetrics m;
    m.B = bank.pump_factor;
    m.n_bar = mean_pair_number(bank);
    m.p_herald = state.p_herald().value;
    m.p_ext = state.p_ext().value;
    m.fidelity = detail::or_nan([&] { return state.fidelity(); });
    m.purity = detail::or_nan([&] { return spectral_purity(bank); });
    m.g2 = detail::or_nan([&] { return state.g2(); });
    m.fidelity_approx = fidelity_approx(m.purity, m.g2);
    const double gate = scheme == Scheme::extended_ffwd ? losses.gate_leak() : 1.0;
    m.p_noclick = detail::or_nan([&] { return p_noclick_given_no_herald(state, losses.heralded, losses.klyshko, gate); });
    m.fitness = source_fitness(m.heralding_probability(), m.fidelity, m.p_noclick);
    m.mode_count = bank.mode_count();
    m.n_max = n_max;
    m.scheme = scheme;
    m.tail_bound = state.p_herald().tail_bound + state.p_ext().tail_bound;
    m.truncation_warning = state.p_herald().truncation_warning || state.p_ext().truncation_warning;
    return m;
}

}  // namespace heraldsim
