#pragma once

// Estimators computed from time-tagged event streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "heraldsim/errors.hpp"
#include "heraldsim/eventsim.hpp"

namespace heraldsim {

struct Estimate {
    double value = std::numeric_limits<double>::quiet_NaN();
    double sigma = std::numeric_limits<double>::quiet_NaN();
};

/// g2 = C H / (S1 S2), 1-sigma from Poisson propagation
/// sigma/g2 = sqrt(1/C + 1/S1 + 1/S2 + 1/H). For C = 0 the sigma is the
/// one-count value H / (S1 S2).
inline Estimate g2_from_counts(std::uint64_t c, std::uint64_t s1, std::uint64_t s2, std::uint64_t h) {
    if (s1 == 0 || s2 == 0 || h == 0) throw UndefinedMetricError("g2 needs S1, S2 and H all positive");
    const double C = static_cast<double>(c), S1 = static_cast<double>(s1), S2 = static_cast<double>(s2),
                 H = static_cast<double>(h);
    Estimate e;
    e.value = C * H / (S1 * S2);
    e.sigma = c > 0 ? e.value * std::sqrt(1.0 / C + 1.0 / S1 + 1.0 / S2 + 1.0 / H) : H / (S1 * S2);
    return e;
}

struct CoincidenceReport {
    std::uint64_t heralds = 0;      // H
    std::uint64_t singles_1 = 0;    // S1: heralded pulses with a D1 click
    std::uint64_t singles_2 = 0;    // S2
    std::uint64_t coincidences = 0; // C: heralded pulses with both
    std::uint64_t detections = 0;   // all D1 and D2 records
    std::uint64_t unheralded_detections = 0;
    std::uint64_t pulses = 0;
    bool g2_defined = false;
    Estimate g2;
};

/// Per-pulse channel flags in record order. Records of one pulse need not be adjacent.
namespace detail {
struct PulseFlags {
    std::uint64_t pulse;
    std::uint8_t mask;
};

inline std::vector<PulseFlags> pulse_flags(const EventStream& s) {
    std::vector<PulseFlags> flags;
    flags.reserve(s.records.size());
    for (const auto& r : s.records) flags.push_back({r.pulse, static_cast<std::uint8_t>(1u << static_cast<unsigned>(r.channel))});
    std::sort(flags.begin(), flags.end(), [](const PulseFlags& a, const PulseFlags& b) { return a.pulse < b.pulse; });
    std::vector<PulseFlags> merged;
    for (const auto& f : flags) {
        if (!merged.empty() && merged.back().pulse == f.pulse) {
            merged.back().mask |= f.mask;
        } else {
            merged.push_back(f);
        }
    }
    return merged;
}

inline constexpr std::uint8_t bit(Channel c) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(c)); }
}  // namespace detail

inline CoincidenceReport count_coincidences(const EventStream& s) {
    CoincidenceReport rep;
    rep.pulses = s.header.pulses;
    for (const auto& f : detail::pulse_flags(s)) {
        const bool h = f.mask & detail::bit(Channel::HERALD);
        const bool d1 = f.mask & detail::bit(Channel::D1);
        const bool d2 = f.mask & detail::bit(Channel::D2);
        rep.detections += static_cast<unsigned>(d1) + static_cast<unsigned>(d2);
        if (!h) {
            rep.unheralded_detections += static_cast<unsigned>(d1) + static_cast<unsigned>(d2);
            continue;
        }
        ++rep.heralds;
        rep.singles_1 += d1;
        rep.singles_2 += d2;
        rep.coincidences += d1 && d2;
    }
    if (rep.heralds > 0 && rep.singles_1 > 0 && rep.singles_2 > 0) {
        rep.g2 = g2_from_counts(rep.coincidences, rep.singles_1, rep.singles_2, rep.heralds);
        rep.g2_defined = true;
    }
    return rep;
}

/// Fraction of heralded pulses with at least one click on D1 or D2: (S1 + S2 - C) / H.
inline double klyshko_efficiency(const CoincidenceReport& r) {
    if (r.heralds == 0) throw UndefinedMetricError("Klyshko efficiency needs at least one herald");
    return static_cast<double>(r.singles_1 + r.singles_2 - r.coincidences) / static_cast<double>(r.heralds);
}

inline double klyshko_efficiency(const EventStream& s) { return klyshko_efficiency(count_coincidences(s)); }

/// Output noise factor: detections not coming from a heralded pulse's open gate,
/// over all output detections. Noise = every detection on an unheralded pulse
/// (switch leakage and darks) plus the expected dark clicks inside open gates,
/// H (d1 + d2). If the gate never covers the photons' arrival, every detection
/// is leakage. Sigma is binomial in the total detection count.
inline Estimate onf(const CoincidenceReport& r, double dark_d1, double dark_d2, bool gate_covers_arrival = true) {
    if (r.detections == 0) throw UndefinedMetricError("ONF needs at least one output detection");
    const double total = static_cast<double>(r.detections);
    Estimate e;
    if (!gate_covers_arrival) {
        e.value = 1.0;
        e.sigma = 0.0;
        return e;
    }
    const double noise = static_cast<double>(r.unheralded_detections) + static_cast<double>(r.heralds) * (dark_d1 + dark_d2);
    e.value = std::min(1.0, noise / total);
    e.sigma = std::sqrt(e.value * (1.0 - e.value) / total);
    return e;
}

inline bool gate_opens_for_heralds(const StreamHeader& h) { return !h.feed_forward || h.gate_covers_arrival(); }

inline Estimate onf(const EventStream& s) {
    return onf(count_coincidences(s), s.header.dark_d1, s.header.dark_d2, gate_opens_for_heralds(s.header));
}

/// Software extended heralding on a standard-heralding stream: a HERALD record is
/// kept only if its pulse has no R record.
inline EventStream apply_extended_postselection(const EventStream& s) {
    if (s.header.logic != HeraldLogic::standard) throw UndefinedMetricError("post-selection needs a standard-heralding stream");
    std::vector<std::uint64_t> reflected;
    for (const auto& r : s.records)
        if (r.channel == Channel::R) reflected.push_back(r.pulse);
    std::sort(reflected.begin(), reflected.end());
    EventStream out;
    out.header = s.header;
    out.header.logic = HeraldLogic::extended;
    out.records.reserve(s.records.size());
    for (const auto& r : s.records) {
        if (r.channel == Channel::HERALD && std::binary_search(reflected.begin(), reflected.end(), r.pulse)) continue;
        out.records.push_back(r);
    }
    return out;
}

/// g2 from `splits` contiguous pulse blocks: mean of the per-block estimates and
/// the standard error of that mean. Blocks with undefined g2 are skipped.
inline Estimate g2_over_splits(const EventStream& s, unsigned splits) {
    if (splits < 2) throw ConfigError("need at least 2 splits", "--splits");
    if (s.header.pulses < splits) throw UndefinedMetricError("fewer pulses than splits");
    std::vector<EventStream> blocks(splits);
    for (auto& b : blocks) b.header = s.header;
    for (const auto& r : s.records) {
        const auto k = static_cast<std::size_t>((static_cast<unsigned __int128>(r.pulse) * splits) / s.header.pulses);
        blocks[k].records.push_back(r);
    }
    std::vector<double> values;
    for (const auto& b : blocks) {
        const auto rep = count_coincidences(b);
        if (rep.g2_defined) values.push_back(rep.g2.value);
    }
    if (values.size() < 2) throw UndefinedMetricError("g2 is defined in fewer than 2 splits");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n - 1.0;
    return {mean, std::sqrt(var / n)};
}

struct AnalysisReport {
    CoincidenceReport counts;
    std::optional<double> klyshko;
    std::optional<Estimate> onf;
};

inline AnalysisReport analyze_stream(const EventStream& s) {
    AnalysisReport a;
    a.counts = count_coincidences(s);
    if (a.counts.heralds > 0) a.klyshko = klyshko_efficiency(a.counts);
    if (a.counts.detections > 0) a.onf = onf(a.counts, s.header.dark_d1, s.header.dark_d2, gate_opens_for_heralds(s.header));
    return a;
}

namespace detail {
inline void put_number(std::ostream& os, double v) {
    if (std::isnan(v)) {
        os << "nan";
    } else {
        os << format_double(v);
    }
}
}  // namespace detail

inline void write_report_text(const AnalysisReport& a, std::ostream& os) {
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    const auto& c = a.counts;
    os << "pulses = " << c.pulses << '\n'
       << "H = " << c.heralds << '\n'
       << "S1 = " << c.singles_1 << '\n'
       << "S2 = " << c.singles_2 << '\n'
       << "C = " << c.coincidences << '\n'
       << "herald_probability = ";
    detail::put_number(os, c.pulses ? static_cast<double>(c.heralds) / static_cast<double>(c.pulses) : nan);
    os << "\ng2 = ";
    detail::put_number(os, c.g2_defined ? c.g2.value : nan);
    os << "\ng2_sigma = ";
    detail::put_number(os, c.g2_defined ? c.g2.sigma : nan);
    os << "\ng2_defined = " << (c.g2_defined ? "true" : "false") << "\nklyshko = ";
    detail::put_number(os, a.klyshko.value_or(nan));
    os << "\nonf = ";
    detail::put_number(os, a.onf ? a.onf->value : nan);
    os << "\nonf_sigma = ";
    detail::put_number(os, a.onf ? a.onf->sigma : nan);
    os << '\n';
}

inline constexpr std::string_view kReportColumns = "H,S1,S2,C,g2,g2_sigma,klyshko,onf,onf_sigma";

inline void write_report_csv(const AnalysisReport& a, std::ostream& os) {
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    const auto& c = a.counts;
    os << kReportColumns << '\n' << c.heralds << ',' << c.singles_1 << ',' << c.singles_2 << ',' << c.coincidences << ',';
    detail::put_number(os, c.g2_defined ? c.g2.value : nan);
    os << ',';
    detail::put_number(os, c.g2_defined ? c.g2.sigma : nan);
    os << ',';
    detail::put_number(os, a.klyshko.value_or(nan));
    os << ',';
    detail::put_number(os, a.onf ? a.onf->value : nan);
    os << ',';
    detail::put_number(os, a.onf ? a.onf->sigma : nan);
    os << '\n';
}

}  // namespace heraldsim
