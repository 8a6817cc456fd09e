#pragma once

// Scenario files (INI), loss presets, and the derived source model.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "heraldsim/errors.hpp"
#include "heraldsim/eventsim.hpp"
#include "heraldsim/heralding.hpp"
#include "heraldsim/numeric.hpp"
#include "heraldsim/pdcstate.hpp"
#include "heraldsim/spectra.hpp"

namespace heraldsim {

enum class LossPreset { experimental, lossless };

inline std::string_view preset_name(LossPreset p) { return p == LossPreset::experimental ? "experimental" : "lossless"; }

inline LossPreset parse_preset(std::string_view s, const std::string& key = "losses.preset") {
    if (s == "experimental") return LossPreset::experimental;
    if (s == "lossless") return LossPreset::lossless;
    throw ConfigError("expected 'experimental' or 'lossless', got '" + std::string(s) + "'", key);
}

/// Loss and detector settings. Unset entries take the preset's value.
struct LossSpec {
    LossPreset preset = LossPreset::experimental;
    std::optional<double> herald_transmission;
    std::optional<double> heralded_transmission;
    std::optional<double> efficiency_t, efficiency_r, efficiency_d1, efficiency_d2;
    double dark_t = 0.0, dark_r = 0.0, dark_d1 = 0.0, dark_d2 = 0.0;
    std::optional<double> klyshko;

    double resolved_herald_transmission() const {
        return herald_transmission.value_or(preset == LossPreset::experimental ? 0.3 : 1.0);
    }
    double resolved_heralded_transmission() const {
        return heralded_transmission.value_or(preset == LossPreset::experimental ? 0.3 : 1.0);
    }
    DetectorModel detector_t() const { return {efficiency_t.value_or(1.0), dark_t}; }
    DetectorModel detector_r() const { return {efficiency_r.value_or(1.0), dark_r}; }
    DetectorModel detector_d1() const { return {efficiency_d1.value_or(1.0), dark_d1}; }
    DetectorModel detector_d2() const { return {efficiency_d2.value_or(1.0), dark_d2}; }

    /// Heralded arm as one threshold detector behind the 50/50 splitter.
    DetectorModel heralded_arm() const {
        const double eta = resolved_heralded_transmission() * 0.5 * (detector_d1().efficiency + detector_d2().efficiency);
        return {eta, 1.0 - (1.0 - dark_d1) * (1.0 - dark_d2)};
    }

    double resolved_klyshko() const { return klyshko.value_or(heralded_arm().efficiency); }

    LossModel model(double extinction_db) const {
        const double ht = resolved_herald_transmission();
        LossModel m;
        m.herald_t = {ht * detector_t().efficiency, dark_t};
        m.herald_r = {ht * detector_r().efficiency, dark_r};
        m.heralded = heralded_arm();
        m.klyshko = resolved_klyshko();
        m.extinction_db = extinction_db;
        return m;
    }
};

struct TruncationSpec {
    std::size_t max_modes = kDefaultMaxModes;
    unsigned n_max = kDefaultMaxPhotons;
};

struct SwitchSpec {
    double extinction_db = 20.0;
    double on_time_s = 200e-9;
    double gate_open_s = 900e-9;
};

struct SweepSpec {
    std::optional<double> nbar_min;
    std::optional<double> nbar_max;
    unsigned points = 25;
    std::vector<Scheme> schemes{std::begin(kAllSchemes), std::end(kAllSchemes)};

    double resolved_min() const { return nbar_min.value_or(1e-2); }
    double resolved_max(LossPreset p) const { return nbar_max.value_or(p == LossPreset::experimental ? 0.35 : 2.0); }

    void validate(LossPreset p) const {
        const double lo = resolved_min(), hi = resolved_max(p);
        if (!(lo > 0.0 && lo <= 4.0)) throw ConfigError("must lie in (0, 4]", "sweep.nbar_min");
        if (!(hi > 0.0 && hi <= 4.0)) throw ConfigError("must lie in (0, 4]", "sweep.nbar_max");
        if (hi < lo) throw ConfigError("must not be below sweep.nbar_min", "sweep.nbar_max");
        if (points < 1) throw ConfigError("must be at least 1", "sweep.points");
        if (points < 2 && hi != lo) throw ConfigError("at least 2 points unless nbar_min == nbar_max", "sweep.points");
        if (schemes.empty()) throw ConfigError("at least one scheme", "sweep.schemes");
    }

    /// Log-spaced mean pair numbers.
    std::vector<double> values(LossPreset p) const {
        validate(p);
        const double lo = resolved_min(), hi = resolved_max(p);
        if (points == 1 || lo == hi) return std::vector<double>(points, lo);
        std::vector<double> v(points);
        for (unsigned i = 0; i < points; ++i) {
            const double f = static_cast<double>(i) / static_cast<double>(points - 1);
            v[i] = std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)));
        }
        v.front() = lo;
        v.back() = hi;
        return v;
    }
};

struct RunSpec {
    double rep_rate_hz = 500e3;
    std::uint64_t pulses = 1000000;
    double delay_s = 1e-6;
    double herald_latency_s = 100e-9;
    HeraldLogic logic = HeraldLogic::extended;
    bool feed_forward = true;
    std::uint64_t seed = 1;
    /// Pump setting: a target heralding probability takes precedence over n_bar.
    double n_bar = 0.1;
    std::optional<double> herald_probability;
};

struct Scenario {
    PumpSpec pump;
    PhaseMatchSpec phase_matching;
    GridSpec grid;
    double filter_center_hz = 0.0;
    double filter_width_hz = 50e9;
    TruncationSpec truncation;
    LossSpec losses;
    SwitchSpec switch_spec;
    SweepSpec sweep;
    RunSpec run;

    FilterSpec filter() const { return {kTwoPi * filter_center_hz, kTwoPi * filter_width_hz, FilterShape::rectangular}; }
    LossModel loss_model() const { return losses.model(switch_spec.extinction_db); }

    void validate() const {
        pump.validate();
        phase_matching.validate();
        if (grid.bins < FrequencyGrid::kMinBins) throw ConfigError("grid needs at least 16 bins", "grid.bins");
        if (!(grid.half_span_widths > 0.0)) throw ConfigError("must be positive", "grid.half_span_widths");
        filter().validate();
        if (truncation.max_modes < 1 || truncation.max_modes > kMaxBankModes / 2)
            throw ConfigError("must lie in [1, 32]", "truncation.max_modes");
        if (truncation.n_max > 64) throw ConfigError("must be at most 64", "truncation.n_max");
        auto unit = [](double v, const std::string& key) {
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("must lie in [0,1]", key);
        };
        unit(losses.resolved_herald_transmission(), "losses.herald_transmission");
        unit(losses.resolved_heralded_transmission(), "losses.heralded_transmission");
        const std::pair<const char*, DetectorModel> detectors[] = {
            {"T", losses.detector_t()}, {"R", losses.detector_r()}, {"D1", losses.detector_d1()}, {"D2", losses.detector_d2()}};
        for (const auto& [name, d] : detectors) {
            unit(d.efficiency, std::string("detector.") + name + "_efficiency");
            if (!(d.dark >= 0.0 && d.dark < 1.0)) throw ConfigError("must lie in [0,1)", std::string("detector.") + name + "_dark");
        }
        loss_model().validate();
        sweep.validate(losses.preset);
        if (!(run.n_bar > 0.0 && run.n_bar <= 4.0)) throw ConfigError("must lie in (0, 4]", "run.n_bar");
        if (run.herald_probability && !(*run.herald_probability > 0.0 && *run.herald_probability < 1.0))
            throw ConfigError("must lie in (0, 1)", "run.herald_probability");
    }

    /// Resolved settings, one `section.key=value` line each, in a fixed order.
    std::string canonical() const {
        std::ostringstream os;
        auto num = [&](const char* key, double v) { os << key << '=' << detail::format_double(v) << '\n'; };
        auto cnt = [&](const char* key, std::uint64_t v) { os << key << '=' << v << '\n'; };
        num("pump.center_wavelength_nm", pump.center_wavelength_nm);
        num("pump.spectral_width_hz", pump.spectral_width_hz);
        num("phase_matching.inverse_width_s", phase_matching.inverse_width_s);
        num("phase_matching.ridge_slope", phase_matching.ridge_slope);
        cnt("grid.bins", grid.bins);
        num("grid.half_span_widths", grid.half_span_widths);
        num("filter.center_hz", filter_center_hz);
        num("filter.width_hz", filter_width_hz);
        cnt("truncation.max_modes", truncation.max_modes);
        cnt("truncation.n_max", truncation.n_max);
        os << "losses.preset=" << preset_name(losses.preset) << '\n';
        num("losses.herald_transmission", losses.resolved_herald_transmission());
        num("losses.heralded_transmission", losses.resolved_heralded_transmission());
        num("losses.klyshko", losses.resolved_klyshko());
        num("detector.T_efficiency", losses.detector_t().efficiency);
        num("detector.T_dark", losses.dark_t);
        num("detector.R_efficiency", losses.detector_r().efficiency);
        num("detector.R_dark", losses.dark_r);
        num("detector.D1_efficiency", losses.detector_d1().efficiency);
        num("detector.D1_dark", losses.dark_d1);
        num("detector.D2_efficiency", losses.detector_d2().efficiency);
        num("detector.D2_dark", losses.dark_d2);
        num("switch.extinction_db", switch_spec.extinction_db);
        num("switch.on_time_s", switch_spec.on_time_s);
        num("switch.gate_open_s", switch_spec.gate_open_s);
        num("sweep.nbar_min", sweep.resolved_min());
        num("sweep.nbar_max", sweep.resolved_max(losses.preset));
        cnt("sweep.points", sweep.points);
        os << "sweep.schemes=";
        for (std::size_t i = 0; i < sweep.schemes.size(); ++i) os << (i ? "," : "") << scheme_name(sweep.schemes[i]);
        os << '\n';
        num("run.rep_rate_hz", run.rep_rate_hz);
        cnt("run.pulses", run.pulses);
        num("run.delay_s", run.delay_s);
        num("run.herald_latency_s", run.herald_latency_s);
        os << "run.scheme=" << logic_name(run.logic) << '\n';
        os << "run.feed_forward=" << (run.feed_forward ? "true" : "false") << '\n';
        cnt("run.seed", run.seed);
        num("run.n_bar", run.n_bar);
        if (run.herald_probability) num("run.herald_probability", *run.herald_probability);
        return os.str();
    }

    /// 16 hex digits of FNV-1a over the canonical form.
    std::string digest() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
        return buf;
    }
};

namespace detail {

inline double to_double(const std::string& s, const std::string& key) {
    std::string_view v(s);
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("expected a finite number, got '" + s + "'", key);
    return out;
}

inline std::uint64_t to_count(const std::string& s, const std::string& key) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError("expected a nonnegative integer, got '" + s + "'", key);
    return out;
}

inline bool to_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("expected a boolean, got '" + s + "'", key);
}

inline std::vector<Scheme> to_schemes(const std::string& s, const std::string& key) {
    std::vector<Scheme> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        while (!item.empty() && item.front() == ' ') item.erase(item.begin());
        while (!item.empty() && item.back() == ' ') item.pop_back();
        if (!item.empty()) out.push_back(parse_scheme(item, key));
    }
    if (out.empty()) throw ConfigError("at least one scheme", key);
    return out;
}

}  // namespace detail

/// Parses an INI scenario. Unknown sections or keys are errors.
inline Scenario parse_scenario(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.message() + " (line " + std::to_string(e.line()) + ")", "scenario");
    }

    Scenario sc;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"pump.center_wavelength_nm", [&](auto& v, auto& k) { sc.pump.center_wavelength_nm = detail::to_double(v, k); }},
        {"pump.spectral_width_hz", [&](auto& v, auto& k) { sc.pump.spectral_width_hz = detail::to_double(v, k); }},
        {"phase_matching.inverse_width_s", [&](auto& v, auto& k) { sc.phase_matching.inverse_width_s = detail::to_double(v, k); }},
        {"phase_matching.ridge_slope", [&](auto& v, auto& k) { sc.phase_matching.ridge_slope = detail::to_double(v, k); }},
        {"grid.bins", [&](auto& v, auto& k) { sc.grid.bins = detail::to_count(v, k); }},
        {"grid.half_span_widths", [&](auto& v, auto& k) { sc.grid.half_span_widths = detail::to_double(v, k); }},
        {"filter.center_hz", [&](auto& v, auto& k) { sc.filter_center_hz = detail::to_double(v, k); }},
        {"filter.width_hz", [&](auto& v, auto& k) { sc.filter_width_hz = detail::to_double(v, k); }},
        {"truncation.max_modes", [&](auto& v, auto& k) { sc.truncation.max_modes = detail::to_count(v, k); }},
        {"truncation.n_max", [&](auto& v, auto& k) { sc.truncation.n_max = static_cast<unsigned>(detail::to_count(v, k)); }},
        {"losses.preset", [&](auto& v, auto& k) { sc.losses.preset = parse_preset(v, k); }},
        {"losses.herald_transmission", [&](auto& v, auto& k) { sc.losses.herald_transmission = detail::to_double(v, k); }},
        {"losses.heralded_transmission", [&](auto& v, auto& k) { sc.losses.heralded_transmission = detail::to_double(v, k); }},
        {"losses.klyshko", [&](auto& v, auto& k) { sc.losses.klyshko = detail::to_double(v, k); }},
        {"detector.T_efficiency", [&](auto& v, auto& k) { sc.losses.efficiency_t = detail::to_double(v, k); }},
        {"detector.R_efficiency", [&](auto& v, auto& k) { sc.losses.efficiency_r = detail::to_double(v, k); }},
        {"detector.D1_efficiency", [&](auto& v, auto& k) { sc.losses.efficiency_d1 = detail::to_double(v, k); }},
        {"detector.D2_efficiency", [&](auto& v, auto& k) { sc.losses.efficiency_d2 = detail::to_double(v, k); }},
        {"detector.T_dark", [&](auto& v, auto& k) { sc.losses.dark_t = detail::to_double(v, k); }},
        {"detector.R_dark", [&](auto& v, auto& k) { sc.losses.dark_r = detail::to_double(v, k); }},
        {"detector.D1_dark", [&](auto& v, auto& k) { sc.losses.dark_d1 = detail::to_double(v, k); }},
        {"detector.D2_dark", [&](auto& v, auto& k) { sc.losses.dark_d2 = detail::to_double(v, k); }},
        {"switch.extinction_db", [&](auto& v, auto& k) { sc.switch_spec.extinction_db = detail::to_double(v, k); }},
        {"switch.on_time_s", [&](auto& v, auto& k) { sc.switch_spec.on_time_s = detail::to_double(v, k); }},
        {"switch.gate_open_s", [&](auto& v, auto& k) { sc.switch_spec.gate_open_s = detail::to_double(v, k); }},
        {"sweep.nbar_min", [&](auto& v, auto& k) { sc.sweep.nbar_min = detail::to_double(v, k); }},
        {"sweep.nbar_max", [&](auto& v, auto& k) { sc.sweep.nbar_max = detail::to_double(v, k); }},
        {"sweep.points", [&](auto& v, auto& k) { sc.sweep.points = static_cast<unsigned>(detail::to_count(v, k)); }},
        {"sweep.schemes", [&](auto& v, auto& k) { sc.sweep.schemes = detail::to_schemes(v, k); }},
        {"run.rep_rate_hz", [&](auto& v, auto& k) { sc.run.rep_rate_hz = detail::to_double(v, k); }},
        {"run.pulses", [&](auto& v, auto& k) { sc.run.pulses = detail::to_count(v, k); }},
        {"run.delay_s", [&](auto& v, auto& k) { sc.run.delay_s = detail::to_double(v, k); }},
        {"run.herald_latency_s", [&](auto& v, auto& k) { sc.run.herald_latency_s = detail::to_double(v, k); }},
        {"run.scheme", [&](auto& v, auto& k) { sc.run.logic = parse_logic(v, k); }},
        {"run.feed_forward", [&](auto& v, auto& k) { sc.run.feed_forward = detail::to_bool(v, k); }},
        {"run.seed", [&](auto& v, auto& k) { sc.run.seed = detail::to_count(v, k); }},
        {"run.n_bar", [&](auto& v, auto& k) { sc.run.n_bar = detail::to_double(v, k); }},
        {"run.herald_probability", [&](auto& v, auto& k) { sc.run.herald_probability = detail::to_double(v, k); }},
    };

    const std::set<std::string> sections{"pump", "phase_matching", "grid", "filter", "truncation", "losses",
                                         "detector", "switch", "sweep", "run"};
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("key outside any section", section);
        if (!sections.count(section)) throw ConfigError("unknown section", section);
        for (const auto& [key, value] : body) {
            const std::string path = section + "." + key;
            const auto it = setters.find(path);
            if (it == setters.end()) throw ConfigError("unknown key", path);
            it->second(value.data(), path);
        }
    }
    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open scenario file '" + path + "'", "config");
    return parse_scenario(is);
}

/// JSA, unfiltered Schmidt spectrum, and the filtered families.
struct SourceModel {
    JsaMatrix jsa;
    SchmidtSpectrum unfiltered;
    FilteredSchmidt filtered;
    double filter_transmission = 0.0;
};

inline SourceModel build_source(const Scenario& sc) {
    sc.validate();
    SourceModel m;
    m.jsa = build_jsa(sc.pump, sc.phase_matching, sc.grid.build(sc.pump));
    m.unfiltered = schmidt_decompose(m.jsa, sc.truncation.max_modes);
    auto [t, r] = partition_by_filter(m.jsa, sc.filter());
    m.filter_transmission = t.norm;
    m.filtered = filtered_schmidt(t, r, sc.truncation.max_modes);
    return m;
}

/// Bank for a scheme at mean pair number n_bar (unfiltered spectrum for Scheme::unfiltered).
inline SqueezerBank bank_for(const SourceModel& m, Scheme scheme, double n_bar) {
    if (scheme == Scheme::unfiltered) return squeezer_bank(m.unfiltered, calibrate_pump_factor(m.unfiltered, n_bar));
    return squeezer_bank(m.filtered, calibrate_pump_factor(m.filtered, n_bar));
}

/// Pump factor at which the heralding probability - p_herald, times p_ext for
/// extended logic - equals `target`.
inline double calibrate_to_herald_probability(const FilteredSchmidt& fs, const LossModel& losses, HeraldLogic logic,
                                              double target, unsigned n_max) {
    if (!(target > 0.0 && target < 1.0)) throw ConfigError("must lie in (0, 1)", "run.herald_probability");
    const DetectorModel det_r = logic == HeraldLogic::extended ? losses.herald_r : DetectorModel::blind();
    auto prob = [&](double b) { return HeraldedState(squeezer_bank(fs, b), losses.herald_t, det_r, n_max).event_probability(); };
    double lo = 0.0;
    double hi = calibrate_pump_factor(fs, 4.0);
    if (prob(hi) < target) throw ConfigError("heralding probability is out of reach", "run.herald_probability");
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (prob(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline RunConfig make_run_config(const Scenario& sc, const SourceModel& m) {
    RunConfig c;
    c.rep_rate_hz = sc.run.rep_rate_hz;
    c.pulses = sc.run.pulses;
    const double b = sc.run.herald_probability
                         ? calibrate_to_herald_probability(m.filtered, sc.loss_model(), sc.run.logic,
                                                           *sc.run.herald_probability, sc.truncation.n_max)
                         : calibrate_pump_factor(m.filtered, sc.run.n_bar);
    c.bank = squeezer_bank(m.filtered, b);
    c.herald_transmission = sc.losses.resolved_herald_transmission();
    c.heralded_transmission = sc.losses.resolved_heralded_transmission();
    c.det_t = sc.losses.detector_t();
    c.det_r = sc.losses.detector_r();
    c.det_d1 = sc.losses.detector_d1();
    c.det_d2 = sc.losses.detector_d2();
    c.delay_s = sc.run.delay_s;
    c.herald_latency_s = sc.run.herald_latency_s;
    c.gate_open_s = sc.switch_spec.gate_open_s;
    c.on_time_s = sc.switch_spec.on_time_s;
    c.extinction_db = sc.switch_spec.extinction_db;
    c.logic = sc.run.logic;
    c.feed_forward = sc.run.feed_forward;
    c.seed = sc.run.seed;
    c.config_digest = sc.digest();
    c.validate();
    return c;
}

}  // namespace heraldsim
