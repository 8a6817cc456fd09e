#pragma once

// Pulse-by-pulse Monte Carlo of the heralded source with a feed-forward switch,
// emitting time-tagged detector records.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include "heraldsim/detector.hpp"
#include "heraldsim/errors.hpp"
#include "heraldsim/pdcstate.hpp"
#include "heraldsim/rng.hpp"

namespace heraldsim {

enum class HeraldLogic { standard, extended };

inline std::string_view logic_name(HeraldLogic l) { return l == HeraldLogic::standard ? "standard" : "extended"; }

inline HeraldLogic parse_logic(std::string_view s, const std::string& key = "run.scheme") {
    if (s == "standard") return HeraldLogic::standard;
    if (s == "extended") return HeraldLogic::extended;
    throw ConfigError("expected 'standard' or 'extended', got '" + std::string(s) + "'", key);
}

/// Channel order doubles as the tie-break order for equal timestamps.
enum class Channel : std::uint8_t { T = 0, R = 1, D1 = 2, D2 = 3, HERALD = 4 };

inline std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::T: return "T";
        case Channel::R: return "R";
        case Channel::D1: return "D1";
        case Channel::D2: return "D2";
        case Channel::HERALD: return "HERALD";
    }
    return "?";
}

struct RunConfig {
    double rep_rate_hz = 500e3;
    std::uint64_t pulses = 0;
    SqueezerBank bank;
    /// Path transmissions ahead of the herald detectors (T and R) and of the switch.
    double herald_transmission = 0.3;
    double heralded_transmission = 0.3;
    DetectorModel det_t{1.0, 0.0};
    DetectorModel det_r{1.0, 0.0};
    DetectorModel det_d1{1.0, 0.0};
    DetectorModel det_d2{1.0, 0.0};
    double delay_s = 1e-6;
    double herald_latency_s = 100e-9;
    /// The switch opens this long after the pulse and stays open for on_time_s.
    double gate_open_s = 900e-9;
    double on_time_s = 200e-9;
    double extinction_db = 20.0;
    HeraldLogic logic = HeraldLogic::extended;
    bool feed_forward = true;
    std::uint64_t seed = 1;
    std::string config_digest;
    unsigned threads = 0;  // 0: hardware concurrency

    double period_s() const { return 1.0 / rep_rate_hz; }
    double leak() const { return std::pow(10.0, -extinction_db / 10.0); }
    /// Whether a heralded pulse's photons arrive while its gate is open.
    bool gate_covers_arrival() const { return gate_open_s <= delay_s && delay_s < gate_open_s + on_time_s; }

    void validate() const {
        auto positive = [](double v, const char* key) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("must be positive", key);
        };
        auto unit = [](double v, const char* key) {
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("must lie in [0,1]", key);
        };
        positive(rep_rate_hz, "run.rep_rate_hz");
        positive(delay_s, "run.delay_s");
        positive(on_time_s, "switch.on_time_s");
        if (!(herald_latency_s >= 0.0) || !std::isfinite(herald_latency_s)) throw ConfigError("must be >= 0", "run.herald_latency_s");
        if (!(gate_open_s >= herald_latency_s)) throw ConfigError("switch cannot open before the herald decision", "switch.gate_open_s");
        if (!(on_time_s < period_s())) throw ConfigError("on-time must be shorter than the pulse period", "switch.on_time_s");
        if (!(extinction_db >= 0.0)) throw ConfigError("must be >= 0 dB", "switch.extinction_db");
        unit(herald_transmission, "losses.herald_transmission");
        unit(heralded_transmission, "losses.heralded_transmission");
        det_t.validate("detector.T");
        det_r.validate("detector.R");
        det_d1.validate("detector.D1");
        det_d2.validate("detector.D2");
        bank.validate();
    }
};

struct EventRecord {
    Channel channel = Channel::T;
    std::uint64_t pulse = 0;
    std::int64_t time_ps = 0;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

inline bool record_order(const EventRecord& a, const EventRecord& b) {
    if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
    if (a.channel != b.channel) return a.channel < b.channel;
    return a.pulse < b.pulse;
}

struct StreamHeader {
    std::string format = "heraldsim-stream/1";
    std::string rng{SplitMix64::kName};
    std::uint64_t seed = 0;
    double rep_rate_hz = 500e3;
    std::uint64_t pulses = 0;
    std::string config_digest;
    HeraldLogic logic = HeraldLogic::extended;
    bool feed_forward = true;
    double extinction_db = 20.0;
    double delay_s = 1e-6;
    double gate_open_s = 900e-9;
    double on_time_s = 200e-9;
    double dark_d1 = 0.0;
    double dark_d2 = 0.0;

    /// Feed-forward run whose gate opens in time for the heralded photons.
    bool gate_covers_arrival() const { return gate_open_s <= delay_s && delay_s < gate_open_s + on_time_s; }

    friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct EventStream {
    StreamHeader header;
    std::vector<EventRecord> records;

    friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Per-mode geometric draw with P(n) = (1 - mu) mu^n. One uniform per mode.
inline unsigned sample_mode(double mu, SplitMix64& rng) {
    const double u = rng.uniform();
    if (!(u < mu)) return 0;
    // P(n >= k) = mu^k
    return static_cast<unsigned>(std::floor(std::log(u) / std::log(mu)));
}

inline OccupationPattern sample_pattern(const SqueezerBank& bank, SplitMix64& rng) {
    OccupationPattern p;
    p.transmitted.reserve(bank.transmitted.size());
    p.reflected.reserve(bank.reflected.size());
    for (double q : bank.transmitted) {
        const double t = std::tanh(q);
        p.transmitted.push_back(sample_mode(t * t, rng));
        p.transmitted_total += p.transmitted.back();
    }
    for (double q : bank.reflected) {
        const double t = std::tanh(q);
        p.reflected.push_back(sample_mode(t * t, rng));
        p.reflected_total += p.reflected.back();
    }
    return p;
}

namespace detail {

struct PulseKernel {
    const RunConfig& cfg;
    std::vector<double> mu_t;
    std::vector<double> mu_r;
    DetectorModel eff_t;
    DetectorModel eff_r;
    std::int64_t herald_offset_ps;
    std::int64_t detect_offset_ps;

    explicit PulseKernel(const RunConfig& c)
        : cfg(c),
          eff_t{c.herald_transmission * c.det_t.efficiency, c.det_t.dark},
          eff_r{c.herald_transmission * c.det_r.efficiency, c.det_r.dark},
          herald_offset_ps(std::llround(c.herald_latency_s * 1e12)),
          detect_offset_ps(std::llround(c.delay_s * 1e12)) {
        for (double q : c.bank.transmitted) mu_t.push_back(std::pow(std::tanh(q), 2));
        for (double q : c.bank.reflected) mu_r.push_back(std::pow(std::tanh(q), 2));
    }

    static bool click(unsigned n, const DetectorModel& d, double u) {
        return u >= (1.0 - d.dark) * std::pow(1.0 - d.efficiency, static_cast<double>(n));
    }

    // Draw order per pulse, identical for every scheme and gate setting:
    // one uniform per mode (transmitted, then reflected), T, R, D1 dark, D2 dark,
    // then one uniform per idler photon.
    void run(std::uint64_t pulse, std::vector<EventRecord>& out) const {
        SplitMix64 rng = SplitMix64::for_pulse(cfg.seed, pulse);
        unsigned nt = 0;
        unsigned nr = 0;
        for (double mu : mu_t) nt += sample_mode(mu, rng);
        for (double mu : mu_r) nr += sample_mode(mu, rng);
        const bool t_click = click(nt, eff_t, rng.uniform());
        const bool r_click = click(nr, eff_r, rng.uniform());
        const bool d1_dark = rng.uniform() < cfg.det_d1.dark;
        const bool d2_dark = rng.uniform() < cfg.det_d2.dark;
        const bool heralded = cfg.logic == HeraldLogic::standard ? t_click : (t_click && !r_click);

        double gate = 1.0;
        if (cfg.feed_forward) gate = (heralded && cfg.gate_covers_arrival()) ? 1.0 : cfg.leak();
        const double pass = cfg.heralded_transmission * gate;
        const double p1 = 0.5 * pass * cfg.det_d1.efficiency;
        const double p2 = 0.5 * pass * cfg.det_d2.efficiency;
        bool d1 = d1_dark;
        bool d2 = d2_dark;
        for (unsigned k = 0; k < nt + nr; ++k) {
            const double u = rng.uniform();
            if (u < p1) {
                d1 = true;
            } else if (u < p1 + p2) {
                d2 = true;
            }
        }

        const auto base = static_cast<std::int64_t>(std::llround(static_cast<double>(pulse) * 1e12 / cfg.rep_rate_hz));
        if (t_click) out.push_back({Channel::T, pulse, base});
        if (r_click) out.push_back({Channel::R, pulse, base});
        if (heralded) out.push_back({Channel::HERALD, pulse, base + herald_offset_ps});
        if (d1) out.push_back({Channel::D1, pulse, base + detect_offset_ps});
        if (d2) out.push_back({Channel::D2, pulse, base + detect_offset_ps});
    }
};

}  // namespace detail

inline StreamHeader make_header(const RunConfig& cfg) {
    StreamHeader h;
    h.seed = cfg.seed;
    h.rep_rate_hz = cfg.rep_rate_hz;
    h.pulses = cfg.pulses;
    h.config_digest = cfg.config_digest;
    h.logic = cfg.logic;
    h.feed_forward = cfg.feed_forward;
    h.extinction_db = cfg.extinction_db;
    h.delay_s = cfg.delay_s;
    h.gate_open_s = cfg.gate_open_s;
    h.on_time_s = cfg.on_time_s;
    h.dark_d1 = cfg.det_d1.dark;
    h.dark_d2 = cfg.det_d2.dark;
    return h;
}

/// Pulses are split into contiguous chunks generated on worker threads; the
/// merged stream is identical to sequential generation.
inline EventStream simulate_run(const RunConfig& cfg) {
    cfg.validate();
    EventStream stream;
    stream.header = make_header(cfg);
    if (cfg.pulses == 0) return stream;

    const detail::PulseKernel kernel(cfg);
    unsigned workers = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    const std::uint64_t min_chunk = 1u << 16;
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, (cfg.pulses + min_chunk - 1) / min_chunk));
    workers = std::max(1u, workers);
    std::vector<std::vector<EventRecord>> parts(workers);
    auto work = [&](unsigned w) {
        const std::uint64_t begin = cfg.pulses * w / workers;
        const std::uint64_t end = cfg.pulses * (w + 1) / workers;
        for (std::uint64_t p = begin; p < end; ++p) kernel.run(p, parts[w]);
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    stream.records.reserve(total);
    for (auto& p : parts) stream.records.insert(stream.records.end(), p.begin(), p.end());
    std::sort(stream.records.begin(), stream.records.end(), record_order);
    return stream;
}

// ---- CSV stream format ----

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view s, std::size_t line, std::string_view what) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty())
        throw DataError("invalid " + std::string(what) + " '" + std::string(s) + "'", line);
    return v;
}

inline Channel parse_channel(std::string_view s, std::size_t line) {
    for (Channel c : {Channel::T, Channel::R, Channel::D1, Channel::D2, Channel::HERALD})
        if (channel_name(c) == s) return c;
    throw DataError("unknown channel '" + std::string(s) + "'", line);
}

}  // namespace detail

inline constexpr std::string_view kStreamColumns = "channel,pulse_index,time_ps";

inline void write_stream(const EventStream& s, std::ostream& os) {
    const auto& h = s.header;
    os << "# format=" << h.format << '\n'
       << "# rng=" << h.rng << '\n'
       << "# seed=" << h.seed << '\n'
       << "# rep_rate_hz=" << detail::format_double(h.rep_rate_hz) << '\n'
       << "# pulses=" << h.pulses << '\n'
       << "# config_digest=" << h.config_digest << '\n'
       << "# scheme=" << logic_name(h.logic) << '\n'
       << "# feed_forward=" << (h.feed_forward ? 1 : 0) << '\n'
       << "# extinction_db=" << detail::format_double(h.extinction_db) << '\n'
       << "# delay_s=" << detail::format_double(h.delay_s) << '\n'
       << "# gate_open_s=" << detail::format_double(h.gate_open_s) << '\n'
       << "# on_time_s=" << detail::format_double(h.on_time_s) << '\n'
       << "# dark_d1=" << detail::format_double(h.dark_d1) << '\n'
       << "# dark_d2=" << detail::format_double(h.dark_d2) << '\n'
       << kStreamColumns << '\n';
    for (const auto& r : s.records) os << channel_name(r.channel) << ',' << r.pulse << ',' << r.time_ps << '\n';
}

inline void write_stream(const EventStream& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    write_stream(s, os);
    if (!os) throw DataError("failed writing '" + path + "'");
}

inline EventStream read_stream(std::istream& is) {
    EventStream s;
    std::string line;
    std::size_t n = 0;
    bool columns = false;
    bool have_format = false;
    while (std::getline(is, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string_view v(line);
        if (!columns) {
            if (v.empty()) continue;
            if (v.front() == '#') {
                v.remove_prefix(1);
                while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
                const auto eq = v.find('=');
                if (eq == std::string_view::npos) continue;  // free-form comment
                const auto key = v.substr(0, eq);
                const auto val = v.substr(eq + 1);
                auto& h = s.header;
                if (key == "format") {
                    h.format = std::string(val);
                    have_format = true;
                    if (h.format != "heraldsim-stream/1") throw DataError("unsupported format '" + h.format + "'", n);
                } else if (key == "rng") {
                    h.rng = std::string(val);
                } else if (key == "seed") {
                    h.seed = detail::parse_number<std::uint64_t>(val, n, "seed");
                } else if (key == "rep_rate_hz") {
                    h.rep_rate_hz = detail::parse_number<double>(val, n, "rep_rate_hz");
                } else if (key == "pulses") {
                    h.pulses = detail::parse_number<std::uint64_t>(val, n, "pulses");
                } else if (key == "config_digest") {
                    h.config_digest = std::string(val);
                } else if (key == "scheme") {
                    if (val == "standard") {
                        h.logic = HeraldLogic::standard;
                    } else if (val == "extended") {
                        h.logic = HeraldLogic::extended;
                    } else {
                        throw DataError("unknown scheme '" + std::string(val) + "'", n);
                    }
                } else if (key == "feed_forward") {
                    if (val != "0" && val != "1") throw DataError("feed_forward must be 0 or 1", n);
                    h.feed_forward = val == "1";
                } else if (key == "extinction_db") {
                    h.extinction_db = detail::parse_number<double>(val, n, "extinction_db");
                } else if (key == "delay_s") {
                    h.delay_s = detail::parse_number<double>(val, n, "delay_s");
                } else if (key == "gate_open_s") {
                    h.gate_open_s = detail::parse_number<double>(val, n, "gate_open_s");
                } else if (key == "on_time_s") {
                    h.on_time_s = detail::parse_number<double>(val, n, "on_time_s");
                } else if (key == "dark_d1") {
                    h.dark_d1 = detail::parse_number<double>(val, n, "dark_d1");
                } else if (key == "dark_d2") {
                    h.dark_d2 = detail::parse_number<double>(val, n, "dark_d2");
                } else {
                    throw DataError("unknown header key '" + std::string(key) + "'", n);
                }
                continue;
            }
            if (v != kStreamColumns) throw DataError("expected column header '" + std::string(kStreamColumns) + "'", n);
            if (!have_format) throw DataError("missing '# format=' header line", n);
            columns = true;
            continue;
        }
        if (v.empty()) continue;
        const auto c1 = v.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : v.find(',', c1 + 1);
        if (c2 == std::string_view::npos || v.find(',', c2 + 1) != std::string_view::npos)
            throw DataError("expected 3 comma-separated fields", n);
        EventRecord r;
        r.channel = detail::parse_channel(v.substr(0, c1), n);
        r.pulse = detail::parse_number<std::uint64_t>(v.substr(c1 + 1, c2 - c1 - 1), n, "pulse_index");
        r.time_ps = detail::parse_number<std::int64_t>(v.substr(c2 + 1), n, "time_ps");
        if (r.pulse >= s.header.pulses) throw DataError("pulse_index out of range", n);
        if (!s.records.empty() && record_order(r, s.records.back())) throw DataError("records are not sorted", n);
        s.records.push_back(r);
    }
    if (!columns) throw DataError("missing column header line", n == 0 ? 1 : n);
    return s;
}

inline EventStream read_stream(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    return read_stream(is);
}

}  // namespace heraldsim
