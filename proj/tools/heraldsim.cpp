// heraldsim: metric sweeps, event-stream simulation and stream analysis.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "heraldsim/heraldsim.hpp"

namespace fs = std::filesystem;
using namespace heraldsim;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kUndefined = 4 };

struct Common {
    std::string config;
    std::string out;
    std::optional<std::string> preset;
    std::optional<double> extinction_db;
};

fs::path output_dir(const Common& c) {
    fs::path dir = ".";
    if (!c.out.empty()) {
        dir = c.out;
    } else if (const char* env = std::getenv("HERALDSIM_OUT"); env && *env) {
        dir = env;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message(), "--out");
    return dir;
}

Scenario load(const Common& c) {
    Scenario sc;
    if (!c.config.empty()) sc = load_scenario(c.config);
    if (c.preset) sc.losses.preset = parse_preset(*c.preset, "--preset");
    if (c.extinction_db) sc.switch_spec.extinction_db = *c.extinction_db;
    return sc;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DataError("cannot open '" + p.string() + "' for writing");
    return os;
}

void print_number(std::ostream& os, const char* key, double v) {
    os << key << " = ";
    detail::put_number(os, v);
    os << '\n';
}

void print_list(std::ostream& os, const char* key, const std::vector<double>& v) {
    os << key << " =";
    for (double x : v) os << ' ' << detail::format_double(x);
    os << '\n';
}

// ---- sweep ----

struct SweepArgs {
    Common common;
    std::optional<unsigned> points;
    std::optional<double> nbar_min;
    std::optional<double> nbar_max;
    std::optional<std::string> schemes;
    bool svg = false;
};

void write_svgs(const SweepResult& r, const fs::path& dir) {
    struct Panel {
        const char* file;
        const char* title;
        const char* y_label;
        double HeraldMetrics::*field;
        bool log_y;
    };
    const Panel panels[] = {
        {"fidelity.svg", "Heralded single-photon fidelity", "fidelity", &HeraldMetrics::fidelity, false},
        {"g2.svg", "Heralded g2(0)", "g2(0)", &HeraldMetrics::g2, true},
        {"fitness.svg", "Source fitness", "fitness", &HeraldMetrics::fitness, false},
    };
    for (const auto& p : panels) {
        svg::Chart chart;
        chart.title = p.title;
        chart.x_label = "heralding probability";
        chart.y_label = p.y_label;
        chart.log_y = p.log_y;
        for (std::size_t s = 0; s < r.schemes.size(); ++s) {
            svg::Series series;
            series.label = std::string(scheme_name(r.schemes[s]));
            for (const auto& m : r.rows[s]) {
                series.x.push_back(m.heralding_probability());
                series.y.push_back(m.*(p.field));
            }
            chart.series.push_back(std::move(series));
        }
        auto os = open_out(dir / p.file);
        svg::write_chart(chart, os);
    }
}

int run_sweep_cmd(const SweepArgs& a) {
    Scenario sc = load(a.common);
    if (a.points) sc.sweep.points = *a.points;
    if (a.nbar_min) sc.sweep.nbar_min = *a.nbar_min;
    if (a.nbar_max) sc.sweep.nbar_max = *a.nbar_max;
    if (a.schemes) sc.sweep.schemes = detail::to_schemes(*a.schemes, "--scheme");
    sc.validate();
    const fs::path dir = output_dir(a.common);

    const SourceModel src = build_source(sc);
    const SweepResult r = run_sweep(sc, src);
    {
        auto os = open_out(dir / "sweep.csv");
        write_sweep_csv(r, os);
    }
    if (a.svg) write_svgs(r, dir);

    std::cout << "config_digest = " << r.config_digest << '\n'
              << "preset = " << preset_name(r.preset) << '\n'
              << "rows = " << r.schemes.size() * r.n_bar.size() << '\n';
    print_number(std::cout, "filter_transmission", src.filter_transmission);
    print_number(std::cout, "schmidt_number_unfiltered", src.unfiltered.schmidt_number());
    print_number(std::cout, "g2_reduction_at_top", r.summary.g2_reduction_at_top);
    print_number(std::cout, "g2_reduction_best", r.summary.g2_reduction_best);
    print_number(std::cout, "rate_ratio_at_matched_g2", r.summary.rate_ratio_at_matched_g2);
    print_number(std::cout, "fitness_improvement_max", r.summary.fitness_improvement_max);
    print_number(std::cout, "max_tail_bound", r.summary.max_tail_bound);
    if (r.summary.truncation_warning) std::cerr << "warning: photon-number truncation tail exceeds 1e-3\n";
    if (src.unfiltered.truncation_warning || src.filtered.discarded_weight > kDiscardWarning)
        std::cerr << "warning: Schmidt truncation discards more than 1e-3 of the weight\n";
    std::cout << "csv = " << (dir / "sweep.csv").string() << '\n';
    return kOk;
}

// ---- simulate ----

struct SimulateArgs {
    Common common;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> pulses;
    std::optional<std::string> scheme;
    std::optional<bool> feed_forward;
    std::optional<double> herald_prob;
    std::optional<double> nbar;
    unsigned threads = 0;
};

int run_simulate_cmd(const SimulateArgs& a) {
    Scenario sc = load(a.common);
    if (a.seed) sc.run.seed = *a.seed;
    if (a.pulses) sc.run.pulses = *a.pulses;
    if (a.scheme) sc.run.logic = parse_logic(*a.scheme, "--scheme");
    if (a.feed_forward) sc.run.feed_forward = *a.feed_forward;
    if (a.nbar) {
        sc.run.n_bar = *a.nbar;
        sc.run.herald_probability.reset();
    }
    if (a.herald_prob) sc.run.herald_probability = *a.herald_prob;
    sc.validate();
    const fs::path dir = output_dir(a.common);

    const SourceModel src = build_source(sc);
    RunConfig cfg = make_run_config(sc, src);
    cfg.threads = a.threads;
    const EventStream stream = simulate_run(cfg);
    const fs::path file = dir / "stream.csv";
    write_stream(stream, file.string());

    const LossModel lm = sc.loss_model();
    const DetectorModel det_r = sc.run.logic == HeraldLogic::extended ? lm.herald_r : DetectorModel::blind();
    const double p = HeraldedState(cfg.bank, lm.herald_t, det_r, sc.truncation.n_max).event_probability();
    const auto rep = count_coincidences(stream);
    const double n = static_cast<double>(cfg.pulses);

    std::cout << "config_digest = " << cfg.config_digest << '\n'
              << "rng = " << stream.header.rng << '\n'
              << "seed = " << cfg.seed << '\n'
              << "pulses = " << cfg.pulses << '\n'
              << "records = " << stream.records.size() << '\n'
              << "heralds = " << rep.heralds << '\n';
    print_number(std::cout, "herald_rate", n > 0 ? static_cast<double>(rep.heralds) / n : std::nan(""));
    print_number(std::cout, "herald_probability_analytic", p);
    print_number(std::cout, "herald_rate_z", n > 0 ? (static_cast<double>(rep.heralds) / n - p) / std::sqrt(p * (1 - p) / n) : std::nan(""));
    print_number(std::cout, "pump_factor", cfg.bank.pump_factor);
    print_number(std::cout, "mean_pair_number", mean_pair_number(cfg.bank));
    print_list(std::cout, "q_transmitted", cfg.bank.transmitted);
    print_list(std::cout, "q_reflected", cfg.bank.reflected);
    std::cout << "stream = " << file.string() << '\n';
    return kOk;
}

// ---- analyze ----

struct AnalyzeArgs {
    Common common;
    std::string stream;
    unsigned splits = 0;
};

int run_analyze_cmd(const AnalyzeArgs& a) {
    const EventStream s = read_stream(a.stream);
    const fs::path dir = output_dir(a.common);
    const AnalysisReport rep = analyze_stream(s);
    {
        auto os = open_out(dir / "report.txt");
        write_report_text(rep, os);
    }
    {
        auto os = open_out(dir / "report.csv");
        write_report_csv(rep, os);
    }
    write_report_text(rep, std::cout);
    if (a.splits > 0) {
        const Estimate e = g2_over_splits(s, a.splits);
        std::cout << "splits = " << a.splits << '\n';
        print_number(std::cout, "g2_split_mean", e.value);
        print_number(std::cout, "g2_split_sigma", e.sigma);
    }
    return kOk;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Scenario INI file (built-in reference scenario if omitted)");
    cmd->add_option("--out", c.out, "Output directory (default: $HERALDSIM_OUT or .)");
    cmd->add_option("--preset", c.preset, "Loss preset: experimental or lossless");
    cmd->add_option("--extinction-db", c.extinction_db, "Switch extinction ratio in dB");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heralded single-photon source simulator"};
    app.require_subcommand(1);

    SweepArgs sweep;
    auto* sw = app.add_subcommand("sweep", "Evaluate metrics over a log-spaced mean pair number sweep");
    add_common(sw, sweep.common);
    sw->add_option("--points", sweep.points, "Number of sweep points");
    sw->add_option("--nbar-min", sweep.nbar_min, "Smallest mean pair number");
    sw->add_option("--nbar-max", sweep.nbar_max, "Largest mean pair number");
    sw->add_option("--scheme", sweep.schemes, "Comma-separated schemes: unfiltered,standard,extended,extended+ffwd");
    sw->add_flag("--svg", sweep.svg, "Also write fidelity, g2 and fitness charts");

    SimulateArgs sim;
    auto* si = app.add_subcommand("simulate", "Generate a time-tagged event stream");
    add_common(si, sim.common);
    si->add_option("--seed", sim.seed, "RNG seed");
    si->add_option("--pulses", sim.pulses, "Number of pump pulses");
    si->add_option("--scheme", sim.scheme, "Heralding logic: standard or extended");
    si->add_option("--feed-forward", sim.feed_forward, "Gate the switch on the herald (true/false)");
    si->add_option("--herald-prob", sim.herald_prob, "Set the pump so the heralding probability equals this");
    si->add_option("--nbar", sim.nbar, "Set the pump by mean pair number");
    si->add_option("--threads", sim.threads, "Worker threads (0: all cores)");

    AnalyzeArgs an;
    auto* ana = app.add_subcommand("analyze", "Estimate g2, Klyshko efficiency and ONF from a stream file");
    ana->add_option("stream", an.stream, "Stream CSV file")->required();
    ana->add_option("--out", an.common.out, "Output directory (default: $HERALDSIM_OUT or .)");
    ana->add_option("--splits", an.splits, "Also estimate g2 over this many pulse blocks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*sw) return run_sweep_cmd(sweep);
        if (*si) return run_simulate_cmd(sim);
        if (*ana) return run_analyze_cmd(an);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const UndefinedMetricError& e) {
        std::cerr << "undefined metric: " << e.what() << '\n';
        return kUndefined;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
