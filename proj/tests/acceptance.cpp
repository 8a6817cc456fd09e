// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "heraldsim/heraldsim.hpp"

using namespace heraldsim;

namespace {

const std::string kScenarios = std::string(HERALDSIM_SOURCE_DIR) + "/scenarios/";

struct Check {
    std::ostringstream log;
    bool ok = true;

    void expect(bool cond, const std::string& what) {
        log << "    [" << (cond ? "ok" : "FAIL") << "] " << what << '\n';
        ok = ok && cond;
    }
};

std::string fmt(double v, const char* format = "%.6g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> log_space(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
    return v;
}

// ---- 1: fidelity curves, lossless ----
void criterion_1(Check& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = load_scenario(kScenarios + "lossless.ini");
    const SweepResult r = run_sweep(sc, build_source(sc));
    const double elapsed = seconds_since(t0);
    c.expect(r.n_bar.size() >= 25 && r.n_bar.front() == 1e-2 && r.n_bar.back() == 2.0,
             "sweep n_bar in [1e-2, 2] with " + std::to_string(r.n_bar.size()) + " points");

    const auto& unf = *r.curve(Scheme::unfiltered);
    double unf_max = 0.0;
    for (const auto& m : unf) unf_max = std::max(unf_max, m.fidelity);
    c.expect(unf_max < 0.8, "unfiltered fidelity max " + fmt(unf_max) + " < 0.8");

    const auto& st = *r.curve(Scheme::standard);
    c.expect(st.front().fidelity > 0.9, "standard fidelity at n_bar=1e-2: " + fmt(st.front().fidelity) + " > 0.9");
    const Curve fs = metric_curve(st, &HeraldMetrics::fidelity);
    bool decaying = true;
    for (std::size_t k = 1; k < fs.y.size(); ++k) decaying = decaying && fs.y[k] <= fs.y[k - 1];
    c.expect(decaying, "standard fidelity nonincreasing in heralding probability");

    const auto& ex = *r.curve(Scheme::extended);
    const Curve fe = metric_curve(ex, &HeraldMetrics::fidelity);
    double worst = INFINITY;
    double best_upper = -INFINITY;
    const double lo = std::max(fs.x.front(), fe.x.front());
    const double hi = std::min(fs.x.back(), fe.x.back());
    const double mid = 0.5 * (lo + hi);
    auto compare = [&](double p) {
        const auto a = interp_loglog(fe, p);
        const auto b = interp_loglog(fs, p);
        if (!a || !b) return;
        worst = std::min(worst, *a - *b);
        if (p >= mid) best_upper = std::max(best_upper, *a - *b);
    };
    for (double p : fs.x) compare(p);
    for (double p : fe.x) compare(p);
    c.expect(worst >= 0.0, "extended - standard fidelity at every sampled p_herald >= 0 (min " + fmt(worst) + ")");
    c.expect(best_upper > 0.01, "max improvement in upper half of p_herald range " + fmt(best_upper) + " > 0.01");
    c.expect(elapsed < 60.0, "runtime " + fmt(elapsed, "%.2f") + " s < 60 s");
}

// ---- 2: approximate fidelity ----
void criterion_2(Check& c) {
    Scenario sc = load_scenario(kScenarios + "lossless.ini");
    const SourceModel src = build_source(sc);
    const LossModel lm = sc.loss_model();
    for (Scheme s : {Scheme::unfiltered, Scheme::standard, Scheme::extended}) {
        double gap = 0.0;
        for (double nb : log_space(1e-2, 1e-1, 10)) {
            const HeraldMetrics m = evaluate_metrics(bank_for(src, s, nb), s, lm, sc.truncation.n_max);
            gap = std::max(gap, std::abs(m.fidelity_approx - m.fidelity));
        }
        c.expect(gap <= 0.01, std::string(scheme_name(s)) + ": max |sqrt(P)(1-g2/2) - F| = " + fmt(gap) + " <= 0.01");
    }
}

// ---- 3, 4, 5 share the two preset sweeps ----
struct PresetSweeps {
    SweepResult experimental;
    SweepResult lossless;
};

const PresetSweeps& preset_sweeps() {
    static const PresetSweeps s = [] {
        PresetSweeps p;
        const Scenario e = load_scenario(kScenarios + "reference.ini");
        const Scenario l = load_scenario(kScenarios + "lossless.ini");
        const SourceModel src = build_source(e);
        p.experimental = run_sweep(e, src);
        p.lossless = run_sweep(l, src);
        return p;
    }();
    return s;
}

void criterion_3(Check& c) {
    const auto& s = preset_sweeps();
    const double top = s.experimental.summary.g2_reduction_at_top;
    const double best = s.lossless.summary.g2_reduction_best;
    c.expect(top >= 0.10 && top <= 0.35, "experimental g2 reduction at top of sweep " + fmt(top) + " in [0.10, 0.35]");
    c.expect(best >= 0.75, "lossless best g2 reduction " + fmt(best) + " >= 0.75");
}

void criterion_4(Check& c) {
    const double ratio = preset_sweeps().experimental.summary.rate_ratio_at_matched_g2;
    c.expect(ratio >= 1.1, "experimental heralding-probability ratio at matched g2 " + fmt(ratio) + " >= 1.1");
}

void criterion_5(Check& c) {
    const auto& s = preset_sweeps();
    const double imp = s.experimental.summary.fitness_improvement_max;
    c.expect(imp >= 0.30 && imp <= 0.70, "experimental max relative fitness improvement " + fmt(imp) + " in [0.30, 0.70]");
    const double f = s.lossless.curve(Scheme::extended_ffwd)->front().fitness;
    c.expect(f >= 0.95, "lossless extended+ffwd fitness at n_bar=1e-2: " + fmt(f) + " >= 0.95");
}

// ---- 6: ONF ----
void criterion_6(Check& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario sc = load_scenario(kScenarios + "onf.ini");
    const SourceModel src = build_source(sc);
    const RunConfig cfg = make_run_config(sc, src);
    const EventStream stream = simulate_run(cfg);
    const auto rep = count_coincidences(stream);
    const Estimate e = onf(stream);
    const double elapsed = seconds_since(t0);
    c.expect(*sc.run.herald_probability == 0.0037 && sc.switch_spec.on_time_s == 200e-9 &&
                 sc.switch_spec.extinction_db == 20.0 && cfg.pulses == 10000000,
             "herald probability 0.0037, on-time 200 ns, 20 dB, 1e7 pulses");
    c.log << "    heralds " << rep.heralds << ", detections " << rep.detections << ", unheralded detections "
          << rep.unheralded_detections << ", n_bar " << fmt(mean_pair_number(cfg.bank)) << '\n';
    c.expect(e.value >= 0.004 && e.value <= 0.044,
             "ONF " + fmt(e.value) + " +- " + fmt(e.sigma) + " in [0.004, 0.044]");
    c.expect(elapsed < 120.0, "runtime " + fmt(elapsed, "%.2f") + " s < 120 s");
}

// ---- 7: oracle suites ----
void criterion_7(Check& c) {
    const Scenario sc = load_scenario(kScenarios + "reference.ini");
    const SourceModel src = build_source(sc);
    const auto nbars = log_space(1e-2, 0.5, 12);

    // (a) enumeration vs closed form
    {
        double worst = 0.0;  // gap minus allowance; must stay <= 0
        const DetectorModel dets[] = {{0.3, 0.0}, {1.0, 0.0}, {0.6, 1e-3}};
        for (Scheme s : {Scheme::unfiltered, Scheme::standard}) {
            for (double nb : nbars) {
                const SqueezerBank bank = bank_for(src, s, nb);
                for (const auto& d : dets) {
                    const HeraldedState st(bank, d, d, sc.truncation.n_max);
                    const double gt = std::abs(st.p_herald().value - (1.0 - closedform::noclick_closed(bank.transmitted, d)));
                    worst = std::max(worst, gt - (1e-6 + st.p_herald().tail_bound));
                    const double gr = std::abs(st.p_ext().value - closedform::noclick_closed(bank.reflected, d));
                    worst = std::max(worst, gr - (1e-6 + st.p_ext().tail_bound));
                }
            }
        }
        c.expect(worst <= 0.0, "enumeration vs closed-form click probabilities within 1e-6 + tail (n_bar <= 0.5)");
    }

    // (b) truncation 6 -> 8
    {
        double worst = 0.0;
        std::string where;
        for (const Scenario& preset : {load_scenario(kScenarios + "reference.ini"), load_scenario(kScenarios + "lossless.ini")}) {
            const LossModel lm = preset.loss_model();
            for (Scheme s : kAllSchemes) {
                for (double nb : nbars) {
                    const SqueezerBank bank = bank_for(src, s, nb);
                    const HeraldMetrics a = evaluate_metrics(bank, s, lm, 6);
                    const HeraldMetrics b = evaluate_metrics(bank, s, lm, 8);
                    const std::pair<const char*, double> diffs[] = {
                        {"p_herald", a.p_herald - b.p_herald}, {"p_ext", a.p_ext - b.p_ext},
                        {"fidelity", a.fidelity - b.fidelity}, {"g2", a.g2 - b.g2},
                        {"fidelity_approx", a.fidelity_approx - b.fidelity_approx},
                        {"p_noclick", a.p_noclick - b.p_noclick}, {"fitness", a.fitness - b.fitness}};
                    for (const auto& [name, d] : diffs) {
                        if (std::abs(d) > worst) {
                            worst = std::abs(d);
                            where = std::string(name) + ", " + std::string(scheme_name(s)) + ", " +
                                    std::string(preset_name(preset.losses.preset)) + ", n_bar " + fmt(nb, "%.3g");
                        }
                    }
                }
            }
        }
        c.expect(worst < 1e-4, "truncation N_max 6 -> 8 max metric shift " + fmt(worst) + " < 1e-4 (" + where + ")");
    }

    // (c) multimode unheralded g2
    {
        double worst = 0.0;
        for (std::size_t m = 1; m <= 10; ++m) {
            SqueezerBank bank;
            bank.transmitted.assign(m, 0.05);
            const double g = unheralded_g2(bank, 8);
            worst = std::max(worst, std::abs(g - (1.0 + 1.0 / static_cast<double>(m))) / (1.0 + 1.0 / static_cast<double>(m)));
        }
        c.expect(worst < 0.01, "unheralded g2 vs 1 + 1/M at q = 0.05, M = 1..10: max relative error " + fmt(worst));
    }

    // (d) event-stream estimator vs analytic
    {
        Scenario run = sc;
        run.run.pulses = 10000000;
        run.run.n_bar = 0.1;
        run.run.seed = 3;
        const RunConfig cfg = make_run_config(run, src);
        const auto rep = count_coincidences(simulate_run(cfg));
        const LossModel lm = run.loss_model();
        const double analytic = HeraldedState(cfg.bank, lm.herald_t, lm.herald_r, 10).g2();
        const bool ok = rep.g2_defined && std::abs(rep.g2.value - analytic) <= 3.0 * rep.g2.sigma;
        c.expect(ok, "stream g2 " + fmt(rep.g2.value) + " +- " + fmt(rep.g2.sigma) + " vs analytic " + fmt(analytic) +
                         " (1e7 pulses, n_bar 0.1, C = " + std::to_string(rep.coincidences) + ")");
    }

    // (e) post-selection equivalence
    {
        bool all = true;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            Scenario run = sc;
            run.run.pulses = 1000000;
            run.run.seed = seed;
            run.run.feed_forward = false;
            run.run.logic = HeraldLogic::standard;
            const auto post = apply_extended_postselection(simulate_run(make_run_config(run, src)));
            run.run.logic = HeraldLogic::extended;
            const auto hw = simulate_run(make_run_config(run, src));
            const auto a = count_coincidences(post), b = count_coincidences(hw);
            all = all && a.heralds == b.heralds && a.singles_1 == b.singles_1 && a.singles_2 == b.singles_2 &&
                  a.coincidences == b.coincidences && post.records == hw.records;
        }
        c.expect(all, "software extended heralding equals hardware extended (no feed-forward), seeds 1-3");
    }
}

// ---- 8: estimator arithmetic ----
void criterion_8(Check& c) {
    const double g = g2_from_counts(1, 1000, 1000, 500000).value;
    c.expect(g == 0.5, "g2_from_counts(1, 1000, 1000, 500000) = " + fmt(g, "%.17g"));
    std::mt19937_64 gen(8);
    bool identities = true;
    for (int trial = 0; trial < 2000; ++trial) {
        const std::uint64_t pulses = std::uniform_int_distribution<std::uint64_t>(1, 300)(gen);
        std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0.0, 1.0)(gen));
        EventStream s;
        s.header.pulses = pulses;
        for (std::uint64_t p = 0; p < pulses; ++p)
            for (Channel ch : {Channel::T, Channel::R, Channel::D1, Channel::D2, Channel::HERALD})
                if (coin(gen)) s.records.push_back({ch, p, static_cast<std::int64_t>(p)});
        const auto r = count_coincidences(s);
        identities = identities && r.coincidences <= std::min(r.singles_1, r.singles_2) &&
                     std::max(r.singles_1, r.singles_2) <= r.heralds;
    }
    c.expect(identities, "C <= min(S1, S2) <= max(S1, S2) <= H on 2000 fuzzed streams");
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<void(Check&)>> criteria[] = {
        {"1 fidelity curves (lossless)", criterion_1},
        {"2 approximate fidelity", criterion_2},
        {"3 g2 improvement", criterion_3},
        {"4 rate at equal g2", criterion_4},
        {"5 fitness improvement", criterion_5},
        {"6 output noise factor", criterion_6},
        {"7 oracle suites", criterion_7},
        {"8 estimator arithmetic", criterion_8},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Check c;
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::cout << c.log.str() << (c.ok ? "PASS" : "FAIL") << "  criterion " << name << '\n' << std::flush;
        failed += !c.ok;
    }
    std::cout << (8 - failed) << "/8 criteria passed\n";
    return failed == 0 ? 0 : 1;
}
