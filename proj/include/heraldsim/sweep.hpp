#pragma once

// Metric sweeps over the mean pair number, curve comparisons, and CSV output.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "heraldsim/analysis.hpp"
#include "heraldsim/heralding.hpp"
#include "heraldsim/scenario.hpp"

namespace heraldsim {

struct Curve {
    std::vector<double> x;
    std::vector<double> y;
};

/// Piecewise-linear interpolation in (log x, log y). `x` must be increasing and
/// positive; returns nullopt outside [x.front(), x.back()].
inline std::optional<double> interp_loglog(const Curve& c, double x) {
    if (c.x.size() < 1 || !(x > 0.0)) return std::nullopt;
    if (x < c.x.front() || x > c.x.back()) return std::nullopt;
    auto it = std::lower_bound(c.x.begin(), c.x.end(), x);
    auto k = static_cast<std::size_t>(it - c.x.begin());
    if (c.x[k] == x) return c.y[k];
    const double x0 = std::log(c.x[k - 1]), x1 = std::log(c.x[k]);
    const double y0 = std::log(c.y[k - 1]), y1 = std::log(c.y[k]);
    const double f = (std::log(x) - x0) / (x1 - x0);
    return std::exp(y0 + f * (y1 - y0));
}

struct SweepSummary {
    /// 1 - g2_ext / g2_std at the extended curve's highest heralding probability
    /// (clipped to the range both curves cover), standard g2 interpolated there.
    double g2_reduction_at_top = std::numeric_limits<double>::quiet_NaN();
    /// Largest reduction over the extended points inside the common range.
    double g2_reduction_best = std::numeric_limits<double>::quiet_NaN();
    /// p_ext / p_std at the highest g2 both curves reach.
    double rate_ratio_at_matched_g2 = std::numeric_limits<double>::quiet_NaN();
    /// max over sweep points of (F_HS(extended+ffwd) - F_HS(standard)) / F_HS(standard).
    double fitness_improvement_max = std::numeric_limits<double>::quiet_NaN();
    double max_tail_bound = 0.0;
    bool truncation_warning = false;
};

struct SweepResult {
    std::string config_digest;
    LossPreset preset = LossPreset::experimental;
    std::vector<double> n_bar;
    std::vector<Scheme> schemes;
    /// rows[s][i]: scheme index s, sweep point i.
    std::vector<std::vector<HeraldMetrics>> rows;
    SweepSummary summary;

    const std::vector<HeraldMetrics>* curve(Scheme s) const {
        for (std::size_t k = 0; k < schemes.size(); ++k)
            if (schemes[k] == s) return &rows[k];
        return nullptr;
    }
};

/// Heralding probability -> metric curve, ordered by probability, undefined points dropped.
inline Curve metric_curve(const std::vector<HeraldMetrics>& rows, double HeraldMetrics::*field) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& m : rows) {
        const double x = m.heralding_probability();
        const double y = m.*field;
        if (x > 0.0 && std::isfinite(y) && y > 0.0) pts.emplace_back(x, y);
    }
    std::sort(pts.begin(), pts.end());
    Curve c;
    for (const auto& [x, y] : pts) {
        if (!c.x.empty() && x <= c.x.back()) continue;
        c.x.push_back(x);
        c.y.push_back(y);
    }
    return c;
}

inline double g2_reduction_at_top(const std::vector<HeraldMetrics>& standard, const std::vector<HeraldMetrics>& extended) {
    const Curve s = metric_curve(standard, &HeraldMetrics::g2);
    const Curve e = metric_curve(extended, &HeraldMetrics::g2);
    if (s.x.empty() || e.x.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double p = std::min(e.x.back(), s.x.back());
    const auto gs = interp_loglog(s, p);
    const auto ge = interp_loglog(e, p);
    if (!gs || !ge) return std::numeric_limits<double>::quiet_NaN();
    return 1.0 - *ge / *gs;
}

inline double g2_reduction_best(const std::vector<HeraldMetrics>& standard, const std::vector<HeraldMetrics>& extended) {
    const Curve s = metric_curve(standard, &HeraldMetrics::g2);
    const Curve e = metric_curve(extended, &HeraldMetrics::g2);
    double best = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < e.x.size(); ++k) {
        const auto gs = interp_loglog(s, e.x[k]);
        if (!gs) continue;
        const double r = 1.0 - e.y[k] / *gs;
        if (std::isnan(best) || r > best) best = r;
    }
    return best;
}

/// Ratio of heralding probabilities at equal g2, taken at the highest g2 both curves reach.
inline double rate_ratio_at_matched_g2(const std::vector<HeraldMetrics>& standard,
                                       const std::vector<HeraldMetrics>& extended) {
    auto inverse = [](const std::vector<HeraldMetrics>& rows) {
        Curve c = metric_curve(rows, &HeraldMetrics::g2);
        Curve inv;
        for (std::size_t k = 0; k < c.x.size(); ++k) {
            if (!inv.x.empty() && c.y[k] <= inv.x.back()) continue;  // keep g2 strictly increasing
            inv.x.push_back(c.y[k]);
            inv.y.push_back(c.x[k]);
        }
        return inv;
    };
    const Curve s = inverse(standard);
    const Curve e = inverse(extended);
    if (s.x.empty() || e.x.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double g = std::min(s.x.back(), e.x.back());
    const auto ps = interp_loglog(s, g);
    const auto pe = interp_loglog(e, g);
    if (!ps || !pe) return std::numeric_limits<double>::quiet_NaN();
    return *pe / *ps;
}

inline double fitness_improvement_max(const std::vector<HeraldMetrics>& standard,
                                      const std::vector<HeraldMetrics>& ffwd) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < std::min(standard.size(), ffwd.size()); ++i) {
        const double r = (ffwd[i].fitness - standard[i].fitness) / standard[i].fitness;
        if (std::isfinite(r) && (std::isnan(best) || r > best)) best = r;
    }
    return best;
}

inline SweepSummary summarize(const SweepResult& r) {
    SweepSummary s;
    const auto* st = r.curve(Scheme::standard);
    const auto* ex = r.curve(Scheme::extended);
    const auto* ff = r.curve(Scheme::extended_ffwd);
    if (st && ex) {
        s.g2_reduction_at_top = g2_reduction_at_top(*st, *ex);
        s.g2_reduction_best = g2_reduction_best(*st, *ex);
        s.rate_ratio_at_matched_g2 = rate_ratio_at_matched_g2(*st, *ex);
    }
    if (st && ff) s.fitness_improvement_max = fitness_improvement_max(*st, *ff);
    for (const auto& rows : r.rows)
        for (const auto& m : rows) {
            s.max_tail_bound = std::max(s.max_tail_bound, m.tail_bound);
            s.truncation_warning = s.truncation_warning || m.truncation_warning;
        }
    return s;
}

/// Evaluates every (scheme, n_bar) point. Points run on worker threads; the
/// result layout depends only on the sweep order.
inline SweepResult run_sweep(const Scenario& sc, const SourceModel& source, unsigned threads = 0) {
    SweepResult r;
    r.config_digest = sc.digest();
    r.preset = sc.losses.preset;
    r.n_bar = sc.sweep.values(sc.losses.preset);
    r.schemes = sc.sweep.schemes;
    r.rows.assign(r.schemes.size(), std::vector<HeraldMetrics>(r.n_bar.size()));
    const LossModel losses = sc.loss_model();

    const std::size_t jobs = r.schemes.size() * r.n_bar.size();
    unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs));
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](unsigned w) {
        try {
            for (std::size_t j = w; j < jobs; j += workers) {
                const std::size_t s = j / r.n_bar.size();
                const std::size_t i = j % r.n_bar.size();
                const SqueezerBank bank = bank_for(source, r.schemes[s], r.n_bar[i]);
                r.rows[s][i] = evaluate_metrics(bank, r.schemes[s], losses, sc.truncation.n_max);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    r.summary = summarize(r);
    return r;
}

inline constexpr std::string_view kSweepColumns =
    "B,n_bar,p_herald,p_ext,fidelity,purity,g2,fidelity_approx,p_noclick,fitness,mode_count,n_max,scheme";

inline void write_sweep_csv(const SweepResult& r, std::ostream& os) {
    auto num = [&](double v) { detail::put_number(os, v); };
    os << "# config_digest=" << r.config_digest << '\n' << "# preset=" << preset_name(r.preset) << '\n';
    os << kSweepColumns << '\n';
    for (std::size_t s = 0; s < r.schemes.size(); ++s) {
        for (const auto& m : r.rows[s]) {
            num(m.B);
            for (double v : {m.n_bar, m.p_herald, m.p_ext, m.fidelity, m.purity, m.g2, m.fidelity_approx, m.p_noclick,
                             m.fitness}) {
                os << ',';
                num(v);
            }
            os << ',' << m.mode_count << ',' << m.n_max << ',' << scheme_name(m.scheme) << '\n';
        }
    }
    const auto& y = r.summary;
    os << "# summary\n# g2_reduction_at_top=";
    num(y.g2_reduction_at_top);
    os << "\n# g2_reduction_best=";
    num(y.g2_reduction_best);
    os << "\n# rate_ratio_at_matched_g2=";
    num(y.rate_ratio_at_matched_g2);
    os << "\n# fitness_improvement_max=";
    num(y.fitness_improvement_max);
    os << "\n# max_tail_bound=";
    num(y.max_tail_bound);
    os << "\n# truncation_warning=" << (y.truncation_warning ? "true" : "false") << '\n';
}

}  // namespace heraldsim
