#pragma once

// Joint spectral amplitude of the pair source, its Schmidt decomposition, and
// the split of the heralding (signal) arm into filter-transmitted and
// filter-reflected parts.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heraldsim/errors.hpp"
#include "heraldsim/numeric.hpp"

namespace heraldsim {

/// Bin-center detunings (rad/s) from the signal and idler center frequencies.
struct FrequencyGrid {
    std::vector<double> signal_offsets;
    std::vector<double> idler_offsets;

    static constexpr std::size_t kMinBins = 16;

    /// `bins` uniformly spaced centers on [-half_span, half_span] for both axes.
    static FrequencyGrid uniform(std::size_t bins, double half_span) {
        if (bins < kMinBins) throw ConfigError("grid needs at least 16 bins", "grid.bins");
        if (!(half_span > 0.0) || !std::isfinite(half_span))
            throw ConfigError("grid half span must be positive", "grid.half_span");
        FrequencyGrid g;
        g.signal_offsets.resize(bins);
        const double step = 2.0 * half_span / static_cast<double>(bins - 1);
        for (std::size_t i = 0; i < bins; ++i)
            g.signal_offsets[i] = -half_span + step * static_cast<double>(i);
        g.idler_offsets = g.signal_offsets;
        return g;
    }

    std::size_t signal_bins() const { return signal_offsets.size(); }
    std::size_t idler_bins() const { return idler_offsets.size(); }
    double signal_step() const { return signal_offsets[1] - signal_offsets[0]; }
    double idler_step() const { return idler_offsets[1] - idler_offsets[0]; }
    double cell_area() const { return signal_step() * idler_step(); }

    void validate() const {
        check_axis(signal_offsets, "grid.signal_offsets");
        check_axis(idler_offsets, "grid.idler_offsets");
    }

private:
    static void check_axis(const std::vector<double>& axis, const char* key) {
        if (axis.size() < kMinBins) throw ConfigError("axis needs at least 16 bins", key);
        const double step = axis[1] - axis[0];
        if (!(step > 0.0)) throw ConfigError("axis must be strictly increasing", key);
        for (std::size_t i = 1; i < axis.size(); ++i) {
            const double d = axis[i] - axis[i - 1];
            if (!std::isfinite(axis[i]) || !(d > 0.0))
                throw ConfigError("axis must be strictly increasing", key);
            if (std::abs(d - step) > 1e-9 * step) throw ConfigError("axis spacing is not uniform", key);
        }
    }
};

enum class PumpShape { gaussian };

struct PumpSpec {
    double center_wavelength_nm = 777.24;
    /// Standard deviation of the Gaussian amplitude along the sum detuning, in Hz.
    double spectral_width_hz = 1.0e11;
    PumpShape shape = PumpShape::gaussian;

    void validate() const {
        if (!(center_wavelength_nm > 0.0) || !std::isfinite(center_wavelength_nm))
            throw ConfigError("must be positive", "pump.center_wavelength_nm");
        if (!(spectral_width_hz > 0.0) || !std::isfinite(spectral_width_hz))
            throw ConfigError("must be positive", "pump.spectral_width_hz");
    }

    double angular_width() const { return kTwoPi * spectral_width_hz; }

    /// Envelope as a function of the summed detuning omega_s + omega_i (rad/s).
    double envelope(double sum_detuning) const {
        const double x = sum_detuning / angular_width();
        return std::exp(-0.5 * x * x);
    }
};

/// Uniform square grid sized in units of the pump's angular width.
struct GridSpec {
    std::size_t bins = 512;
    double half_span_widths = 12.0;

    FrequencyGrid build(const PumpSpec& pump) const {
        pump.validate();
        if (!(half_span_widths > 0.0) || !std::isfinite(half_span_widths))
            throw ConfigError("must be positive", "grid.half_span_widths");
        return FrequencyGrid::uniform(bins, half_span_widths * pump.angular_width());
    }
};

/// sinc(tau * (omega_s - slope * omega_i) / 2). The ridge is the line
/// omega_s = slope * omega_i; slope 0 makes the function depend on omega_s only.
struct PhaseMatchSpec {
    double inverse_width_s = 4.0e-13;
    double ridge_slope = 1.0;

    void validate() const {
        if (!(inverse_width_s > 0.0) || !std::isfinite(inverse_width_s))
            throw ConfigError("must be positive", "phase_matching.inverse_width_s");
        if (!std::isfinite(ridge_slope)) throw ConfigError("must be finite", "phase_matching.ridge_slope");
    }

    double evaluate(double signal, double idler) const {
        const double x = 0.5 * inverse_width_s * (signal - ridge_slope * idler);
        if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
        return std::sin(x) / x;
    }
};

struct JsaMatrix {
    FrequencyGrid grid;
    /// Rows are signal bins, columns idler bins.
    Eigen::MatrixXcd amplitudes;
    /// Sum of |amplitude|^2 times the grid cell area.
    double norm = 0.0;

    /// Amplitudes scaled so the Frobenius norm squared equals `norm`.
    Eigen::MatrixXcd discrete() const { return amplitudes * std::sqrt(grid.cell_area()); }
};

namespace detail {

inline double jsa_norm(const Eigen::MatrixXcd& a, double cell_area) {
    CompensatedSum s;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) s.add(std::norm(a(i, j)));
    return s.value() * cell_area;
}

/// Singular values of `m`, skipping all-zero rows (they do not change the
/// spectrum). Sorted nonincreasing; entries below `floor` are dropped.
inline std::vector<double> singular_values(const Eigen::MatrixXcd& m, double floor) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (m.row(i).squaredNorm() > 0.0) rows.push_back(i);
    if (rows.empty()) return {};
    Eigen::MatrixXcd packed(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) packed.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(packed);
    const Eigen::VectorXd& sv = svd.singularValues();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(sv.size()));
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) >= floor) out.push_back(sv(k));
    // BDCSVD already sorts; a stable sort keeps ties in index order regardless.
    std::stable_sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace detail

/// Coefficients below this value are treated as numerical noise.
inline constexpr double kSchmidtFloor = 1e-8;
inline constexpr double kDiscardWarning = 1e-3;

struct SchmidtSpectrum {
    std::vector<double> coefficients;
    /// Parent weight minus the weight kept in `coefficients`.
    double discarded_weight = 0.0;
    bool truncation_warning = false;

    double weight() const {
        CompensatedSum s;
        for (double l : coefficients) s.add(l * l);
        return s.value();
    }

    /// (sum l^2)^2 / sum l^4.
    double schmidt_number() const {
        double s2 = 0.0, s4 = 0.0;
        for (double l : coefficients) {
            s2 += l * l;
            s4 += l * l * l * l;
        }
        return s4 > 0.0 ? s2 * s2 / s4 : 0.0;
    }
};

struct FilteredSchmidt {
    std::vector<double> transmitted;
    std::vector<double> reflected;
    /// Weight of both parts not captured by the truncated coefficient lists.
    double discarded_weight = 0.0;

    double transmitted_weight() const {
        CompensatedSum s;
        for (double l : transmitted) s.add(l * l);
        return s.value();
    }
    double reflected_weight() const {
        CompensatedSum s;
        for (double l : reflected) s.add(l * l);
        return s.value();
    }
};

enum class FilterShape { rectangular };

/// Heralding-arm filter acting on the signal axis. Center and width in rad/s.
struct FilterSpec {
    double center = 0.0;
    double width = kTwoPi * 50e9;
    FilterShape shape = FilterShape::rectangular;

    void validate() const {
        if (!(width >= 0.0) || std::isnan(width)) throw ConfigError("must be nonnegative", "filter.width_hz");
        if (!std::isfinite(center)) throw ConfigError("must be finite", "filter.center_hz");
    }

    /// Rectangular membership decided by the bin center; a zero-width filter passes nothing.
    bool passes(double signal_offset) const { return std::abs(signal_offset - center) < 0.5 * width; }
};

/// Samples `amplitude(omega_s, omega_i)` on the grid and normalizes to unit norm.
template <class AmplitudeFn>
JsaMatrix build_jsa_from(const FrequencyGrid& grid, AmplitudeFn&& amplitude) {
    grid.validate();
    JsaMatrix jsa;
    jsa.grid = grid;
    const auto ns = static_cast<Eigen::Index>(grid.signal_bins());
    const auto ni = static_cast<Eigen::Index>(grid.idler_bins());
    jsa.amplitudes.resize(ns, ni);
    for (Eigen::Index j = 0; j < ni; ++j) {
        for (Eigen::Index i = 0; i < ns; ++i) {
            const std::complex<double> v = amplitude(grid.signal_offsets[static_cast<std::size_t>(i)],
                                                     grid.idler_offsets[static_cast<std::size_t>(j)]);
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw DegenerateJsaError("joint spectral amplitude is not finite on the grid");
            jsa.amplitudes(i, j) = v;
        }
    }
    const double norm = detail::jsa_norm(jsa.amplitudes, grid.cell_area());
    if (!(norm > 0.0)) throw DegenerateJsaError("joint spectral amplitude vanishes on the whole grid");
    jsa.amplitudes /= std::sqrt(norm);
    jsa.norm = detail::jsa_norm(jsa.amplitudes, grid.cell_area());
    return jsa;
}

/// Gaussian pump envelope in (omega_s + omega_i) times sinc phase matching.
inline JsaMatrix build_jsa(const PumpSpec& pump, const PhaseMatchSpec& pm, const FrequencyGrid& grid) {
    pump.validate();
    pm.validate();
    return build_jsa_from(grid, [&](double ws, double wi) {
        return std::complex<double>(pump.envelope(ws + wi) * pm.evaluate(ws, wi), 0.0);
    });
}

/// Top `max_modes` singular values of an already discretized amplitude matrix
/// whose squared Frobenius norm is the parent weight.
inline SchmidtSpectrum schmidt_decompose(const Eigen::MatrixXcd& discrete, std::size_t max_modes) {
    if (max_modes < 1) throw ConfigError("must be at least 1", "truncation.max_modes");
    const double total = discrete.squaredNorm();
    if (!(total > 0.0)) throw DegenerateJsaError("cannot decompose an all-zero amplitude matrix");
    SchmidtSpectrum out;
    out.coefficients = detail::singular_values(discrete, kSchmidtFloor);
    if (out.coefficients.size() > max_modes) out.coefficients.resize(max_modes);
    out.discarded_weight = std::max(0.0, total - out.weight());
    out.truncation_warning = out.discarded_weight > kDiscardWarning;
    return out;
}

inline SchmidtSpectrum schmidt_decompose(const JsaMatrix& jsa, std::size_t max_modes) {
    if (!(jsa.norm > 0.0)) throw DegenerateJsaError("cannot decompose an all-zero joint spectral amplitude");
    return schmidt_decompose(jsa.discrete(), max_modes);
}

/// (transmitted, reflected): rows outside/inside the filter band zeroed.
inline std::pair<JsaMatrix, JsaMatrix> partition_by_filter(const JsaMatrix& jsa, const FilterSpec& filter) {
    filter.validate();
    JsaMatrix t = jsa;
    JsaMatrix r = jsa;
    for (std::size_t i = 0; i < jsa.grid.signal_bins(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        if (filter.passes(jsa.grid.signal_offsets[i])) {
            r.amplitudes.row(row).setZero();
        } else {
            t.amplitudes.row(row).setZero();
        }
    }
    const double area = jsa.grid.cell_area();
    t.norm = detail::jsa_norm(t.amplitudes, area);
    r.norm = detail::jsa_norm(r.amplitudes, area);
    return {std::move(t), std::move(r)};
}

/// Pseudo-Schmidt coefficients of both parts, without renormalizing either.
inline FilteredSchmidt filtered_schmidt(const JsaMatrix& transmitted, const JsaMatrix& reflected,
                                        std::size_t max_modes) {
    if (max_modes < 1) throw ConfigError("must be at least 1", "truncation.max_modes");
    FilteredSchmidt fs;
    fs.transmitted = detail::singular_values(transmitted.discrete(), kSchmidtFloor);
    fs.reflected = detail::singular_values(reflected.discrete(), kSchmidtFloor);
    if (fs.transmitted.size() > max_modes) fs.transmitted.resize(max_modes);
    if (fs.reflected.size() > max_modes) fs.reflected.resize(max_modes);
    fs.discarded_weight =
        std::max(0.0, transmitted.norm + reflected.norm - fs.transmitted_weight() - fs.reflected_weight());
    return fs;
}

/// |JSA|^2 dump with offsets converted to Hz.
inline void write_jsi_csv(const JsaMatrix& jsa, std::ostream& os) {
    const auto old_precision = os.precision(12);
    os << "signal_offset_hz,idler_offset_hz,intensity\n";
    for (std::size_t i = 0; i < jsa.grid.signal_bins(); ++i) {
        for (std::size_t j = 0; j < jsa.grid.idler_bins(); ++j) {
            os << jsa.grid.signal_offsets[i] / kTwoPi << ',' << jsa.grid.idler_offsets[j] / kTwoPi << ','
               << std::norm(jsa.amplitudes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
        }
    }
    os.precision(old_precision);
}

}  // namespace heraldsim
