#pragma once

// Static SVG line charts with a logarithmic x axis.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace heraldsim::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    bool log_y = false;
};

namespace detail {

inline std::string fmt(double v, const char* format = "%.4g") {
    char buf[32];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') {
            out += "&lt;";
        } else if (c == '>') {
            out += "&gt;";
        } else if (c == '&') {
            out += "&amp;";
        } else {
            out += c;
        }
    }
    return out;
}

inline constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace detail

inline void write_chart(const Chart& c, std::ostream& os) {
    const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 55;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto usable = [&](double x, double y) { return x > 0.0 && std::isfinite(y) && (!c.log_y || y > 0.0); };
    for (const auto& s : c.series)
        for (std::size_t k = 0; k < s.x.size(); ++k)
            if (usable(s.x[k], s.y[k])) {
                x0 = std::min(x0, std::log10(s.x[k]));
                x1 = std::max(x1, std::log10(s.x[k]));
                const double y = c.log_y ? std::log10(s.y[k]) : s.y[k];
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    if (!(x1 >= x0)) x0 = 0, x1 = 1;
    if (!(y1 >= y0)) y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (std::log10(x) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) {
        const double v = c.log_y ? std::log10(y) : y;
        return H - B - (v - y0) / (y1 - y0) * (H - T - B);
    };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape(c.title) << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(std::ceil(x0)); e <= static_cast<int>(std::floor(x1)); ++e) {
        const double x = px(std::pow(10.0, e));
        os << "<line x1=\"" << x << "\" y1=\"" << H - B << "\" x2=\"" << x << "\" y2=\"" << H - B + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double v = y0 + (y1 - y0) * k / 4.0;
        const double y = H - B - (v - y0) / (y1 - y0) * (H - T - B);
        os << "<line x1=\"" << L - 5 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << L - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
           << detail::fmt(c.log_y ? std::pow(10.0, v) : v, "%.3g") << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << detail::escape(c.x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2
       << ")\">" << detail::escape(c.y_label) << "</text>\n";
    for (std::size_t i = 0; i < c.series.size(); ++i) {
        const auto& s = c.series[i];
        const char* color = detail::kColors[i % 5];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        bool first = true;
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!usable(s.x[k], s.y[k])) continue;
            os << (first ? "" : " ") << detail::fmt(px(s.x[k]), "%.2f") << ',' << detail::fmt(py(s.y[k]), "%.2f");
            first = false;
        }
        os << "\"/>\n";
        const double ly = T + 16 + 18.0 * static_cast<double>(i);
        os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << detail::escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace heraldsim::svg
