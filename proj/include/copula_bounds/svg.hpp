// Minimal SVG line charts: axes, ticks, polylines and a legend.  Just enough to
// plot bound curves deterministically without a plotting dependency.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "copula_bounds/common.hpp"

namespace copula_bounds {

struct ChartSeries {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace detail

// Writes one line chart.  Non-finite samples are skipped; every series label
// appears in the legend.  The root element carries data-series with the series
// count and each curve is a polyline of class "series".
inline void write_svg_chart(std::ostream& os, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<ChartSeries>& series) {
    if (series.empty()) throw invalid_input("svg chart: no series");
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
    bool seen = false;
    for (const auto& s : series) {
        if (s.xs.size() != s.ys.size())
            throw invalid_input("svg chart: series '" + s.label + "' has mismatched lengths");
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
            if (!seen) {
                x_lo = x_hi = s.xs[i];
                y_lo = y_hi = s.ys[i];
                seen = true;
            }
            x_lo = std::min(x_lo, s.xs[i]);
            x_hi = std::max(x_hi, s.xs[i]);
            y_lo = std::min(y_lo, s.ys[i]);
            y_hi = std::max(y_hi, s.ys[i]);
        }
    }
    if (!seen) throw invalid_input("svg chart: no finite samples");
    if (x_hi - x_lo <= 0) x_hi = x_lo + 1;
    if (y_hi - y_lo <= 0) y_hi = y_lo + 1;
    const double x_pad = 0.04 * (x_hi - x_lo), y_pad = 0.04 * (y_hi - y_lo);
    x_lo -= x_pad;
    x_hi += x_pad;
    y_lo -= y_pad;
    y_hi += y_pad;

    const double width = 720, height = 480;
    const double left = 72, right = width - 24, top = 40, bottom = height - 48;
    auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (right - left); };
    auto py = [&](double y) { return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top); };

    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                     "#555555", "#9467bd", "#8c564b"};
    constexpr int kPaletteSize = 7;

    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
          "viewBox=\"0 0 720 480\" data-series=\""
       << series.size() << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"720\" height=\"480\" fill=\"white\"/>\n";
    os << "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"16\">"
       << detail::xml_escape(title) << "</text>\n";

    // axes with five ticks per side
    os << "<g stroke=\"black\" stroke-width=\"1\">\n";
    os << "<line x1=\"" << detail::fmt("%.2f", left) << "\" y1=\"" << detail::fmt("%.2f", bottom)
       << "\" x2=\"" << detail::fmt("%.2f", right) << "\" y2=\"" << detail::fmt("%.2f", bottom)
       << "\"/>\n";
    os << "<line x1=\"" << detail::fmt("%.2f", left) << "\" y1=\"" << detail::fmt("%.2f", top)
       << "\" x2=\"" << detail::fmt("%.2f", left) << "\" y2=\"" << detail::fmt("%.2f", bottom)
       << "\"/>\n";
    os << "</g>\n";
    os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x_lo + (x_hi - x_lo) * t / 4.0;
        const double fy = y_lo + (y_hi - y_lo) * t / 4.0;
        os << "<line x1=\"" << detail::fmt("%.2f", px(fx)) << "\" y1=\""
           << detail::fmt("%.2f", bottom) << "\" x2=\"" << detail::fmt("%.2f", px(fx))
           << "\" y2=\"" << detail::fmt("%.2f", bottom + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << detail::fmt("%.2f", px(fx)) << "\" y=\""
           << detail::fmt("%.2f", bottom + 18) << "\" text-anchor=\"middle\">"
           << detail::fmt("%.6g", fx) << "</text>\n";
        os << "<line x1=\"" << detail::fmt("%.2f", left - 5) << "\" y1=\""
           << detail::fmt("%.2f", py(fy)) << "\" x2=\"" << detail::fmt("%.2f", left) << "\" y2=\""
           << detail::fmt("%.2f", py(fy)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << detail::fmt("%.2f", left - 8) << "\" y=\""
           << detail::fmt("%.2f", py(fy) + 4) << "\" text-anchor=\"end\">"
           << detail::fmt("%.6g", fy) << "</text>\n";
    }
    os << "<text x=\"" << detail::fmt("%.2f", (left + right) / 2) << "\" y=\""
       << detail::fmt("%.2f", height - 10) << "\" text-anchor=\"middle\">"
       << detail::xml_escape(x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << detail::fmt("%.2f", (top + bottom) / 2)
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << detail::fmt("%.2f", (top + bottom) / 2) << ")\">" << detail::xml_escape(y_label)
       << "</text>\n";
    os << "</g>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        os << "<polyline class=\"series\" fill=\"none\" stroke=\""
           << kPalette[k % kPaletteSize] << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < series[k].xs.size(); ++i) {
            if (!std::isfinite(series[k].xs[i]) || !std::isfinite(series[k].ys[i])) continue;
            if (!first) os << ' ';
            os << detail::fmt("%.2f", px(series[k].xs[i])) << ','
               << detail::fmt("%.2f", py(series[k].ys[i]));
            first = false;
        }
        os << "\"/>\n";
    }

    os << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double ly = top + 8 + 18 * static_cast<double>(k);
        os << "<line x1=\"" << detail::fmt("%.2f", right - 150) << "\" y1=\""
           << detail::fmt("%.2f", ly) << "\" x2=\"" << detail::fmt("%.2f", right - 126)
           << "\" y2=\"" << detail::fmt("%.2f", ly) << "\" stroke=\""
           << kPalette[k % kPaletteSize] << "\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << detail::fmt("%.2f", right - 120) << "\" y=\""
           << detail::fmt("%.2f", ly + 4) << "\">" << detail::xml_escape(series[k].label)
           << "</text>\n";
    }
    os << "</g>\n</svg>\n";
}

}  // namespace copula_bounds
