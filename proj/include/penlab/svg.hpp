#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "penlab/errors.hpp"

namespace penlab {

/// One named polyline of a plot.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

/// Minimal deterministic SVG line plot: fixed canvas, linear axes fitted
/// to the data, one polyline per series with a small legend. CSV remains
/// the source of truth; these files exist for quick visual inspection.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::vector<PlotSeries>& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");

    double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
    bool first = true;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            if (first) {
                x_lo = x_hi = x;
                y_lo = y_hi = y;
                first = false;
            }
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= y_lo) y_hi = y_lo + 1.0;

    const double W = 640.0, H = 420.0, ml = 60.0, mr = 20.0, mt = 40.0, mb = 40.0;
    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        return std::string(buf);
    };

    static const char* palette[] = {"#1f6fb2", "#c23b22", "#3a873a", "#8a5fb0",
                                    "#b8860b", "#2f8f8f"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W)
        << "\" height=\"" << num(H) << "\" viewBox=\"0 0 " << num(W) << " " << num(H)
        << "\">\n";
    out << "<rect width=\"" << num(W) << "\" height=\"" << num(H)
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << num(W / 2.0) << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"monospace\" font-size=\"14\">" << title << "</text>\n";
    out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\""
        << num(W - ml - mr) << "\" height=\"" << num(H - mt - mb)
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << num(ml) << "\" y=\"" << num(H - 8.0)
        << "\" font-family=\"monospace\" font-size=\"11\">" << num(x_lo) << "</text>\n";
    out << "<text x=\"" << num(W - mr) << "\" y=\"" << num(H - 8.0)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << num(x_hi) << "</text>\n";
    out << "<text x=\"" << num(ml - 6.0) << "\" y=\"" << num(H - mb)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << num(y_lo) << "</text>\n";
    out << "<text x=\"" << num(ml - 6.0) << "\" y=\"" << num(mt + 10.0)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << num(y_hi) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : series[s].points)
            out << num(px(x)) << ',' << num(py(y)) << ' ';
        out << "\"/>\n";
        double ly = mt + 16.0 + 16.0 * static_cast<double>(s);
        out << "<line x1=\"" << num(ml + 10.0) << "\" y1=\"" << num(ly) << "\" x2=\""
            << num(ml + 34.0) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << num(ml + 40.0) << "\" y=\"" << num(ly + 4.0)
            << "\" font-family=\"monospace\" font-size=\"11\">" << series[s].label
            << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace penlab
