#pragma once

#include "navmem/run/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace navmem::run {

// Minimal SVG emission: enough for the scatter / bar figures the plot
// command produces. Every figure also gets a TSV twin carrying the same
// numbers at full precision.

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
    std::string label;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string svg_header(int w, int h, const std::string& title) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    return os.str();
}

}  // namespace detail

inline void write_tsv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write data file: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "\t" : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "\t" : "") << row[i];
        os << "\n";
    }
}

inline void write_scatter_svg(const std::string& path, const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<PlotPoint>& points) {
    const int w = 560, h = 420, m = 60;
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (!points.empty()) {
        xmin = xmax = points[0].x;
        ymin = ymax = points[0].y;
        for (const auto& p : points) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    }
    if (xmax - xmin < 1e-12) { xmax += 1.0; xmin -= 1.0; }
    if (ymax - ymin < 1e-12) { ymax += 1.0; ymin -= 1.0; }
    auto sx = [&](double x) { return m + (x - xmin) / (xmax - xmin) * (w - 2 * m); };
    auto sy = [&](double y) { return h - m - (y - ymin) / (ymax - ymin) * (h - 2 * m); };

    std::ostringstream os;
    os << detail::svg_header(w, h, title);
    os << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\"" << h - m
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label
       << "</text>\n";
    os << "<text x=\"18\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 18 " << h / 2 << ")\">"
       << y_label << "</text>\n";
    for (const auto& p : points) {
        os << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\"5\" fill=\"steelblue\"/>\n";
        os << "<text x=\"" << sx(p.x) + 8 << "\" y=\"" << sy(p.y) - 6 << "\" font-size=\"10\">" << p.label
           << "</text>\n";
    }
    os << "</svg>\n";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write figure: " + path);
    f << os.str();
}

inline void write_bars_svg(const std::string& path, const std::string& title, const std::string& y_label,
                           const std::vector<PlotPoint>& bars) {
    const int w = 560, h = 420, m = 60;
    double ymax = 1.0;
    for (const auto& b : bars) ymax = std::max(ymax, b.y);
    int n = static_cast<int>(bars.size());
    double bar_w = n > 0 ? static_cast<double>(w - 2 * m) / n : 1.0;

    std::ostringstream os;
    os << detail::svg_header(w, h, title);
    os << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\"" << h - m
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"18\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 18 " << h / 2 << ")\">"
       << y_label << "</text>\n";
    for (int i = 0; i < n; ++i) {
        double bh = bars[static_cast<std::size_t>(i)].y / ymax * (h - 2 * m);
        double x0 = m + i * bar_w + bar_w * 0.15;
        os << "<rect x=\"" << x0 << "\" y=\"" << h - m - bh << "\" width=\"" << bar_w * 0.7 << "\" height=\"" << bh
           << "\" fill=\"darkseagreen\" stroke=\"black\"/>\n";
        os << "<text x=\"" << m + (i + 0.5) * bar_w << "\" y=\"" << h - m + 16
           << "\" text-anchor=\"middle\" font-size=\"10\">" << bars[static_cast<std::size_t>(i)].label << "</text>\n";
        os << "<text x=\"" << m + (i + 0.5) * bar_w << "\" y=\"" << h - m - bh - 6
           << "\" text-anchor=\"middle\" font-size=\"10\">" << detail::fmt(bars[static_cast<std::size_t>(i)].y)
           << "</text>\n";
    }
    os << "</svg>\n";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write figure: " + path);
    f << os.str();
}

}  // namespace navmem::run
