// Minimal SVG emission for the metric bar chart and the qubit-scaling line
// chart. Convenience output only; nothing parses these files.
#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace qdgen::cli {

inline std::string svg_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string metrics_bar_svg(const std::vector<std::pair<std::string, double>>& bars) {
    const double width = 420, height = 260, base = 220, left = 60;
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_number(width) +
                    "\" height=\"" + svg_number(height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int grid = 0; grid <= 100; grid += 25) {
        const double y = base - 1.8 * grid;
        s += "<line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(y) + "\" x2=\"" +
             svg_number(width - 20) + "\" y2=\"" + svg_number(y) +
             "\" stroke=\"#dddddd\"/>\n";
        s += "<text x=\"10\" y=\"" + svg_number(y + 4) + "\" font-size=\"11\">" +
             std::to_string(grid) + "%</text>\n";
    }
    const double slot = (width - left - 40) / static_cast<double>(bars.size());
    for (size_t i = 0; i < bars.size(); ++i) {
        const double x = left + slot * static_cast<double>(i) + slot * 0.2;
        const double h = 1.8 * bars[i].second;
        s += "<rect x=\"" + svg_number(x) + "\" y=\"" + svg_number(base - h) + "\" width=\"" +
             svg_number(slot * 0.6) + "\" height=\"" + svg_number(h) +
             "\" fill=\"#4477aa\"/>\n";
        s += "<text x=\"" + svg_number(x) + "\" y=\"" + svg_number(base + 16) +
             "\" font-size=\"12\">" + bars[i].first + "</text>\n";
        s += "<text x=\"" + svg_number(x) + "\" y=\"" + svg_number(base - h - 6) +
             "\" font-size=\"11\">" + svg_number(bars[i].second) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

inline std::string scaling_line_svg(const std::vector<std::pair<int, double>>& points,
                                    const std::string& y_label) {
    const double width = 420, height = 260, base = 220, left = 60;
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_number(width) +
                    "\" height=\"" + svg_number(height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"10\" y=\"20\" font-size=\"12\">" + y_label + " vs qubits</text>\n";
    for (int grid = 0; grid <= 100; grid += 25) {
        const double y = base - 1.8 * grid;
        s += "<line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(y) + "\" x2=\"" +
             svg_number(width - 20) + "\" y2=\"" + svg_number(y) + "\" stroke=\"#dddddd\"/>\n";
        s += "<text x=\"10\" y=\"" + svg_number(y + 4) + "\" font-size=\"11\">" +
             std::to_string(grid) + "%</text>\n";
    }
    if (points.empty()) return s + "</svg>\n";
    int min_q = points.front().first, max_q = points.front().first;
    for (const auto& [q, v] : points) {
        min_q = std::min(min_q, q);
        max_q = std::max(max_q, q);
    }
    const double span = max_q > min_q ? static_cast<double>(max_q - min_q) : 1.0;
    auto px = [&](int q) {
        return left + (width - left - 40) * (static_cast<double>(q - min_q) / span);
    };
    std::string poly;
    for (const auto& [q, v] : points) {
        poly += svg_number(px(q)) + "," + svg_number(base - 1.8 * v) + " ";
    }
    s += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"#aa4444\" stroke-width=\"2\"/>\n";
    for (const auto& [q, v] : points) {
        s += "<circle cx=\"" + svg_number(px(q)) + "\" cy=\"" + svg_number(base - 1.8 * v) +
             "\" r=\"3.5\" fill=\"#aa4444\"/>\n";
        s += "<text x=\"" + svg_number(px(q) - 4) + "\" y=\"" + svg_number(base + 16) +
             "\" font-size=\"12\">" + std::to_string(q) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace qdgen::cli
