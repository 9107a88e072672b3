#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "hrcplan/experiment.hpp"

namespace hrcplan {

/// Square density grid of (actual, predicted) pairs over [0,1]^2.
struct DensityGrid {
    int bins = 20;
    std::vector<std::size_t> counts;  // row = predicted bin, col = actual bin

    std::size_t at(int predicted_bin, int actual_bin) const {
        return counts[static_cast<std::size_t>(predicted_bin * bins + actual_bin)];
    }
};

inline DensityGrid density_grid(const std::vector<PredictionPair>& pairs, int bins = 20) {
    DensityGrid g;
    g.bins = bins;
    g.counts.assign(static_cast<std::size_t>(bins * bins), 0);
    auto bin = [bins](double v) { return std::clamp(static_cast<int>(v * bins), 0, bins - 1); };
    for (const auto& p : pairs) ++g.counts[static_cast<std::size_t>(bin(p.predicted) * bins + bin(p.actual))];
    return g;
}

inline std::vector<PredictionPair> parse_predictions(const std::string& text) {
    std::vector<PredictionPair> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto c = detail::split_csv(line);
        if (c.size() == 2) out.push_back({std::stod(c[0]), std::stod(c[1])});
    }
    return out;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1"};
    return colors[i % 7];
}

}  // namespace detail

/// Grouped bar chart: one group per plateau value, one bar per policy (fraction of ticks).
inline std::string histogram_svg(const std::vector<ResultRow>& rows) {
    std::vector<double> values;
    for (const auto& r : rows)
        for (const auto& [s, n] : r.histogram)
            if (std::find(values.begin(), values.end(), s) == values.end()) values.push_back(s);
    std::sort(values.begin(), values.end());
    const double w = 640, h = 320, left = 50, bottom = 40, top = 30;
    const double group = (w - left - 20) / std::max<std::size_t>(1, values.size());
    const double bar = group * 0.8 / std::max<std::size_t>(1, rows.size());
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"320\">\n";
    svg += "<rect width=\"640\" height=\"320\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">speed scaling distribution</text>\n";
    const double plot_h = h - bottom - top;
    for (std::size_t p = 0; p < rows.size(); ++p) {
        std::size_t total = 0;
        for (const auto& [s, n] : rows[p].histogram) total += n;
        for (std::size_t v = 0; v < values.size(); ++v) {
            const auto it = rows[p].histogram.find(values[v]);
            const double frac = total && it != rows[p].histogram.end() ? static_cast<double>(it->second) / total : 0.0;
            const double x = left + group * v + group * 0.1 + bar * p;
            const double bh = frac * plot_h;
            svg += "<rect x=\"" + detail::fmt("%.1f", x) + "\" y=\"" + detail::fmt("%.1f", h - bottom - bh) +
                   "\" width=\"" + detail::fmt("%.1f", bar) + "\" height=\"" + detail::fmt("%.1f", bh) +
                   "\" fill=\"" + detail::palette(p) + "\"/>\n";
        }
        svg += "<text x=\"" + detail::fmt("%.0f", w - 150) + "\" y=\"" + detail::fmt("%.0f", top + 14 * (p + 1)) +
               "\" font-size=\"12\" fill=\"" + detail::palette(p) + "\">" + rows[p].policy + "</text>\n";
    }
    for (std::size_t v = 0; v < values.size(); ++v)
        svg += "<text x=\"" + detail::fmt("%.1f", left + group * (v + 0.5)) + "\" y=\"" +
               detail::fmt("%.0f", h - bottom + 18) + "\" text-anchor=\"middle\" font-size=\"12\">s=" +
               detail::fmt("%.3g", values[v]) + "</text>\n";
    svg += "<line x1=\"" + detail::fmt("%.0f", left) + "\" y1=\"" + detail::fmt("%.0f", h - bottom) + "\" x2=\"" +
           detail::fmt("%.0f", w - 20) + "\" y2=\"" + detail::fmt("%.0f", h - bottom) + "\" stroke=\"black\"/>\n";
    svg += "</svg>\n";
    return svg;
}

/// Heatmap of actual (x) vs predicted (y) average scaling.
inline std::string density_svg(const DensityGrid& g) {
    std::size_t peak = 1;
    for (auto c : g.counts) peak = std::max(peak, c);
    const double cell = 300.0 / g.bins;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"360\">\n";
    svg += "<rect width=\"360\" height=\"360\" fill=\"white\"/>\n";
    for (int r = 0; r < g.bins; ++r)
        for (int c = 0; c < g.bins; ++c) {
            const std::size_t n = g.at(r, c);
            if (n == 0) continue;
            const double t = std::log1p(static_cast<double>(n)) / std::log1p(static_cast<double>(peak));
            const int shade = static_cast<int>(255.0 * (1.0 - t));
            char color[16];
            std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
            svg += "<rect x=\"" + detail::fmt("%.2f", 40 + c * cell) + "\" y=\"" +
                   detail::fmt("%.2f", 330 - (r + 1) * cell) + "\" width=\"" + detail::fmt("%.2f", cell) +
                   "\" height=\"" + detail::fmt("%.2f", cell) + "\" fill=\"" + color + "\"/>\n";
        }
    svg += "<line x1=\"40\" y1=\"330\" x2=\"340\" y2=\"30\" stroke=\"red\" stroke-dasharray=\"4\"/>\n";
    svg += "<rect x=\"40\" y=\"30\" width=\"300\" height=\"300\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<text x=\"190\" y=\"352\" text-anchor=\"middle\" font-size=\"12\">actual average scaling</text>\n";
    svg += "<text x=\"14\" y=\"180\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 180)\">"
           "predicted</text>\n";
    svg += "</svg>\n";
    return svg;
}

/// Writes report.md, histogram.svg and (when a model directory is given)
/// density.csv / density.svg into `out`. Output depends only on the input files.
inline std::vector<std::string> write_report(const std::vector<fs::path>& result_dirs, const fs::path& model_dir,
                                             const fs::path& out) {
    std::vector<ResultRow> rows;
    for (const auto& d : result_dirs) {
        auto part = load_results(d);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) throw Error("empty results");
    ensure_dir(out);
    std::vector<std::string> files;

    std::string md = "# Policy comparison\n\n";
    md += "| policy | tasks | exec. time [s] | std [s] | mean scaling |\n|---|---|---|---|---|\n";
    for (const auto& r : rows)
        md += "| " + r.policy + " | " + std::to_string(r.tasks) + " | " + detail::fmt("%.2f", r.mean_exec_time) +
              " | " + detail::fmt("%.2f", r.std_exec_time) + " | " + detail::fmt("%.3f", r.mean_scaling) + " |\n";

    md += "\n# Scaling histogram (fraction of ticks)\n\n| policy |";
    std::vector<double> values;
    for (const auto& r : rows)
        for (const auto& [s, n] : r.histogram)
            if (std::find(values.begin(), values.end(), s) == values.end()) values.push_back(s);
    std::sort(values.begin(), values.end());
    for (double v : values) md += " s=" + detail::fmt("%.3g", v) + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < values.size(); ++i) md += "---|";
    md += "\n";
    for (const auto& r : rows) {
        md += "| " + r.policy + " |";
        for (double v : values) md += " " + detail::fmt("%.3f", histogram_mass(r, {v})) + " |";
        md += "\n";
    }
    write_text_file((out / "histogram.svg").string(), histogram_svg(rows));
    files.emplace_back("histogram.svg");
    md += "\n![scaling histogram](histogram.svg)\n";

    if (!model_dir.empty()) {
        const auto pairs = parse_predictions(read_text_file((model_dir / "predictions.csv").string()));
        const auto grid = density_grid(pairs);
        std::string csv = "predicted_bin,actual_bin,count\n";
        for (int r = 0; r < grid.bins; ++r)
            for (int c = 0; c < grid.bins; ++c)
                csv += std::to_string(r) + "," + std::to_string(c) + "," + std::to_string(grid.at(r, c)) + "\n";
        write_text_file((out / "density.csv").string(), csv);
        write_text_file((out / "density.svg").string(), density_svg(grid));
        files.emplace_back("density.csv");
        files.emplace_back("density.svg");
        double sse = 0.0;
        for (const auto& p : pairs) sse += (p.actual - p.predicted) * (p.actual - p.predicted);
        md += "\n# Actual vs predicted (test rows)\n\n";
        md += "test MSE: " + detail::fmt("%.5f", pairs.empty() ? 0.0 : sse / pairs.size()) + " over " +
              std::to_string(pairs.size()) + " windows\n\n![density](density.svg)\n";
    }
    write_text_file((out / "report.md").string(), md);
    files.emplace_back("report.md");
    write_text_file((out / "table.csv").string(), format_table(rows));
    files.emplace_back("table.csv");
    return files;
}

}  // namespace hrcplan
