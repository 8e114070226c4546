#include "specdrop/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace specdrop::harness {

namespace fs = std::filesystem;

namespace {

constexpr int kW = 720, kH = 420;
constexpr int kMargin = 60;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string fmt_exact(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

}  // namespace

std::string svg_line_plot(const std::string& title, const std::vector<PlotSeries>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.xs.size(); ++i) {
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            ymin = std::min(ymin, s.ys[i]);
            ymax = std::max(ymax, s.ys[i]);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (ymax - ymin < 1e-12) {
        ymax += 1.0;
        ymin -= 1.0;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;

    auto px = [&](double x) { return kMargin + (x - xmin) / (xmax - xmin) * (kW - 2 * kMargin); };
    auto py = [&](double y) { return kH - kMargin - (y - ymin) / (ymax - ymin) * (kH - 2 * kMargin); };

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kW) + "\" height=\"" +
           std::to_string(kH) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           title + "</text>\n";
    // axes
    svg += "<line x1=\"" + std::to_string(kMargin) + "\" y1=\"" + std::to_string(kH - kMargin) +
           "\" x2=\"" + std::to_string(kW - kMargin) + "\" y2=\"" + std::to_string(kH - kMargin) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + std::to_string(kMargin) + "\" y1=\"" + std::to_string(kMargin) + "\" x2=\"" +
           std::to_string(kMargin) + "\" y2=\"" + std::to_string(kH - kMargin) + "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double xv = xmin + t * (xmax - xmin) / 4.0;
        double yv = ymin + t * (ymax - ymin) / 4.0;
        svg += "<text x=\"" + fmt(px(xv)) + "\" y=\"" + std::to_string(kH - kMargin + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + fmt(xv) + "</text>\n";
        svg += "<text x=\"" + std::to_string(kMargin - 6) + "\" y=\"" + fmt(py(yv) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" + fmt(yv) + "</text>\n";
    }
    svg += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"" + std::to_string(kH - 12) +
           "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";

    int ci = 0;
    int legend_y = kMargin;
    for (const auto& s : series) {
        const char* color = kColors[ci % 4];
        std::string pts;
        for (size_t i = 0; i < s.xs.size(); ++i)
            pts += fmt(px(s.xs[i])) + "," + fmt(py(s.ys[i])) + " ";
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
               pts + "\"/>\n";
        std::string label = s.name;
        if (s.annotate_s_bar) label += "  s_bar=" + fmt(s.s_bar);
        svg += "<text x=\"" + std::to_string(kW - kMargin - 200) + "\" y=\"" + std::to_string(legend_y) +
               "\" font-size=\"12\" fill=\"" + color + "\" data-series=\"" + s.name + "\"";
        if (s.annotate_s_bar) svg += " data-sbar=\"" + fmt_exact(s.s_bar) + "\"";
        svg += ">" + label + "</text>\n";
        legend_y += 16;
        ++ci;
    }
    svg += "</svg>\n";
    return svg;
}

std::string svg_histogram(const std::string& title, const std::vector<double>& counts, double x_max) {
    double peak = 1.0;
    for (double c : counts) peak = std::max(peak, c);
    const int n = static_cast<int>(counts.size());
    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kW) + "\" height=\"" +
           std::to_string(kH) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           title + "</text>\n";
    double bw = static_cast<double>(kW - 2 * kMargin) / n;
    for (int i = 0; i < n; ++i) {
        double h = counts[i] / peak * (kH - 2 * kMargin);
        svg += "<rect x=\"" + fmt(kMargin + i * bw) + "\" y=\"" + fmt(kH - kMargin - h) + "\" width=\"" +
               fmt(bw * 0.9) + "\" height=\"" + fmt(h) + "\" fill=\"#1f77b4\"/>\n";
    }
    svg += "<line x1=\"" + std::to_string(kMargin) + "\" y1=\"" + std::to_string(kH - kMargin) +
           "\" x2=\"" + std::to_string(kW - kMargin) + "\" y2=\"" + std::to_string(kH - kMargin) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + std::to_string(kW - kMargin) + "\" y=\"" + std::to_string(kH - kMargin + 18) +
           "\" text-anchor=\"end\" font-size=\"11\">" + fmt(x_max) + "%</text>\n";
    svg += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"" + std::to_string(kH - 12) +
           "\" text-anchor=\"middle\" font-size=\"12\">absolute percent error</text>\n";
    svg += "</svg>\n";
    return svg;
}

std::vector<std::string> report_run(const std::string& run_dir, const std::string& out_dir) {
    RunRecord rec = read_record(run_dir);
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    std::set<std::string> metrics_seen;
    for (const auto& r : rec.log) metrics_seen.insert(r.metric);

    for (const auto& metric : metrics_seen) {
        std::set<std::string> splits;
        for (const auto& r : rec.log)
            if (r.metric == metric) splits.insert(r.split);
        std::vector<PlotSeries> series;
        for (const auto& split : splits) {
            PlotSeries s;
            s.name = split;
            for (const auto& r : rec.log)
                if (r.metric == metric && r.split == split) {
                    s.xs.push_back(r.epoch);
                    s.ys.push_back(r.value);
                }
            if (s.ys.size() >= 3) {
                s.annotate_s_bar = true;
                s.s_bar = metrics::s_bar(s.ys);
            }
            series.push_back(std::move(s));
        }
        std::string path = (fs::path(out_dir) / ("curve_" + metric + ".svg")).string();
        std::ofstream f(path);
        f << svg_line_plot(metric, series);
        written.push_back(path);
    }

    if (!rec.best_eval.ape_histogram.empty()) {
        std::string path = (fs::path(out_dir) / "ape_histogram.svg").string();
        std::ofstream f(path);
        f << svg_histogram("absolute percent errors (best epoch)", rec.best_eval.ape_histogram,
                           rec.best_eval.ape_histogram_max);
        written.push_back(path);
    }

    {
        std::string path = (fs::path(out_dir) / "metrics.csv").string();
        std::ofstream f(path);
        f << log_to_csv(rec.log);
        written.push_back(path);
    }
    return written;
}

}  // namespace specdrop::harness
