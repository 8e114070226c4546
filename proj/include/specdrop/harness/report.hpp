#pragma once

#include <string>
#include <vector>

#include "specdrop/harness/trainer.hpp"

namespace specdrop::harness {

struct PlotSeries {
    std::string name;  // split label
    std::vector<double> xs;
    std::vector<double> ys;
    bool annotate_s_bar = false;
    double s_bar = 0.0;
};

// Minimal deterministic SVG emitters; S-bar annotations are carried in
// machine-readable data attributes so reports can be cross-checked.
std::string svg_line_plot(const std::string& title, const std::vector<PlotSeries>& series);
std::string svg_histogram(const std::string& title, const std::vector<double>& counts, double x_max);

// Writes per-metric curve plots (with the consistency metric annotated), the
// APE histogram of the best epoch, and a copy of the metric log.
std::vector<std::string> report_run(const std::string& run_dir, const std::string& out_dir);

}  // namespace specdrop::harness
