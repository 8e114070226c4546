#pragma once

#include <map>
#include <string>
#include <vector>

namespace specdrop::metrics {

struct MapeResult {
    double mean = 0.0;  // percent
    double std = 0.0;   // percent, population std of the absolute percent errors
    long excluded = 0;  // elements skipped because the target is exactly zero
    long counted = 0;
};

// Absolute percent errors over flat pred/target arrays. Elements whose target
// is exactly zero are excluded and tallied; percent error is undefined there.
MapeResult mape(const std::vector<double>& pred, const std::vector<double>& target);

// Per-element APEs for histogram/report use; zero-target elements are skipped.
std::vector<double> absolute_percent_errors(const std::vector<double>& pred,
                                            const std::vector<double>& target);

// Coefficient of determination pooled over all elements.
double r_squared(const std::vector<double>& pred, const std::vector<double>& target);

// Pearson correlation pooled over all elements.
double pearson_r(const std::vector<double>& pred, const std::vector<double>& target);

// Per-epoch values of one monitored metric.
struct MetricSeries {
    std::string name;
    std::vector<int> epochs;
    std::vector<double> values;

    void append(int epoch, double value);
    size_t size() const { return values.size(); }
};

// Consistency metric: population variance of the discrete second differences
// of the curve (unit epoch spacing). Zero on any affine series.
double s_bar(const std::vector<double>& values);
double s_bar(const MetricSeries& series);

struct PerMetabolite {
    std::string name;
    double mape = 0.0;
    double std = 0.0;
};

struct EvalReport {
    std::string variant;
    int n_samples = 0;
    std::vector<PerMetabolite> per_metabolite;
    double mape = 0.0;  // cumulative over all metabolite dimensions
    double std = 0.0;
    double r2 = 0.0;
    long excluded_zero_targets = 0;
    int best_epoch = -1;
    std::map<std::string, double> s_bar;  // monitored metric -> consistency value
    std::vector<double> ape_histogram;    // counts, kApeHistogramBins bins
    double ape_histogram_max = 0.0;       // upper edge of the last bin
};

inline constexpr int kApeHistogramBins = 40;

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

}  // namespace specdrop::metrics
