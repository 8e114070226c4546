#pragma once

#include <map>
#include <string>
#include <vector>

#include "specdrop/harness/run_config.hpp"
#include "specdrop/metrics/evaluate.hpp"

namespace specdrop::harness {

struct LogRow {
    int epoch;
    std::string metric;
    std::string split;
    double value;
};

std::string log_to_csv(const std::vector<LogRow>& rows);
std::vector<LogRow> log_from_csv(const std::string& text);

// Values of one (metric, split) series in epoch order.
std::vector<double> extract_series(const std::vector<LogRow>& rows, const std::string& metric,
                                   const std::string& split);

struct RunRecord {
    RunConfig cfg;
    std::string config_hash;
    std::vector<LogRow> log;
    metrics::EvalReport best_eval;
    int best_epoch = -1;
    double best_val_mape = 0.0;
    double wallclock_s = 0.0;
    std::string env;
    bool diverged = false;
    std::string divergence_reason;
    int divergence_epoch = -1;
    std::string out_dir;  // resolved
};

// Runs the full loop: per epoch, train batches under the current loss
// lambdas and dropout schedule, validate, log metrics, update lambdas, and
// checkpoint the best model by validation MAPE. Divergence (non-finite loss
// or a sustained validation blow-up) stops the run and marks the record.
RunRecord train(const RunConfig& cfg);

void write_record(const RunRecord& rec);
RunRecord read_record(const std::string& run_dir);

std::string environment_fingerprint();

}  // namespace specdrop::harness
