#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specdrop/harness/trainer.hpp"

namespace specdrop::harness {

struct AblationRun {
    std::string name;
    std::vector<DropoutSpec> dropout;
    std::optional<double> lr;
    std::optional<uint64_t> seed;
};

struct AblationConfig {
    RunConfig base;
    std::string out_dir;
    int jobs = 1;
    std::vector<AblationRun> runs;

    static AblationConfig from_json(const std::string& text);
    static AblationConfig load(const std::string& path);
};

// One table row in the layout of the dropout ablation study: rows are grouped
// into baseline (I), individual techniques (II) and combinations (III).
struct AblationRow {
    std::string group;
    std::string technique;
    std::string drop_prob;  // "- -" for the baseline
    bool failed = false;
    int epoch = -1;
    double mape = 0.0, std = 0.0, r2 = 0.0, s_bar = 0.0;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    bool operator==(const AblationTable&) const = default;
};

inline bool operator==(const AblationRow& a, const AblationRow& b) {
    return a.group == b.group && a.technique == b.technique && a.drop_prob == b.drop_prob &&
           a.failed == b.failed && a.epoch == b.epoch && a.mape == b.mape && a.std == b.std &&
           a.r2 == b.r2 && a.s_bar == b.s_bar;
}

// Executes the run matrix (optionally across worker threads; every run keeps
// its own directory and RNG streams) and assembles the summary table. Failed
// or diverged runs stay in the table with their cells marked "na".
AblationTable ablate(const AblationConfig& cfg);

std::string table_to_csv(const AblationTable& table);
AblationTable table_from_csv(const std::string& text);
std::string table_to_json(const AblationTable& table);

void write_table(const AblationTable& table, const std::string& out_dir);
AblationTable read_table_csv(const std::string& path);

}  // namespace specdrop::harness
