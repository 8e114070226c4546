#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specdrop/sim/synth.hpp"

namespace specdrop::sim {

// Labelled spectra, train rows first. Arrays are float32 to match the on-disk
// layout; the generator computes in double and narrows once at the end.
struct Dataset {
    Variant variant;
    TaskVariant task;       // schema with the bounds used at generation time
    int n = 0;
    int n_train = 0;
    double split = 0.8;
    uint64_t seed = 0;
    std::string generator = "specdrop-sim/1";
    std::vector<float> spectra;  // [n][kOutLen]
    std::vector<float> targets;  // [n][task.dim()]

    int dim() const { return task.dim(); }
    const float* spectrum_row(int i) const { return spectra.data() + static_cast<size_t>(i) * kOutLen; }
    const float* target_row(int i) const { return targets.data() + static_cast<size_t>(i) * dim(); }
};

struct GenerateOptions {
    GridSpec grid = {};
    SamplingBounds bounds = {};
    int threads = 0;  // 0 = hardware concurrency
};

Dataset generate_dataset(Variant variant, int n, uint64_t seed, double split,
                         const GenerateOptions& opt = {});

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace specdrop::sim
