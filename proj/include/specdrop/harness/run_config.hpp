#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "specdrop/dropout/dropout.hpp"
#include "specdrop/model/resnet.hpp"

namespace specdrop::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One technique to insert, e.g. {fad, inside, 0.025}. Layer techniques are
// applied at all four stages with rate multipliers [1, 2, 3, 4]; dropCluster
// sits at the post-stem site.
struct DropoutSpec {
    dropout::Technique technique = dropout::Technique::Fad;
    dropout::Placement placement = dropout::Placement::Outside;
    double p_max = 0.05;
    std::optional<double> q_threshold;
    std::optional<int> activation_epoch;
    bool deterministic_clusters = false;
};

struct RunConfig {
    std::string dataset;
    std::string out_dir;
    nn::Preset preset = nn::Preset::Tiny;
    int epochs = 100;
    int batch_size = 250;
    double lr = 0.001;
    uint64_t seed = 1;
    double pen_min = 1.0;
    int activation_epoch = 10;
    double q_threshold = 0.90;
    int condenser_blocks = 2;
    bool condenser_attention = true;
    bool crelu_half = true;
    bool normalize_sbar_in_loss = false;
    std::vector<DropoutSpec> dropout;

    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);

    // FNV hash of the canonical JSON form.
    std::string hash() const;

    // Model sites derived from the dropout list (output_dim filled by caller).
    nn::ModelConfig model_config(int output_dim) const;
};

// Prefixes relative paths with $SPECDROP_OUT_ROOT when set.
std::string resolve_out_path(const std::string& path);

}  // namespace specdrop::harness
