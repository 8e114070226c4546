#include "specdrop/harness/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace specdrop::harness {

using nlohmann::json;

void RunConfig::validate() const {
    if (dataset.empty()) throw ConfigError("run config: dataset path is required");
    if (out_dir.empty()) throw ConfigError("run config: out_dir is required");
    if (epochs < 1) throw ConfigError("run config: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("run config: batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("run config: lr must be positive");
    if (activation_epoch >= epochs)
        throw ConfigError("run config: activation_epoch must be smaller than epochs");
    for (const auto& d : dropout) {
        dropout::DropoutConfig dc;
        dc.technique = d.technique;
        dc.p_max = d.p_max;
        dc.q_threshold = d.q_threshold.value_or(q_threshold);
        dc.activation_epoch = d.activation_epoch.value_or(activation_epoch);
        dc.layer_multiplier = d.technique == dropout::Technique::DropCluster ? 1 : 4;
        try {
            dc.validate();  // multiplier 4 is the worst case for layer sites
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("run config: ") + e.what());
        }
    }
}

std::string RunConfig::to_json() const {
    json j;
    j["dataset"] = dataset;
    j["out_dir"] = out_dir;
    j["preset"] = nn::to_string(preset);
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["seed"] = seed;
    j["pen_min"] = pen_min;
    j["activation_epoch"] = activation_epoch;
    j["q_threshold"] = q_threshold;
    j["condenser_blocks"] = condenser_blocks;
    j["condenser_attention"] = condenser_attention;
    j["crelu_half"] = crelu_half;
    j["normalize_sbar_in_loss"] = normalize_sbar_in_loss;
    json arr = json::array();
    for (const auto& d : dropout) {
        json e;
        e["technique"] = dropout::to_string(d.technique);
        e["placement"] = dropout::to_string(d.placement);
        e["p_max"] = d.p_max;
        if (d.q_threshold) e["q_threshold"] = *d.q_threshold;
        if (d.activation_epoch) e["activation_epoch"] = *d.activation_epoch;
        if (d.deterministic_clusters) e["deterministic_clusters"] = true;
        arr.push_back(e);
    }
    j["dropout"] = arr;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("run config is not valid JSON");
    RunConfig cfg;
    try {
        cfg.dataset = j.value("dataset", std::string{});
        cfg.out_dir = j.value("out_dir", std::string{});
        if (j.contains("preset")) cfg.preset = nn::preset_from_string(j.at("preset").get<std::string>());
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.lr = j.value("lr", cfg.lr);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.pen_min = j.value("pen_min", cfg.pen_min);
        cfg.activation_epoch = j.value("activation_epoch", cfg.activation_epoch);
        cfg.q_threshold = j.value("q_threshold", cfg.q_threshold);
        cfg.condenser_blocks = j.value("condenser_blocks", cfg.condenser_blocks);
        cfg.condenser_attention = j.value("condenser_attention", cfg.condenser_attention);
        cfg.crelu_half = j.value("crelu_half", cfg.crelu_half);
        cfg.normalize_sbar_in_loss = j.value("normalize_sbar_in_loss", cfg.normalize_sbar_in_loss);
        for (const auto& e : j.value("dropout", json::array())) {
            DropoutSpec d;
            d.technique = dropout::technique_from_string(e.at("technique").get<std::string>());
            if (e.contains("placement"))
                d.placement = dropout::placement_from_string(e.at("placement").get<std::string>());
            d.p_max = e.value("p_max", d.p_max);
            if (e.contains("q_threshold")) d.q_threshold = e.at("q_threshold").get<double>();
            if (e.contains("activation_epoch")) d.activation_epoch = e.at("activation_epoch").get<int>();
            d.deterministic_clusters = e.value("deterministic_clusters", false);
            cfg.dropout.push_back(d);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

std::string RunConfig::hash() const {
    uint64_t h = fnv1a64_str(to_json().c_str());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nn::ModelConfig RunConfig::model_config(int output_dim) const {
    nn::ModelConfig mc;
    mc.preset = preset;
    mc.output_dim = output_dim;
    mc.crelu_half = crelu_half;
    mc.condenser_blocks = condenser_blocks;
    mc.condenser_attention = condenser_attention;
    mc.seed = seed;
    for (const auto& d : dropout) {
        dropout::DropoutConfig dc;
        dc.technique = d.technique;
        dc.placement = d.placement;
        dc.p_max = d.p_max;
        dc.q_threshold = d.q_threshold.value_or(q_threshold);
        dc.activation_epoch = d.activation_epoch.value_or(activation_epoch);
        dc.deterministic_clusters = d.deterministic_clusters;
        if (d.technique == dropout::Technique::DropCluster) {
            dc.layer_multiplier = 1;
            if (mc.dropout_sites.count("post_stem"))
                throw ConfigError("only one post-stem (dropCluster) technique can be configured");
            mc.dropout_sites["post_stem"] = dc;
        } else {
            std::string side = d.placement == dropout::Placement::Inside ? "inside" : "outside";
            for (int layer = 1; layer <= 4; ++layer) {
                std::string site = side + "_layer" + std::to_string(layer);
                if (mc.dropout_sites.count(site))
                    throw ConfigError("two dropout techniques collide at site " + site);
                dropout::DropoutConfig site_cfg = dc;
                site_cfg.layer_multiplier = layer;
                mc.dropout_sites[site] = site_cfg;
            }
        }
    }
    return mc;
}

std::string resolve_out_path(const std::string& path) {
    const char* root = std::getenv("SPECDROP_OUT_ROOT");
    if (root == nullptr || path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(root) / p).string();
}

}  // namespace specdrop::harness
