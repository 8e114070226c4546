#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "specdrop/dropout/dropcluster.hpp"
#include "specdrop/dropout/dropout.hpp"
#include "specdrop/model/layers.hpp"

namespace specdrop::nn {

enum class Preset { Tiny, ResNet50 };

std::string to_string(Preset p);
Preset preset_from_string(const std::string& s);

// Dropout insertion points. Layer sites apply to every block of that stage
// with the stage's rate multiplier; post_stem hosts the global technique.
inline const std::vector<std::string>& dropout_site_names() {
    static const std::vector<std::string> names = {
        "post_stem",
        "inside_layer1", "inside_layer2", "inside_layer3", "inside_layer4",
        "outside_layer1", "outside_layer2", "outside_layer3", "outside_layer4",
    };
    return names;
}

struct ModelConfig {
    Preset preset = Preset::Tiny;
    int input_length = 512;
    int output_dim = 7;
    bool crelu_half = true;  // CReLU in the stem and stages 1-2
    int condenser_blocks = 2;
    bool condenser_attention = true;
    uint64_t seed = 1;
    std::map<std::string, dropout::DropoutConfig> dropout_sites;

    void validate() const;
};

// One dropout instance bound to a network location; owns its RNG stream and
// the pass state its backward needs.
class SiteDropout {
public:
    SiteDropout(std::string site, dropout::DropoutConfig cfg, uint64_t model_seed);

    Tensor forward(const Tensor& x, const ForwardCtx& ctx);
    Tensor backward(const Tensor& dy) const;

    const std::string& site() const { return site_; }
    const dropout::DropoutConfig& config() const { return cfg_; }
    double last_lambda() const { return last_lambda_; }

    // dropCluster state, refreshed by the trainer once per epoch
    void set_cluster_map(dropout::ClusterMap map) { cluster_map_ = std::move(map); }
    bool cluster_map_fitted() const { return cluster_map_.fitted(); }

private:
    std::string site_;
    dropout::DropoutConfig cfg_;
    Rng rng_;
    bool active_ = false;
    double last_lambda_ = 0.0;
    dropout::FeatureDropState fstate_;
    dropout::ClusterMap cluster_map_;
    dropout::ClusterDropState cstate_;
};

class ResidualBlock {
public:
    ResidualBlock(bool bottleneck, bool crelu, int in_c, int width, int out_c, int stride, Rng& init_rng);

    Tensor forward(const Tensor& x, const ForwardCtx& ctx);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    void collect_buffers(std::vector<ParamRef>& out, const std::string& prefix);
    long param_count() const;

    SiteDropout* inside = nullptr;   // owned by the model
    SiteDropout* outside = nullptr;

    int out_channels() const { return out_c_; }

private:
    bool bottleneck_, crelu_;
    int in_c_, width_, out_c_, stride_;
    bool has_proj_;
    BatchNorm1d bn1_, bn2_, bn3_;
    Activation act1_, act2_, act3_;
    Conv1d conv1_, conv2_, conv3_;
    AvgPool1d pool_{2};
    Conv1d proj_;
    bool identity_skip_ = false;
};

// 1D pre-activation residual network with a CReLU first half, ResNet-b/-d
// downsampling, structured-dropout sites and a spatial feature condenser
// ahead of the pooled regression head.
class ResNet1D {
public:
    explicit ResNet1D(const ModelConfig& cfg);

    Mat forward(const Tensor& x, const ForwardCtx& ctx);
    // Propagates loss gradients into the parameter grads; call zero_grad first.
    void backward(const Mat& dpred);

    std::vector<ParamRef> params();
    std::vector<ParamRef> buffers();  // batch-norm running stats
    void zero_grad();
    long param_count() const;

    const ModelConfig& config() const { return cfg_; }

    // Stem feature map (eval-mode batch norm, no dropout), used to fit the
    // dropCluster partition on a held-out batch.
    Tensor stem_features(const Tensor& x);
    void set_cluster_map(const dropout::ClusterMap& map);
    bool needs_cluster_map() const;

    void save_checkpoint(const std::string& path, const std::string& sidecar_json);
    // Returns the sidecar JSON text.
    std::string load_checkpoint(const std::string& path);

private:
    ModelConfig cfg_;
    std::vector<std::unique_ptr<SiteDropout>> drops_;
    SiteDropout* post_stem_ = nullptr;

    Conv1d stem_conv_;
    BatchNorm1d stem_bn_;
    Activation stem_act_;
    MaxPool1d stem_pool_{3, 2, 1};

    std::vector<std::vector<std::unique_ptr<ResidualBlock>>> stages_;
    BatchNorm1d final_bn_;
    ReLU final_act_;

    struct CondenserBlock {
        DepthwiseConv1d conv;
        SpatialGate gate;
        bool use_gate;
    };
    std::vector<CondenserBlock> condenser_;
    GlobalAvgPool gap_;
    Dense head_;

    SiteDropout* make_site(const std::string& site_key, const std::string& instance, int multiplier);
    static void check_finite(const Tensor& t, const std::string& site);
};

// Standard Adam.
class Adam {
public:
    Adam(std::vector<ParamRef> params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step();
    double lr;

private:
    std::vector<ParamRef> params_;
    double b1_, b2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace specdrop::nn
