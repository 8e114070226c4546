#include "specdrop/model/resnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace specdrop::nn {

std::string to_string(Preset p) { return p == Preset::Tiny ? "tiny" : "resnet50"; }

Preset preset_from_string(const std::string& s) {
    if (s == "tiny") return Preset::Tiny;
    if (s == "resnet50") return Preset::ResNet50;
    throw std::invalid_argument("unknown model preset: " + s);
}

void ModelConfig::validate() const {
    if (input_length != 512) throw std::invalid_argument("input_length must be 512");
    if (output_dim < 1) throw std::invalid_argument("output_dim must be positive");
    if (condenser_blocks < 0 || condenser_blocks > 8)
        throw std::invalid_argument("condenser_blocks must lie in 0..8");
    for (const auto& [site, dc] : dropout_sites) {
        bool known = false;
        for (const auto& s : dropout_site_names()) known |= (s == site);
        if (!known) throw std::invalid_argument("unknown dropout site: " + site);
        dc.validate();
    }
}

// ------------------------------------------------------------ SiteDropout

SiteDropout::SiteDropout(std::string site, dropout::DropoutConfig cfg, uint64_t model_seed)
    : site_(std::move(site)),
      cfg_(cfg),
      rng_(splitmix64(model_seed) ^ fnv1a64_str(site_.c_str())) {}

Tensor SiteDropout::forward(const Tensor& x, const ForwardCtx& ctx) {
    active_ = false;
    if (!ctx.training) return x;
    double lam = dropout::schedule_lambda(ctx.epoch, cfg_.activation_epoch, ctx.total_epochs);
    last_lambda_ = lam;
    double p_layer = cfg_.layer_multiplier * cfg_.p_max;
    if (lam <= 0.0 || p_layer <= 0.0) return x;

    active_ = true;
    switch (cfg_.technique) {
        case dropout::Technique::Fad:
            return dropout::apply_fad_ex(x, p_layer * lam, rng_, &fstate_);
        case dropout::Technique::Wfd: {
            auto scores = dropout::score_channels(x, cfg_.q_threshold, p_layer, lam, cfg_.threshold_mode);
            return dropout::apply_wfd_ex(x, scores, rng_, &fstate_);
        }
        case dropout::Technique::Wfad: {
            auto scores = dropout::score_channels(x, cfg_.q_threshold, p_layer, lam, cfg_.threshold_mode);
            return dropout::apply_wfad_ex(x, scores, rng_, &fstate_);
        }
        case dropout::Technique::DropCluster:
            if (!cluster_map_.fitted())
                throw std::runtime_error("dropCluster at " + site_ + " applied before the cluster map was fitted");
            return dropout::apply_dropcluster(x, cluster_map_, p_layer, lam, rng_,
                                              cfg_.deterministic_clusters, &cstate_);
    }
    return x;
}

Tensor SiteDropout::backward(const Tensor& dy) const {
    if (!active_) return dy;
    Tensor dx = dy;
    switch (cfg_.technique) {
        case dropout::Technique::Fad: {
            double a = fstate_.scale_a[0];
            for (int b = 0; b < dy.b; ++b)
                for (int c = 0; c < dy.c; ++c) {
                    double* row = dx.row(b, c);
                    if (fstate_.dropped[static_cast<size_t>(b) * dy.c + c]) {
                        std::fill(row, row + dy.l, 0.0);
                    } else {
                        for (int j = 0; j < dy.l; ++j) row[j] *= a;
                    }
                }
            break;
        }
        case dropout::Technique::Wfd:
        case dropout::Technique::Wfad: {
            for (int b = 0; b < dy.b; ++b)
                for (int c = 0; c < dy.c; ++c) {
                    double* row = dx.row(b, c);
                    if (fstate_.dropped[static_cast<size_t>(b) * dy.c + c]) {
                        std::fill(row, row + dy.l, 0.0);
                    } else {
                        double a = fstate_.scale_a[c];
                        for (int j = 0; j < dy.l; ++j) row[j] *= a;
                    }
                }
            break;
        }
        case dropout::Technique::DropCluster: {
            for (int b = 0; b < dy.b; ++b)
                for (int c = 0; c < dy.c; ++c) {
                    const auto& flags = cstate_.dropped[static_cast<size_t>(b) * dy.c + c];
                    const auto& rates = cstate_.rates[c];
                    double* row = dx.row(b, c);
                    for (size_t k = 0; k < flags.size(); ++k) {
                        int lo = cluster_map_.starts[c][k];
                        int hi = k + 1 < flags.size() ? cluster_map_.starts[c][k + 1] : dy.l;
                        if (flags[k]) {
                            std::fill(row + lo, row + hi, 0.0);
                        } else if (rates[k] > 0.0) {
                            double s = 1.0 / (1.0 - rates[k]);
                            for (int j = lo; j < hi; ++j) row[j] *= s;
                        }
                    }
                }
            break;
        }
    }
    return dx;
}

// ---------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(bool bottleneck, bool crelu, int in_c, int width, int out_c, int stride,
                             Rng& init_rng)
    : bottleneck_(bottleneck),
      crelu_(crelu),
      in_c_(in_c),
      width_(width),
      out_c_(out_c),
      stride_(stride),
      act1_(crelu),
      act2_(crelu),
      act3_(crelu),
      pool_(stride) {
    const int m = crelu ? 2 : 1;
    bn1_ = BatchNorm1d(in_c);
    if (bottleneck_) {
        conv1_ = Conv1d(in_c * m, width, 1, 1, 0);
        bn2_ = BatchNorm1d(width);
        conv2_ = Conv1d(width * m, width, 3, stride, 1);  // stride on the 3x1 conv (ResNet-b)
        bn3_ = BatchNorm1d(width);
        conv3_ = Conv1d(width * m, out_c, 1, 1, 0);
    } else {
        conv1_ = Conv1d(in_c * m, out_c, 3, stride, 1);
        bn2_ = BatchNorm1d(out_c);
        conv2_ = Conv1d(out_c * m, out_c, 3, 1, 1);
    }
    identity_skip_ = (in_c == out_c && stride == 1);
    has_proj_ = !identity_skip_;
    if (has_proj_) proj_ = Conv1d(in_c * m, out_c, 1, 1, 0);

    conv1_.init(init_rng);
    conv2_.init(init_rng);
    if (bottleneck_) conv3_.init(init_rng);
    if (has_proj_) proj_.init(init_rng);
}

Tensor ResidualBlock::forward(const Tensor& x, const ForwardCtx& ctx) {
    Tensor a1 = act1_.forward(bn1_.forward(x, ctx.training));
    Tensor h = conv1_.forward(a1);
    h = act2_.forward(bn2_.forward(h, ctx.training));
    h = conv2_.forward(h);
    if (bottleneck_) {
        h = act3_.forward(bn3_.forward(h, ctx.training));
        h = conv3_.forward(h);
    }
    if (inside) h = inside->forward(h, ctx);

    Tensor skip;
    if (has_proj_) {
        // ResNet-d: average-pool then 1x1 projection, fed from the shared
        // pre-activation
        skip = stride_ > 1 ? proj_.forward(pool_.forward(a1)) : proj_.forward(a1);
    } else {
        skip = x;
    }
    if (!h.same_shape(skip)) throw std::logic_error("residual block shape mismatch");
    Tensor y(h.b, h.c, h.l);
    for (size_t i = 0; i < y.size(); ++i) y.v[i] = h.v[i] + skip.v[i];
    if (outside) y = outside->forward(y, ctx);
    return y;
}

Tensor ResidualBlock::backward(const Tensor& dy) {
    Tensor d = dy;
    if (outside) d = outside->backward(d);

    Tensor dpath = d;
    if (inside) dpath = inside->backward(dpath);
    if (bottleneck_) {
        dpath = conv3_.backward(dpath);
        dpath = bn3_.backward(act3_.backward(dpath));
    }
    dpath = conv2_.backward(dpath);
    dpath = bn2_.backward(act2_.backward(dpath));
    Tensor da1 = conv1_.backward(dpath);

    Tensor dx_identity;
    if (has_proj_) {
        Tensor dskip = proj_.backward(d);
        if (stride_ > 1) dskip = pool_.backward(dskip);
        for (size_t i = 0; i < da1.size(); ++i) da1.v[i] += dskip.v[i];
    } else {
        dx_identity = d;
    }

    Tensor dx = bn1_.backward(act1_.backward(da1));
    if (!has_proj_)
        for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dx_identity.v[i];
    return dx;
}

void ResidualBlock::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    bn1_.collect(out, prefix + ".bn1");
    conv1_.collect(out, prefix + ".conv1");
    bn2_.collect(out, prefix + ".bn2");
    conv2_.collect(out, prefix + ".conv2");
    if (bottleneck_) {
        bn3_.collect(out, prefix + ".bn3");
        conv3_.collect(out, prefix + ".conv3");
    }
    if (has_proj_) proj_.collect(out, prefix + ".proj");
}

void ResidualBlock::collect_buffers(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".bn1.run_mean", &bn1_.run_mean_, nullptr});
    out.push_back({prefix + ".bn1.run_var", &bn1_.run_var_, nullptr});
    out.push_back({prefix + ".bn2.run_mean", &bn2_.run_mean_, nullptr});
    out.push_back({prefix + ".bn2.run_var", &bn2_.run_var_, nullptr});
    if (bottleneck_) {
        out.push_back({prefix + ".bn3.run_mean", &bn3_.run_mean_, nullptr});
        out.push_back({prefix + ".bn3.run_var", &bn3_.run_var_, nullptr});
    }
}

long ResidualBlock::param_count() const {
    long n = bn1_.param_count() + conv1_.param_count() + bn2_.param_count() + conv2_.param_count();
    if (bottleneck_) n += bn3_.param_count() + conv3_.param_count();
    if (has_proj_) n += proj_.param_count();
    return n;
}

// ---------------------------------------------------------------- ResNet1D

namespace {

struct StageTable {
    bool bottleneck;
    int stem_width;
    std::vector<int> widths;  // inner width per stage
    std::vector<int> blocks;
    std::vector<int> strides;
    int expansion;
};

StageTable stage_table(Preset p) {
    if (p == Preset::Tiny) return {false, 16, {16, 32, 64, 128}, {1, 1, 1, 1}, {1, 2, 2, 2}, 1};
    return {true, 64, {64, 128, 256, 512}, {3, 4, 6, 3}, {1, 2, 2, 2}, 4};
}

}  // namespace

SiteDropout* ResNet1D::make_site(const std::string& site_key, const std::string& instance,
                                 int multiplier) {
    auto it = cfg_.dropout_sites.find(site_key);
    if (it == cfg_.dropout_sites.end()) return nullptr;
    dropout::DropoutConfig dc = it->second;
    dc.layer_multiplier = multiplier;
    dc.validate();
    drops_.push_back(std::make_unique<SiteDropout>(instance, dc, cfg_.seed));
    return drops_.back().get();
}

ResNet1D::ResNet1D(const ModelConfig& cfg) : cfg_(cfg), stem_act_(cfg.crelu_half), head_() {
    cfg_.validate();
    Rng init_rng = Rng::substream(cfg_.seed, 0xA11CE);

    const StageTable st = stage_table(cfg_.preset);
    const int stem_mult = cfg_.crelu_half ? 2 : 1;

    stem_conv_ = Conv1d(1, st.stem_width, 7, 2, 3);
    stem_conv_.init(init_rng);
    stem_bn_ = BatchNorm1d(st.stem_width);
    post_stem_ = make_site("post_stem", "post_stem", 1);

    int in_c = st.stem_width * stem_mult;
    for (int s = 0; s < 4; ++s) {
        // first half of the network (stem + stages 1-2) uses CReLU
        bool crelu = cfg_.crelu_half && s < 2;
        int out_c = st.widths[s] * st.expansion;
        std::vector<std::unique_ptr<ResidualBlock>> blocks;
        for (int b = 0; b < st.blocks[s]; ++b) {
            int stride = b == 0 ? st.strides[s] : 1;
            auto blk = std::make_unique<ResidualBlock>(st.bottleneck, crelu, in_c, st.widths[s], out_c,
                                                       stride, init_rng);
            std::string layer = "layer" + std::to_string(s + 1);
            std::string idx = ".block" + std::to_string(b);
            blk->inside = make_site("inside_" + layer, "inside_" + layer + idx, s + 1);
            blk->outside = make_site("outside_" + layer, "outside_" + layer + idx, s + 1);
            in_c = out_c;
            blocks.push_back(std::move(blk));
        }
        stages_.push_back(std::move(blocks));
    }

    final_bn_ = BatchNorm1d(in_c);
    for (int i = 0; i < cfg_.condenser_blocks; ++i) {
        CondenserBlock cb{DepthwiseConv1d(in_c, 3, 2, 1), SpatialGate(in_c), cfg_.condenser_attention};
        cb.conv.init(init_rng);
        if (cb.use_gate) cb.gate.init(init_rng);
        condenser_.push_back(std::move(cb));
    }
    head_ = Dense(in_c, cfg_.output_dim);
    head_.init(init_rng);
}

void ResNet1D::check_finite(const Tensor& t, const std::string& site) {
    if (!t.all_finite()) throw std::runtime_error("non-finite activations at " + site);
}

Mat ResNet1D::forward(const Tensor& x, const ForwardCtx& ctx) {
    if (x.l != cfg_.input_length || x.c != 1)
        throw std::invalid_argument("model expects input [B, 1, 512]");

    Tensor h = stem_conv_.forward(x);
    // checked before the activations, which would mask NaN by zeroing it
    if (ctx.check_finite) check_finite(h, "stem.conv");
    h = stem_bn_.forward(h, ctx.training);
    h = stem_act_.forward(h);
    h = stem_pool_.forward(h);
    if (ctx.check_finite) check_finite(h, "stem");
    if (ctx.trace) ctx.trace->record("stem", h);
    if (post_stem_) h = post_stem_->forward(h, ctx);
    if (ctx.trace) ctx.trace->record("post_stem", h);

    for (size_t s = 0; s < stages_.size(); ++s) {
        for (size_t b = 0; b < stages_[s].size(); ++b) {
            h = stages_[s][b]->forward(h, ctx);
            std::string site = "layer" + std::to_string(s + 1) + ".block" + std::to_string(b);
            if (ctx.check_finite) check_finite(h, site);
            if (ctx.trace) ctx.trace->record(site, h);
        }
    }

    h = final_act_.forward(final_bn_.forward(h, ctx.training));
    for (size_t i = 0; i < condenser_.size(); ++i) {
        h = condenser_[i].conv.forward(h);
        if (condenser_[i].use_gate) h = condenser_[i].gate.forward(h);
        if (ctx.check_finite) check_finite(h, "condenser." + std::to_string(i));
        if (ctx.trace) ctx.trace->record("condenser." + std::to_string(i), h);
    }

    Mat pooled = gap_.forward(h);
    Mat out = head_.forward(pooled);
    for (double v : out.v)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite activations at head.fc");
    if (ctx.trace) ctx.trace->record("head.fc", out);
    return out;
}

void ResNet1D::backward(const Mat& dpred) {
    Mat d = head_.backward(dpred);
    Tensor dh = gap_.backward(d);
    for (size_t i = condenser_.size(); i-- > 0;) {
        if (condenser_[i].use_gate) dh = condenser_[i].gate.backward(dh);
        dh = condenser_[i].conv.backward(dh);
    }
    dh = final_bn_.backward(final_act_.backward(dh));

    for (size_t s = stages_.size(); s-- > 0;)
        for (size_t b = stages_[s].size(); b-- > 0;) dh = stages_[s][b]->backward(dh);

    if (post_stem_) dh = post_stem_->backward(dh);
    dh = stem_pool_.backward(dh);
    dh = stem_act_.backward(dh);
    dh = stem_bn_.backward(dh);
    stem_conv_.backward(dh);
}

Tensor ResNet1D::stem_features(const Tensor& x) {
    Tensor h = stem_conv_.forward(x);
    h = stem_bn_.forward(h, false);
    h = stem_act_.forward(h);
    return stem_pool_.forward(h);
}

void ResNet1D::set_cluster_map(const dropout::ClusterMap& map) {
    for (auto& d : drops_)
        if (d->config().technique == dropout::Technique::DropCluster) d->set_cluster_map(map);
}

bool ResNet1D::needs_cluster_map() const {
    for (const auto& d : drops_)
        if (d->config().technique == dropout::Technique::DropCluster) return true;
    return false;
}

std::vector<ParamRef> ResNet1D::params() {
    std::vector<ParamRef> out;
    stem_conv_.collect(out, "stem.conv");
    stem_bn_.collect(out, "stem.bn");
    for (size_t s = 0; s < stages_.size(); ++s)
        for (size_t b = 0; b < stages_[s].size(); ++b)
            stages_[s][b]->collect(out, "layer" + std::to_string(s + 1) + ".block" + std::to_string(b));
    final_bn_.collect(out, "final.bn");
    for (size_t i = 0; i < condenser_.size(); ++i) {
        condenser_[i].conv.collect(out, "condenser." + std::to_string(i) + ".conv");
        if (condenser_[i].use_gate)
            condenser_[i].gate.collect(out, "condenser." + std::to_string(i) + ".gate");
    }
    head_.collect(out, "head.fc");
    return out;
}

std::vector<ParamRef> ResNet1D::buffers() {
    std::vector<ParamRef> out;
    out.push_back({"stem.bn.run_mean", &stem_bn_.run_mean_, nullptr});
    out.push_back({"stem.bn.run_var", &stem_bn_.run_var_, nullptr});
    for (size_t s = 0; s < stages_.size(); ++s)
        for (size_t b = 0; b < stages_[s].size(); ++b)
            stages_[s][b]->collect_buffers(out,
                                           "layer" + std::to_string(s + 1) + ".block" + std::to_string(b));
    out.push_back({"final.bn.run_mean", &final_bn_.run_mean_, nullptr});
    out.push_back({"final.bn.run_var", &final_bn_.run_var_, nullptr});
    return out;
}

void ResNet1D::zero_grad() {
    for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

long ResNet1D::param_count() const {
    long n = stem_conv_.param_count() + stem_bn_.param_count();
    for (const auto& stage : stages_)
        for (const auto& b : stage) n += b->param_count();
    n += final_bn_.param_count();
    for (const auto& cb : condenser_) {
        n += cb.conv.param_count();
        if (cb.use_gate) n += cb.gate.param_count();
    }
    n += head_.param_count();
    return n;
}

// ------------------------------------------------------------- checkpoint

namespace {
constexpr char kCkptMagic[8] = {'S', 'P', 'E', 'C', 'D', 'C', 'K', 'P'};
}

void ResNet1D::save_checkpoint(const std::string& path, const std::string& sidecar_json) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(kCkptMagic, sizeof(kCkptMagic));
    uint64_t hlen = sidecar_json.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(sidecar_json.data(), static_cast<std::streamsize>(hlen));

    auto ps = params();
    auto bs = buffers();
    uint64_t count = ps.size() + bs.size();
    f.write(reinterpret_cast<const char*>(&count), sizeof(count));
    auto dump = [&](const ParamRef& p) {
        uint32_t nl = static_cast<uint32_t>(p.name.size());
        f.write(reinterpret_cast<const char*>(&nl), sizeof(nl));
        f.write(p.name.data(), nl);
        uint64_t n = p.data->size();
        f.write(reinterpret_cast<const char*>(&n), sizeof(n));
        f.write(reinterpret_cast<const char*>(p.data->data()), static_cast<std::streamsize>(n * sizeof(double)));
    };
    for (const auto& p : ps) dump(p);
    for (const auto& p : bs) dump(p);
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

std::string ResNet1D::load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string sidecar(hlen, '\0');
    f.read(sidecar.data(), static_cast<std::streamsize>(hlen));

    std::map<std::string, std::vector<double>*> by_name;
    for (auto& p : params()) by_name[p.name] = p.data;
    for (auto& p : buffers()) by_name[p.name] = p.data;

    uint64_t count = 0;
    f.read(reinterpret_cast<char*>(&count), sizeof(count));
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t nl = 0;
        f.read(reinterpret_cast<char*>(&nl), sizeof(nl));
        std::string name(nl, '\0');
        f.read(name.data(), nl);
        uint64_t n = 0;
        f.read(reinterpret_cast<char*>(&n), sizeof(n));
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint tensor has no home: " + name);
        if (it->second->size() != n)
            throw std::runtime_error("checkpoint tensor size mismatch for " + name);
        f.read(reinterpret_cast<char*>(it->second->data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    }
    return sidecar;
}

// ------------------------------------------------------------------- Adam

Adam::Adam(std::vector<ParamRef> params, double lr_, double beta1, double beta2, double eps)
    : lr(lr_), params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& p : params_) {
        m_.emplace_back(p.data->size(), 0.0);
        v_.emplace_back(p.data->size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& w = *params_[i].data;
        auto& g = *params_[i].grad;
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < w.size(); ++j) {
            m[j] = b1_ * m[j] + (1.0 - b1_) * g[j];
            v[j] = b2_ * v[j] + (1.0 - b2_) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace specdrop::nn
