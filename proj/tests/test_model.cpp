#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "specdrop/model/resnet.hpp"

using namespace specdrop;
using namespace specdrop::nn;

namespace {

Tensor random_input(int b, uint64_t seed) {
    Rng rng(seed);
    Tensor x(b, 1, 512);
    for (auto& v : x.v) v = 0.1 * rng.normal();
    return x;
}

ModelConfig tiny_config(int out_dim = 7, uint64_t seed = 1) {
    ModelConfig mc;
    mc.preset = Preset::Tiny;
    mc.output_dim = out_dim;
    mc.seed = seed;
    return mc;
}

// plain MSE head loss for gradient checking
double mse_loss(const Mat& pred, const Mat& tgt, Mat* dpred) {
    double n = static_cast<double>(pred.r) * pred.c;
    if (dpred) *dpred = Mat(pred.r, pred.c);
    double total = 0.0;
    for (int i = 0; i < pred.r; ++i)
        for (int j = 0; j < pred.c; ++j) {
            double d = pred.at(i, j) - tgt.at(i, j);
            total += d * d / n;
            if (dpred) dpred->at(i, j) = 2.0 * d / n;
        }
    return total;
}

}  // namespace

TEST_CASE("tiny preset maps [8, 1, 512] to [8, output_dim]") {
    ResNet1D model(tiny_config(14));
    Tensor x = random_input(8, 2);
    ForwardCtx ctx;
    Mat y = model.forward(x, ctx);
    CHECK(y.r == 8);
    CHECK(y.c == 14);
    for (double v : y.v) CHECK(std::isfinite(v));
}

TEST_CASE("forward is deterministic when no dropout site is configured") {
    ResNet1D model(tiny_config());
    Tensor x = random_input(4, 3);
    ForwardCtx train_ctx;
    train_ctx.training = true;
    train_ctx.epoch = 50;
    Mat y1 = model.forward(x, train_ctx);
    Mat y2 = model.forward(x, train_ctx);
    CHECK(y1.v == y2.v);

    ForwardCtx eval_ctx;
    Mat e1 = model.forward(x, eval_ctx);
    Mat e2 = model.forward(x, eval_ctx);
    CHECK(e1.v == e2.v);
}

TEST_CASE("identical seeds build identical models") {
    ResNet1D a(tiny_config(7, 99)), b(tiny_config(7, 99));
    Tensor x = random_input(2, 4);
    ForwardCtx ctx;
    CHECK(a.forward(x, ctx).v == b.forward(x, ctx).v);
}

TEST_CASE("condenser stride bookkeeping: five stride-2 blocks shrink 16 to 1") {
    // the derived chain 16 -> 8 -> 4 -> 2 -> 1 -> 1 under ceil(L/2)
    DepthwiseConv1d probe(8, 3, 2, 1);
    std::vector<int> lengths = {16};
    for (int i = 0; i < 5; ++i) lengths.push_back(probe.out_len(lengths.back()));
    CHECK(lengths == std::vector<int>{16, 8, 4, 2, 1, 1});

    ModelConfig mc = tiny_config();
    mc.condenser_blocks = 5;
    ResNet1D model(mc);
    Tensor x = random_input(2, 5);
    ForwardCtx ctx;
    Mat y = model.forward(x, ctx);
    CHECK(y.r == 2);
    CHECK(y.c == 7);
}

TEST_CASE("parameter count matches the analytic stage-table count") {
    const int out_dim = 14;
    ResNet1D model(tiny_config(out_dim));

    // independent bookkeeping from the tiny stage table:
    // stem 1->16 k7 (+bn), stages in/out {32->16, 16->32, 32->64, 64->128},
    // CReLU doubling feeds the convs of the stem half (stages 1-2)
    long expect = 0;
    expect += 16 * 1 * 7 + 16 + 2 * 16;  // stem conv + bn
    struct Stage {
        int in, out, act_mult;
    };
    std::vector<Stage> stages = {{32, 16, 2}, {16, 32, 2}, {32, 64, 1}, {64, 128, 1}};
    for (const auto& s : stages) {
        expect += 2 * s.in;                                // bn1
        expect += s.out * (s.in * s.act_mult) * 3 + s.out; // conv1
        expect += 2 * s.out;                               // bn2
        expect += s.out * (s.out * s.act_mult) * 3 + s.out;// conv2
        expect += s.out * (s.in * s.act_mult) * 1 + s.out; // projection
    }
    expect += 2 * 128;                        // final bn
    expect += 2 * (128 * 3 + 128);            // condenser depthwise convs
    expect += 2 * (128 + 1);                  // condenser gates
    expect += 128 * out_dim + out_dim;        // head

    CHECK(model.param_count() == expect);

    long from_refs = 0;
    for (auto& p : model.params()) from_refs += static_cast<long>(p.data->size());
    CHECK(from_refs == expect);
}

TEST_CASE("analytic gradients match central finite differences") {
    ModelConfig mc = tiny_config(7, 12);
    ResNet1D model(mc);
    const int B = 4;
    Tensor x = random_input(B, 13);
    Mat tgt(B, 7);
    Rng trng(14);
    for (auto& v : tgt.v) v = trng.uniform(0.0, 1.0);

    ForwardCtx ctx;
    ctx.training = true;
    ctx.epoch = 5;

    Mat pred = model.forward(x, ctx);
    Mat dpred;
    mse_loss(pred, tgt, &dpred);
    model.zero_grad();
    model.backward(dpred);

    auto params = model.params();
    // snapshot analytic grads before FD perturbs anything
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(*p.grad);

    Rng pick(15);
    int checked = 0;
    double worst = 0.0;
    while (checked < 20) {
        size_t pi = pick.uniform_int(params.size());
        size_t wi = pick.uniform_int(params[pi].data->size());
        double an = analytic[pi][wi];
        if (std::abs(an) < 1e-7) continue;  // relative comparison needs signal

        double& w = (*params[pi].data)[wi];
        double saved = w;
        double h = 1e-5 * std::max(1.0, std::abs(saved));
        w = saved + h;
        Mat pp = model.forward(x, ctx);
        double lp = mse_loss(pp, tgt, nullptr);
        w = saved - h;
        Mat pm = model.forward(x, ctx);
        double lm = mse_loss(pm, tgt, nullptr);
        w = saved;

        double fd = (lp - lm) / (2.0 * h);
        double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        worst = std::max(worst, rel);
        CHECK(rel < 1e-4);
        ++checked;
    }
    MESSAGE("worst relative gradient error: ", worst);
}

TEST_CASE("dropout is inert before its activation epoch") {
    ModelConfig with = tiny_config(7, 77);
    dropout::DropoutConfig dc;
    dc.technique = dropout::Technique::Fad;
    dc.p_max = 0.10;
    dc.activation_epoch = 10;
    for (int l = 1; l <= 4; ++l) with.dropout_sites["inside_layer" + std::to_string(l)] = dc;

    ResNet1D dropped(with);
    ResNet1D plain(tiny_config(7, 77));

    Tensor x = random_input(6, 16);
    ForwardCtx ctx;
    ctx.training = true;
    ctx.total_epochs = 100;
    for (int epoch : {1, 5, 9, 10}) {
        ctx.epoch = epoch;
        Mat a = dropped.forward(x, ctx);
        Mat b = plain.forward(x, ctx);
        CHECK(a.v == b.v);
    }
    ctx.epoch = 90;  // schedule well past activation: must now differ
    Mat a = dropped.forward(x, ctx);
    Mat b = plain.forward(x, ctx);
    CHECK(a.v != b.v);
}

TEST_CASE("enabling dropout at one site changes activations only at and after it") {
    Tensor x = random_input(6, 17);
    auto run_trace = [&](const std::string& site) {
        ModelConfig mc = tiny_config(7, 55);
        if (!site.empty()) {
            dropout::DropoutConfig dc;
            dc.technique = dropout::Technique::Fad;
            dc.p_max = 0.25;
            dc.activation_epoch = 10;
            mc.dropout_sites[site] = dc;
        }
        ResNet1D model(mc);
        ActivationTrace trace;
        ForwardCtx ctx;
        ctx.training = true;
        ctx.epoch = 100;
        ctx.total_epochs = 100;
        ctx.trace = &trace;
        model.forward(x, ctx);
        return trace.entries;
    };

    auto base = run_trace("");
    for (const std::string site : {"inside_layer2", "outside_layer3"}) {
        auto t = run_trace(site);
        REQUIRE(t.size() == base.size());
        // first divergence must be the block hosting the site
        std::string expected_first = site == "inside_layer2" ? "layer2.block0" : "layer3.block0";
        bool diverged = false;
        for (size_t i = 0; i < t.size(); ++i) {
            if (!diverged) {
                if (t[i].second != base[i].second) {
                    CHECK(t[i].first == expected_first);
                    diverged = true;
                }
            }
        }
        CHECK(diverged);
    }
}

TEST_CASE("non-finite activations are reported with the offending site") {
    ResNet1D model(tiny_config());
    Tensor x = random_input(2, 18);
    x.at(0, 0, 100) = std::numeric_limits<double>::quiet_NaN();
    ForwardCtx ctx;
    CHECK_THROWS_WITH_AS(model.forward(x, ctx), doctest::Contains("stem"), std::runtime_error);
}

TEST_CASE("unknown dropout sites are rejected") {
    ModelConfig mc = tiny_config();
    mc.dropout_sites["between_the_layers"] = {};
    CHECK_THROWS_AS(ResNet1D{mc}, std::invalid_argument);
}

TEST_CASE("checkpoints restore weights, buffers and predictions exactly") {
    namespace fs = std::filesystem;
    ModelConfig mc = tiny_config(7, 31);
    ResNet1D model(mc);

    // move batch-norm stats off their init values
    Tensor x = random_input(8, 19);
    ForwardCtx train_ctx;
    train_ctx.training = true;
    model.forward(x, train_ctx);

    ForwardCtx ctx;
    Mat before = model.forward(x, ctx);
    std::string path = (fs::temp_directory_path() / "specdrop_model.ckpt").string();
    model.save_checkpoint(path, "{\"epoch\":3}");

    ResNet1D fresh(tiny_config(7, 32));  // different init
    std::string sidecar = fresh.load_checkpoint(path);
    CHECK(sidecar == "{\"epoch\":3}");
    Mat after = fresh.forward(x, ctx);
    CHECK(after.v == before.v);
    std::remove(path.c_str());
}

TEST_CASE("resnet50 preset builds and honours the shape contract") {
    ModelConfig mc;
    mc.preset = Preset::ResNet50;
    mc.output_dim = 26;
    mc.seed = 5;
    ResNet1D model(mc);
    CHECK(model.param_count() > 1000000);
    long from_refs = 0;
    for (auto& p : model.params()) from_refs += static_cast<long>(p.data->size());
    CHECK(from_refs == model.param_count());

    Tensor x = random_input(1, 20);
    ForwardCtx ctx;
    Mat y = model.forward(x, ctx);
    CHECK(y.r == 1);
    CHECK(y.c == 26);
}

TEST_CASE("Adam steps parameters against the gradient") {
    ResNet1D model(tiny_config());
    auto params = model.params();
    Adam adam(params, 0.01);
    double w0 = (*params[0].data)[0];
    model.zero_grad();
    (*params[0].grad)[0] = 1.0;
    adam.step();
    CHECK((*params[0].data)[0] < w0);
}
