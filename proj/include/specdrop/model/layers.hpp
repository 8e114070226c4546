#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "specdrop/rng.hpp"
#include "specdrop/tensor.hpp"

namespace specdrop::nn {

struct ParamRef {
    std::string name;
    std::vector<double>* data;
    std::vector<double>* grad;
};

// Per-site activation fingerprints, used to localize where two forward
// passes diverge.
struct ActivationTrace {
    std::vector<std::pair<std::string, uint64_t>> entries;
    void record(const std::string& site, const Tensor& t) { entries.emplace_back(site, t.hash()); }
    void record(const std::string& site, const Mat& m) {
        entries.emplace_back(site, fnv1a64(m.v.data(), m.v.size() * sizeof(double)));
    }
};

struct ForwardCtx {
    bool training = false;
    int epoch = 1;
    int total_epochs = 100;
    ActivationTrace* trace = nullptr;
    bool check_finite = true;
};

// ---------------------------------------------------------------------------
// layers; each stores what its backward pass needs

class Conv1d {
public:
    Conv1d() = default;
    Conv1d(int in_c, int out_c, int k, int stride, int pad, bool bias = true);

    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    int out_len(int l) const { return (l + 2 * pad_ - k_) / stride_ + 1; }
    long param_count() const;

    int in_c_ = 0, out_c_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
    bool bias_ = true;
    std::vector<double> w_, b_, gw_, gb_;

private:
    int sb_ = 0, sl_ = 0, slo_ = 0;
    std::vector<double> cols_;  // im2col buffer [in_c*k][B*Lo]
};

class BatchNorm1d {
public:
    BatchNorm1d() = default;
    explicit BatchNorm1d(int c);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    long param_count() const { return 2L * c_; }

    int c_ = 0;
    double momentum_ = 0.1, eps_ = 1e-5;
    std::vector<double> gamma_, beta_, ggamma_, gbeta_;
    std::vector<double> run_mean_, run_var_;

private:
    Tensor xhat_;
    std::vector<double> invstd_;
    bool trained_pass_ = false;
};

class ReLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    std::vector<uint8_t> mask_;
};

// Concatenated ReLU: [relu(x), relu(-x)], doubling the channel count.
class CReLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    std::vector<int8_t> sign_;
    int in_c_ = 0;
};

// Either activation behind one interface; channel multiplier is 2 for CReLU.
class Activation {
public:
    explicit Activation(bool crelu = false) : crelu_(crelu) {}
    Tensor forward(const Tensor& x) { return crelu_ ? crelu_op_.forward(x) : relu_op_.forward(x); }
    Tensor backward(const Tensor& dy) { return crelu_ ? crelu_op_.backward(dy) : relu_op_.backward(dy); }
    int mult() const { return crelu_ ? 2 : 1; }

private:
    bool crelu_;
    ReLU relu_op_;
    CReLU crelu_op_;
};

class MaxPool1d {
public:
    MaxPool1d(int k, int stride, int pad) : k_(k), stride_(stride), pad_(pad) {}
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    int out_len(int l) const { return (l + 2 * pad_ - k_) / stride_ + 1; }

private:
    int k_, stride_, pad_;
    int sb_ = 0, sc_ = 0, sl_ = 0;
    std::vector<int> argmax_;
};

// Non-overlapping average pooling (kernel == stride), ResNet-d skip path.
class AvgPool1d {
public:
    explicit AvgPool1d(int stride) : stride_(stride) {}
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    int stride_;
    int sl_ = 0;
};

class GlobalAvgPool {
public:
    Mat forward(const Tensor& x);
    Tensor backward(const Mat& dy);

private:
    int sl_ = 0;
};

class Dense {
public:
    Dense() = default;
    Dense(int in, int out);
    void init(Rng& rng);
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    long param_count() const { return static_cast<long>(in_) * out_ + out_; }

    int in_ = 0, out_ = 0;
    std::vector<double> w_, b_, gw_, gb_;

private:
    Mat x_;
};

// Channel-wise (depthwise) strided convolution for the feature condenser.
class DepthwiseConv1d {
public:
    DepthwiseConv1d() = default;
    DepthwiseConv1d(int c, int k, int stride, int pad);
    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    int out_len(int l) const { return (l + 2 * pad_ - k_) / stride_ + 1; }
    long param_count() const { return static_cast<long>(c_) * k_ + c_; }

    int c_ = 0, k_ = 3, stride_ = 2, pad_ = 1;
    std::vector<double> w_, b_, gw_, gb_;

private:
    Tensor x_;
};

// Per-position sigmoid gate computed by a 1x1 convolution over channels.
class SpatialGate {
public:
    SpatialGate() = default;
    explicit SpatialGate(int c);
    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    long param_count() const { return c_ + 1; }

    int c_ = 0;
    std::vector<double> w_, gw_;
    std::vector<double> b_{0.0}, gb_{0.0};  // single-element so ParamRef can address it

private:
    Tensor x_;
    std::vector<double> gate_;  // [B*L]
};

}  // namespace specdrop::nn
