#include "specdrop/model/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace specdrop::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int in_c, int out_c, int k, int stride, int pad, bool bias)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), bias_(bias) {
    w_.assign(static_cast<size_t>(out_c_) * in_c_ * k_, 0.0);
    gw_.assign(w_.size(), 0.0);
    if (bias_) {
        b_.assign(out_c_, 0.0);
        gb_.assign(out_c_, 0.0);
    }
}

void Conv1d::init(Rng& rng) {
    double std = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_));
    for (auto& x : w_) x = std * rng.normal();
    for (auto& x : b_) x = 0.0;
}

long Conv1d::param_count() const {
    return static_cast<long>(out_c_) * in_c_ * k_ + (bias_ ? out_c_ : 0);
}

Tensor Conv1d::forward(const Tensor& x) {
    if (x.c != in_c_) throw std::invalid_argument("Conv1d: channel mismatch");
    const int B = x.b, L = x.l, Lo = out_len(L);
    sb_ = B;
    sl_ = L;
    slo_ = Lo;

    const int rows = in_c_ * k_;
    const size_t ncols = static_cast<size_t>(B) * Lo;
    cols_.assign(static_cast<size_t>(rows) * ncols, 0.0);
    for (int ci = 0; ci < in_c_; ++ci) {
        for (int kk = 0; kk < k_; ++kk) {
            double* dst = cols_.data() + (static_cast<size_t>(ci) * k_ + kk) * ncols;
            for (int b = 0; b < B; ++b) {
                const double* src = x.row(b, ci);
                double* d = dst + static_cast<size_t>(b) * Lo;
                for (int lo = 0; lo < Lo; ++lo) {
                    int j = lo * stride_ + kk - pad_;
                    d[lo] = (j >= 0 && j < L) ? src[j] : 0.0;
                }
            }
        }
    }

    std::vector<double> ymat(static_cast<size_t>(out_c_) * ncols);
    {
        CMapRM W(w_.data(), out_c_, rows);
        CMapRM C(cols_.data(), rows, static_cast<Eigen::Index>(ncols));
        MapRM Y(ymat.data(), out_c_, static_cast<Eigen::Index>(ncols));
        Y.noalias() = W * C;
    }

    Tensor y(B, out_c_, Lo);
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < out_c_; ++co) {
            const double* src = ymat.data() + static_cast<size_t>(co) * ncols + static_cast<size_t>(b) * Lo;
            double* dst = y.row(b, co);
            double bias = bias_ ? b_[co] : 0.0;
            for (int lo = 0; lo < Lo; ++lo) dst[lo] = src[lo] + bias;
        }
    }
    return y;
}

Tensor Conv1d::backward(const Tensor& dy) {
    const int B = sb_, L = sl_, Lo = slo_;
    const int rows = in_c_ * k_;
    const size_t ncols = static_cast<size_t>(B) * Lo;

    std::vector<double> gmat(static_cast<size_t>(out_c_) * ncols);
    for (int b = 0; b < B; ++b)
        for (int co = 0; co < out_c_; ++co) {
            const double* src = dy.row(b, co);
            double* dst = gmat.data() + static_cast<size_t>(co) * ncols + static_cast<size_t>(b) * Lo;
            for (int lo = 0; lo < Lo; ++lo) dst[lo] = src[lo];
        }

    {
        CMapRM G(gmat.data(), out_c_, static_cast<Eigen::Index>(ncols));
        CMapRM C(cols_.data(), rows, static_cast<Eigen::Index>(ncols));
        MapRM GW(gw_.data(), out_c_, rows);
        GW.noalias() += G * C.transpose();
    }
    if (bias_) {
        for (int co = 0; co < out_c_; ++co) {
            const double* src = gmat.data() + static_cast<size_t>(co) * ncols;
            double s = 0.0;
            for (size_t i = 0; i < ncols; ++i) s += src[i];
            gb_[co] += s;
        }
    }

    std::vector<double> dcols(static_cast<size_t>(rows) * ncols);
    {
        CMapRM W(w_.data(), out_c_, rows);
        CMapRM G(gmat.data(), out_c_, static_cast<Eigen::Index>(ncols));
        MapRM DC(dcols.data(), rows, static_cast<Eigen::Index>(ncols));
        DC.noalias() = W.transpose() * G;
    }

    Tensor dx(B, in_c_, L);
    for (int ci = 0; ci < in_c_; ++ci)
        for (int kk = 0; kk < k_; ++kk) {
            const double* src = dcols.data() + (static_cast<size_t>(ci) * k_ + kk) * ncols;
            for (int b = 0; b < B; ++b) {
                double* dst = dx.row(b, ci);
                const double* s = src + static_cast<size_t>(b) * Lo;
                for (int lo = 0; lo < Lo; ++lo) {
                    int j = lo * stride_ + kk - pad_;
                    if (j >= 0 && j < L) dst[j] += s[lo];
                }
            }
        }
    return dx;
}

void Conv1d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &w_, &gw_});
    if (bias_) out.push_back({prefix + ".b", &b_, &gb_});
}

// ------------------------------------------------------------ BatchNorm1d

BatchNorm1d::BatchNorm1d(int c) : c_(c) {
    gamma_.assign(c, 1.0);
    beta_.assign(c, 0.0);
    ggamma_.assign(c, 0.0);
    gbeta_.assign(c, 0.0);
    run_mean_.assign(c, 0.0);
    run_var_.assign(c, 1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, bool training) {
    if (x.c != c_) throw std::invalid_argument("BatchNorm1d: channel mismatch");
    Tensor y(x.b, x.c, x.l);
    trained_pass_ = training;
    const double n = static_cast<double>(x.b) * x.l;

    if (training) {
        xhat_ = Tensor(x.b, x.c, x.l);
        invstd_.assign(c_, 0.0);
        for (int c = 0; c < c_; ++c) {
            double mean = 0.0;
            for (int b = 0; b < x.b; ++b) {
                const double* row = x.row(b, c);
                for (int j = 0; j < x.l; ++j) mean += row[j];
            }
            mean /= n;
            double var = 0.0;
            for (int b = 0; b < x.b; ++b) {
                const double* row = x.row(b, c);
                for (int j = 0; j < x.l; ++j) var += (row[j] - mean) * (row[j] - mean);
            }
            var /= n;
            double istd = 1.0 / std::sqrt(var + eps_);
            invstd_[c] = istd;
            for (int b = 0; b < x.b; ++b) {
                const double* row = x.row(b, c);
                double* xh = xhat_.row(b, c);
                double* yo = y.row(b, c);
                for (int j = 0; j < x.l; ++j) {
                    xh[j] = (row[j] - mean) * istd;
                    yo[j] = gamma_[c] * xh[j] + beta_[c];
                }
            }
            run_mean_[c] = (1.0 - momentum_) * run_mean_[c] + momentum_ * mean;
            double unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
            run_var_[c] = (1.0 - momentum_) * run_var_[c] + momentum_ * unbiased;
        }
    } else {
        for (int c = 0; c < c_; ++c) {
            double istd = 1.0 / std::sqrt(run_var_[c] + eps_);
            double mean = run_mean_[c];
            for (int b = 0; b < x.b; ++b) {
                const double* row = x.row(b, c);
                double* yo = y.row(b, c);
                for (int j = 0; j < x.l; ++j) yo[j] = gamma_[c] * (row[j] - mean) * istd + beta_[c];
            }
        }
    }
    return y;
}

Tensor BatchNorm1d::backward(const Tensor& dy) {
    if (!trained_pass_) throw std::logic_error("BatchNorm1d: backward without a training forward");
    const int B = dy.b, L = dy.l;
    const double n = static_cast<double>(B) * L;
    Tensor dx(B, c_, L);
    for (int c = 0; c < c_; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int b = 0; b < B; ++b) {
            const double* g = dy.row(b, c);
            const double* xh = xhat_.row(b, c);
            for (int j = 0; j < L; ++j) {
                sum_dy += g[j];
                sum_dy_xhat += g[j] * xh[j];
            }
        }
        gbeta_[c] += sum_dy;
        ggamma_[c] += sum_dy_xhat;
        const double scale = gamma_[c] * invstd_[c] / n;
        for (int b = 0; b < B; ++b) {
            const double* g = dy.row(b, c);
            const double* xh = xhat_.row(b, c);
            double* d = dx.row(b, c);
            for (int j = 0; j < L; ++j) d[j] = scale * (n * g[j] - sum_dy - xh[j] * sum_dy_xhat);
        }
    }
    return dx;
}

void BatchNorm1d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
    out.push_back({prefix + ".beta", &beta_, &gbeta_});
}

// ----------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x) {
    Tensor y = x;
    mask_.assign(x.size(), 0);
    for (size_t i = 0; i < x.size(); ++i) {
        if (y.v[i] > 0.0)
            mask_[i] = 1;
        else
            y.v[i] = 0.0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.size(); ++i)
        if (!mask_[i]) dx.v[i] = 0.0;
    return dx;
}

// ----------------------------------------------------------------- CReLU

Tensor CReLU::forward(const Tensor& x) {
    in_c_ = x.c;
    sign_.assign(x.size(), 0);
    Tensor y(x.b, 2 * x.c, x.l);
    for (int b = 0; b < x.b; ++b)
        for (int c = 0; c < x.c; ++c) {
            const double* row = x.row(b, c);
            double* pos = y.row(b, c);
            double* neg = y.row(b, c + x.c);
            int8_t* sg = sign_.data() + (static_cast<size_t>(b) * x.c + c) * x.l;
            for (int j = 0; j < x.l; ++j) {
                if (row[j] > 0.0) {
                    pos[j] = row[j];
                    sg[j] = 1;
                } else if (row[j] < 0.0) {
                    neg[j] = -row[j];
                    sg[j] = -1;
                }
            }
        }
    return y;
}

Tensor CReLU::backward(const Tensor& dy) {
    const int C = in_c_;
    Tensor dx(dy.b, C, dy.l);
    for (int b = 0; b < dy.b; ++b)
        for (int c = 0; c < C; ++c) {
            const double* gpos = dy.row(b, c);
            const double* gneg = dy.row(b, c + C);
            const int8_t* sg = sign_.data() + (static_cast<size_t>(b) * C + c) * dy.l;
            double* d = dx.row(b, c);
            for (int j = 0; j < dy.l; ++j) {
                if (sg[j] > 0)
                    d[j] = gpos[j];
                else if (sg[j] < 0)
                    d[j] = -gneg[j];
            }
        }
    return dx;
}

// -------------------------------------------------------------- MaxPool1d

Tensor MaxPool1d::forward(const Tensor& x) {
    const int B = x.b, C = x.c, L = x.l, Lo = out_len(L);
    sb_ = B;
    sc_ = C;
    sl_ = L;
    Tensor y(B, C, Lo);
    argmax_.assign(static_cast<size_t>(B) * C * Lo, 0);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const double* row = x.row(b, c);
            double* yo = y.row(b, c);
            int* am = argmax_.data() + (static_cast<size_t>(b) * C + c) * Lo;
            for (int lo = 0; lo < Lo; ++lo) {
                double best = -std::numeric_limits<double>::infinity();
                int bi = -1;
                for (int kk = 0; kk < k_; ++kk) {
                    int j = lo * stride_ + kk - pad_;
                    if (j < 0 || j >= L) continue;
                    if (row[j] > best) {
                        best = row[j];
                        bi = j;
                    }
                }
                yo[lo] = best;
                am[lo] = bi;
            }
        }
    return y;
}

Tensor MaxPool1d::backward(const Tensor& dy) {
    Tensor dx(sb_, sc_, sl_);
    const int Lo = dy.l;
    for (int b = 0; b < sb_; ++b)
        for (int c = 0; c < sc_; ++c) {
            const double* g = dy.row(b, c);
            double* d = dx.row(b, c);
            const int* am = argmax_.data() + (static_cast<size_t>(b) * sc_ + c) * Lo;
            for (int lo = 0; lo < Lo; ++lo)
                if (am[lo] >= 0) d[am[lo]] += g[lo];
        }
    return dx;
}

// -------------------------------------------------------------- AvgPool1d

Tensor AvgPool1d::forward(const Tensor& x) {
    sl_ = x.l;
    const int Lo = x.l / stride_;
    Tensor y(x.b, x.c, Lo);
    for (int b = 0; b < x.b; ++b)
        for (int c = 0; c < x.c; ++c) {
            const double* row = x.row(b, c);
            double* yo = y.row(b, c);
            for (int lo = 0; lo < Lo; ++lo) {
                double s = 0.0;
                for (int kk = 0; kk < stride_; ++kk) s += row[lo * stride_ + kk];
                yo[lo] = s / stride_;
            }
        }
    return y;
}

Tensor AvgPool1d::backward(const Tensor& dy) {
    Tensor dx(dy.b, dy.c, sl_);
    for (int b = 0; b < dy.b; ++b)
        for (int c = 0; c < dy.c; ++c) {
            const double* g = dy.row(b, c);
            double* d = dx.row(b, c);
            for (int lo = 0; lo < dy.l; ++lo)
                for (int kk = 0; kk < stride_; ++kk) d[lo * stride_ + kk] = g[lo] / stride_;
        }
    return dx;
}

// ---------------------------------------------------------- GlobalAvgPool

Mat GlobalAvgPool::forward(const Tensor& x) {
    sl_ = x.l;
    Mat y(x.b, x.c);
    for (int b = 0; b < x.b; ++b)
        for (int c = 0; c < x.c; ++c) {
            const double* row = x.row(b, c);
            double s = 0.0;
            for (int j = 0; j < x.l; ++j) s += row[j];
            y.at(b, c) = s / x.l;
        }
    return y;
}

Tensor GlobalAvgPool::backward(const Mat& dy) {
    Tensor dx(dy.r, dy.c, sl_);
    for (int b = 0; b < dy.r; ++b)
        for (int c = 0; c < dy.c; ++c) {
            double g = dy.at(b, c) / sl_;
            double* d = dx.row(b, c);
            for (int j = 0; j < sl_; ++j) d[j] = g;
        }
    return dx;
}

// ------------------------------------------------------------------ Dense

Dense::Dense(int in, int out) : in_(in), out_(out) {
    w_.assign(static_cast<size_t>(in) * out, 0.0);
    b_.assign(out, 0.0);
    gw_.assign(w_.size(), 0.0);
    gb_.assign(out, 0.0);
}

void Dense::init(Rng& rng) {
    double std = std::sqrt(2.0 / in_);
    for (auto& x : w_) x = std * rng.normal();
}

Mat Dense::forward(const Mat& x) {
    if (x.c != in_) throw std::invalid_argument("Dense: input width mismatch");
    x_ = x;
    Mat y(x.r, out_);
    CMapRM X(x.v.data(), x.r, x.c);
    CMapRM W(w_.data(), out_, in_);
    MapRM Y(y.v.data(), y.r, y.c);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < y.r; ++i)
        for (int j = 0; j < out_; ++j) y.at(i, j) += b_[j];
    return y;
}

Mat Dense::backward(const Mat& dy) {
    Mat dx(x_.r, in_);
    CMapRM G(dy.v.data(), dy.r, dy.c);
    CMapRM X(x_.v.data(), x_.r, x_.c);
    CMapRM W(w_.data(), out_, in_);
    MapRM GW(gw_.data(), out_, in_);
    MapRM DX(dx.v.data(), dx.r, dx.c);
    GW.noalias() += G.transpose() * X;
    DX.noalias() = G * W;
    for (int i = 0; i < dy.r; ++i)
        for (int j = 0; j < out_; ++j) gb_[j] += dy.at(i, j);
    return dx;
}

void Dense::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
}

// -------------------------------------------------------- DepthwiseConv1d

DepthwiseConv1d::DepthwiseConv1d(int c, int k, int stride, int pad)
    : c_(c), k_(k), stride_(stride), pad_(pad) {
    w_.assign(static_cast<size_t>(c) * k, 0.0);
    b_.assign(c, 0.0);
    gw_.assign(w_.size(), 0.0);
    gb_.assign(c, 0.0);
}

void DepthwiseConv1d::init(Rng& rng) {
    double std = std::sqrt(2.0 / k_);
    for (auto& x : w_) x = std * rng.normal();
}

Tensor DepthwiseConv1d::forward(const Tensor& x) {
    if (x.c != c_) throw std::invalid_argument("DepthwiseConv1d: channel mismatch");
    x_ = x;
    const int Lo = out_len(x.l);
    Tensor y(x.b, c_, Lo);
    for (int b = 0; b < x.b; ++b)
        for (int c = 0; c < c_; ++c) {
            const double* row = x.row(b, c);
            const double* w = w_.data() + static_cast<size_t>(c) * k_;
            double* yo = y.row(b, c);
            for (int lo = 0; lo < Lo; ++lo) {
                double s = b_[c];
                for (int kk = 0; kk < k_; ++kk) {
                    int j = lo * stride_ + kk - pad_;
                    if (j >= 0 && j < x.l) s += w[kk] * row[j];
                }
                yo[lo] = s;
            }
        }
    return y;
}

Tensor DepthwiseConv1d::backward(const Tensor& dy) {
    Tensor dx(x_.b, c_, x_.l);
    for (int b = 0; b < dy.b; ++b)
        for (int c = 0; c < c_; ++c) {
            const double* g = dy.row(b, c);
            const double* row = x_.row(b, c);
            const double* w = w_.data() + static_cast<size_t>(c) * k_;
            double* gw = gw_.data() + static_cast<size_t>(c) * k_;
            double* d = dx.row(b, c);
            for (int lo = 0; lo < dy.l; ++lo) {
                gb_[c] += g[lo];
                for (int kk = 0; kk < k_; ++kk) {
                    int j = lo * stride_ + kk - pad_;
                    if (j < 0 || j >= x_.l) continue;
                    gw[kk] += g[lo] * row[j];
                    d[j] += g[lo] * w[kk];
                }
            }
        }
    return dx;
}

void DepthwiseConv1d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
}

// ------------------------------------------------------------ SpatialGate

SpatialGate::SpatialGate(int c) : c_(c) {
    w_.assign(c, 0.0);
    gw_.assign(c, 0.0);
}

void SpatialGate::init(Rng& rng) {
    double std = std::sqrt(1.0 / c_);
    for (auto& x : w_) x = std * rng.normal();
    b_[0] = 0.0;
}

Tensor SpatialGate::forward(const Tensor& x) {
    if (x.c != c_) throw std::invalid_argument("SpatialGate: channel mismatch");
    x_ = x;
    gate_.assign(static_cast<size_t>(x.b) * x.l, 0.0);
    Tensor y(x.b, x.c, x.l);
    for (int b = 0; b < x.b; ++b) {
        for (int j = 0; j < x.l; ++j) {
            double z = b_[0];
            for (int c = 0; c < c_; ++c) z += w_[c] * x.at(b, c, j);
            gate_[static_cast<size_t>(b) * x.l + j] = 1.0 / (1.0 + std::exp(-z));
        }
        for (int c = 0; c < c_; ++c) {
            const double* row = x.row(b, c);
            double* yo = y.row(b, c);
            const double* g = gate_.data() + static_cast<size_t>(b) * x.l;
            for (int j = 0; j < x.l; ++j) yo[j] = row[j] * g[j];
        }
    }
    return y;
}

Tensor SpatialGate::backward(const Tensor& dy) {
    Tensor dx(x_.b, c_, x_.l);
    std::vector<double> dz(static_cast<size_t>(x_.b) * x_.l, 0.0);
    for (int b = 0; b < x_.b; ++b) {
        const double* g = gate_.data() + static_cast<size_t>(b) * x_.l;
        double* dzb = dz.data() + static_cast<size_t>(b) * x_.l;
        for (int c = 0; c < c_; ++c) {
            const double* gy = dy.row(b, c);
            const double* row = x_.row(b, c);
            for (int j = 0; j < x_.l; ++j) dzb[j] += gy[j] * row[j];
        }
        for (int j = 0; j < x_.l; ++j) dzb[j] *= g[j] * (1.0 - g[j]);
        for (int c = 0; c < c_; ++c) {
            const double* gy = dy.row(b, c);
            const double* row = x_.row(b, c);
            double* d = dx.row(b, c);
            for (int j = 0; j < x_.l; ++j) {
                d[j] = gy[j] * g[j] + w_[c] * dzb[j];
                gw_[c] += dzb[j] * row[j];
            }
        }
        for (int j = 0; j < x_.l; ++j) gb_[0] += dzb[j];
    }
    return dx;
}

void SpatialGate::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
}

}  // namespace specdrop::nn
