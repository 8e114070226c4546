#include "specdrop/dropout/dropout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace specdrop::dropout {

std::string to_string(Technique t) {
    switch (t) {
        case Technique::DropCluster: return "dropcluster";
        case Technique::Fad: return "fad";
        case Technique::Wfd: return "wfd";
        case Technique::Wfad: return "wfad";
    }
    return "?";
}

Technique technique_from_string(const std::string& s) {
    if (s == "dropcluster" || s == "dc") return Technique::DropCluster;
    if (s == "fad") return Technique::Fad;
    if (s == "wfd") return Technique::Wfd;
    if (s == "wfad") return Technique::Wfad;
    throw std::invalid_argument("unknown dropout technique: " + s);
}

std::string to_string(Placement p) { return p == Placement::Inside ? "inside" : "outside"; }

Placement placement_from_string(const std::string& s) {
    if (s == "inside" || s == "i") return Placement::Inside;
    if (s == "outside" || s == "o") return Placement::Outside;
    throw std::invalid_argument("unknown placement: " + s);
}

std::string DropoutConfig::validate() const {
    if (p_max < 0.0 || p_max > 1.0) throw std::invalid_argument("p_max must lie in [0, 1]");
    if (layer_multiplier < 1 || layer_multiplier > 4)
        throw std::invalid_argument("layer_multiplier must lie in 1..4");
    if (layer_multiplier * p_max > 1.0)
        throw std::invalid_argument("layer_multiplier * p_max exceeds 1; the effective rate would be invalid");
    if (q_threshold < 0.0 || q_threshold > 1.0) throw std::invalid_argument("q_threshold must lie in [0, 1]");
    if (activation_epoch < 0) throw std::invalid_argument("activation_epoch must be >= 0");
    if (p_max > 0.10)
        return "p_max " + std::to_string(p_max) + " is above 0.10; rates above 0.10 degraded performance";
    return {};
}

double schedule_lambda(int epoch, int activation_epoch, int total_epochs) {
    if (activation_epoch >= total_epochs)
        throw std::invalid_argument("activation_epoch must be smaller than total_epochs");
    if (epoch < 0 || epoch > total_epochs)
        throw std::invalid_argument("epoch out of range for schedule");
    if (epoch < activation_epoch) return 0.0;
    double lam = static_cast<double>(epoch - activation_epoch) /
                 static_cast<double>(total_epochs - activation_epoch);
    return std::clamp(lam, 0.0, 1.0);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of empty set");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double pos = q * static_cast<double>(v.size() - 1);
    size_t i = static_cast<size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    double frac = pos - static_cast<double>(i);
    return v[i] + frac * (v[i + 1] - v[i]);
}

ChannelScore score_channels(const Tensor& x, double q, double p_max, double lambda_sched,
                            ThresholdMode mode) {
    if (x.c < 1 || x.b < 1 || x.l < 1) throw std::invalid_argument("score_channels: empty input");
    constexpr double kEps = 1e-12;

    ChannelScore cs;
    cs.raw_means.resize(x.c);
    cs.s.resize(x.c);
    cs.s_hat.resize(x.c);
    cs.effective_rates.resize(x.c);

    for (int c = 0; c < x.c; ++c) {
        double sum = 0.0;
        for (int b = 0; b < x.b; ++b) {
            const double* row = x.row(b, c);
            for (int j = 0; j < x.l; ++j) sum += row[j];
        }
        cs.raw_means[c] = sum / (static_cast<double>(x.b) * x.l);
        if (!std::isfinite(cs.raw_means[c])) throw std::invalid_argument("score_channels: non-finite activations");
    }

    // log ratios on magnitudes, floored so the log stays defined
    double denom = 0.0;
    for (int c = 0; c < x.c; ++c) denom += std::abs(cs.raw_means[c]);
    if (denom < kEps) throw std::invalid_argument("score_channels: all-zero activations");
    for (int c = 0; c < x.c; ++c)
        cs.s[c] = std::log(std::max(std::abs(cs.raw_means[c]) / denom, kEps));

    double lo = *std::min_element(cs.s.begin(), cs.s.end());
    double hi = *std::max_element(cs.s.begin(), cs.s.end());
    if (hi - lo < kEps) {
        // degenerate equal-score batch: nothing stands out, nothing is dropped
        std::fill(cs.s_hat.begin(), cs.s_hat.end(), 0.0);
    } else {
        for (int c = 0; c < x.c; ++c) cs.s_hat[c] = (cs.s[c] - lo) / (hi - lo);
        double cut = mode == ThresholdMode::Quantile ? quantile(cs.s_hat, q) : q;
        for (int c = 0; c < x.c; ++c)
            if (cs.s_hat[c] < cut) cs.s_hat[c] = 0.0;
    }
    for (int c = 0; c < x.c; ++c) cs.effective_rates[c] = p_max * lambda_sched * cs.s_hat[c];
    return cs;
}

void alpha_affine(double p_eff, double& a, double& b) {
    double keep = 1.0 - p_eff;
    a = 1.0 / std::sqrt(keep + kAlphaPrime * kAlphaPrime * keep * (1.0 - keep));
    b = -a * (1.0 - keep) * kAlphaPrime;
}

Tensor apply_fad_ex(const Tensor& x, double p_eff, Rng& rng, FeatureDropState* state) {
    if (p_eff < 0.0 || p_eff >= 1.0) throw std::invalid_argument("apply_fad: p_eff must lie in [0, 1)");
    Tensor y = x;
    if (state) {
        state->dropped.assign(static_cast<size_t>(x.b) * x.c, 0);
        state->rates.assign(1, p_eff);
    }
    if (p_eff == 0.0) {
        if (state) {
            state->scale_a.assign(1, 1.0);
            state->shift_b.assign(1, 0.0);
        }
        return y;
    }
    double a, b;
    alpha_affine(p_eff, a, b);
    for (int i = 0; i < x.b; ++i) {
        for (int c = 0; c < x.c; ++c) {
            bool drop = rng.bernoulli(p_eff);
            double* row = y.row(i, c);
            if (drop) {
                for (int j = 0; j < x.l; ++j) row[j] = kAlphaPrime;
                if (state) state->dropped[static_cast<size_t>(i) * x.c + c] = 1;
            }
            for (int j = 0; j < x.l; ++j) row[j] = a * row[j] + b;
        }
    }
    if (state) {
        state->scale_a.assign(1, a);
        state->shift_b.assign(1, b);
    }
    return y;
}

Tensor apply_fad(const Tensor& x, double p_eff, Rng& rng) {
    return apply_fad_ex(x, p_eff, rng, nullptr);
}

Tensor apply_wfd_ex(const Tensor& x, const ChannelScore& scores, Rng& rng, FeatureDropState* state) {
    if (static_cast<int>(scores.effective_rates.size()) != x.c)
        throw std::invalid_argument("apply_wfd: score/channel mismatch");
    for (double r : scores.effective_rates)
        if (r >= 1.0) throw std::invalid_argument("apply_wfd: effective rate of 1 would drop a channel always");
    Tensor y = x;
    if (state) {
        state->dropped.assign(static_cast<size_t>(x.b) * x.c, 0);
        state->rates = scores.effective_rates;
        state->scale_a.assign(x.c, 1.0);
        state->shift_b.assign(x.c, 0.0);
    }
    for (int c = 0; c < x.c; ++c) {
        double p = scores.effective_rates[c];
        if (p <= 0.0) continue;
        double keep_scale = 1.0 / (1.0 - p);
        if (state) state->scale_a[c] = keep_scale;
        for (int i = 0; i < x.b; ++i) {
            bool drop = rng.bernoulli(p);
            double* row = y.row(i, c);
            if (drop) {
                for (int j = 0; j < x.l; ++j) row[j] = 0.0;
                if (state) state->dropped[static_cast<size_t>(i) * x.c + c] = 1;
            } else {
                for (int j = 0; j < x.l; ++j) row[j] *= keep_scale;
            }
        }
    }
    return y;
}

Tensor apply_wfd(const Tensor& x, const ChannelScore& scores, Rng& rng) {
    return apply_wfd_ex(x, scores, rng, nullptr);
}

Tensor apply_wfad_ex(const Tensor& x, const ChannelScore& scores, Rng& rng, FeatureDropState* state) {
    if (static_cast<int>(scores.effective_rates.size()) != x.c)
        throw std::invalid_argument("apply_wfad: score/channel mismatch");
    for (double r : scores.effective_rates)
        if (r >= 1.0) throw std::invalid_argument("apply_wfad: effective rate of 1 is invalid");
    Tensor y = x;
    if (state) {
        state->dropped.assign(static_cast<size_t>(x.b) * x.c, 0);
        state->rates = scores.effective_rates;
        state->scale_a.assign(x.c, 1.0);
        state->shift_b.assign(x.c, 0.0);
    }
    for (int c = 0; c < x.c; ++c) {
        double p = scores.effective_rates[c];
        if (p <= 0.0) continue;
        double a, b;
        alpha_affine(p, a, b);
        if (state) {
            state->scale_a[c] = a;
            state->shift_b[c] = b;
        }
        for (int i = 0; i < x.b; ++i) {
            bool drop = rng.bernoulli(p);
            double* row = y.row(i, c);
            if (drop) {
                for (int j = 0; j < x.l; ++j) row[j] = kAlphaPrime;
                if (state) state->dropped[static_cast<size_t>(i) * x.c + c] = 1;
            }
            for (int j = 0; j < x.l; ++j) row[j] = a * row[j] + b;
        }
    }
    return y;
}

Tensor apply_wfad(const Tensor& x, const ChannelScore& scores, Rng& rng) {
    return apply_wfad_ex(x, scores, rng, nullptr);
}

}  // namespace specdrop::dropout
