#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specdrop/rng.hpp"
#include "specdrop/tensor.hpp"

namespace specdrop::dropout {

// Self-normalizing activation constants; alpha' is the SELU negative
// saturation value used as the replacement for dropped channels.
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kAlphaPrime = -kSeluLambda * kSeluAlpha;

enum class Technique { DropCluster, Fad, Wfd, Wfad };
enum class Placement { Inside, Outside };
enum class ThresholdMode { Quantile, Absolute };

std::string to_string(Technique t);
Technique technique_from_string(const std::string& s);
std::string to_string(Placement p);
Placement placement_from_string(const std::string& s);

struct DropoutConfig {
    Technique technique = Technique::Fad;
    double p_max = 0.05;
    Placement placement = Placement::Outside;
    double q_threshold = 0.90;
    int activation_epoch = 10;
    int layer_multiplier = 1;
    ThresholdMode threshold_mode = ThresholdMode::Quantile;
    bool deterministic_clusters = false;  // reproduces the fixed-feature dropCluster pathology

    // Throws on invalid settings; returns a warning string for permitted but
    // discouraged ones (rates above 0.10), empty otherwise.
    std::string validate() const;
};

struct ScheduleState {
    int current_epoch = 0;
    int total_epochs = 100;
    double lambda_sched = 0.0;
};

// Linear warm-up: 0 before the activation epoch, 1 at the final epoch.
double schedule_lambda(int epoch, int activation_epoch, int total_epochs);

inline ScheduleState update_schedule(ScheduleState st, int activation_epoch) {
    st.lambda_sched = schedule_lambda(st.current_epoch, activation_epoch, st.total_epochs);
    return st;
}

// Channel rating for the weighted techniques: batch-mean activations are
// converted to log ratios, unit-normalized, thresholded at the q-quantile and
// scaled into per-channel effective rates.
struct ChannelScore {
    std::vector<double> raw_means;        // signed channel means
    std::vector<double> s;                // log(|mean| / sum |mean|)
    std::vector<double> s_hat;            // normalized scores, zeroed below threshold
    std::vector<double> effective_rates;  // p_max * lambda_sched * s_hat
};

ChannelScore score_channels(const Tensor& x, double q, double p_max, double lambda_sched,
                            ThresholdMode mode = ThresholdMode::Quantile);

// Linear-interpolation empirical quantile of v at level q.
double quantile(std::vector<double> v, double q);

// Per-(sample, channel) mask records kept by the *_ex variants so the model
// wrappers can run the exact backward pass.
struct FeatureDropState {
    std::vector<uint8_t> dropped;  // [b * c]
    std::vector<double> scale_a;   // per channel (wfd/wfad) or single value broadcast (fad)
    std::vector<double> shift_b;
    std::vector<double> rates;
};

// Feature Alpha Dropout: whole channels are replaced by alpha' with
// probability p_eff, then an affine transform restores mean and variance.
Tensor apply_fad(const Tensor& x, double p_eff, Rng& rng);
Tensor apply_fad_ex(const Tensor& x, double p_eff, Rng& rng, FeatureDropState* state);

// Weighted Feature Dropout: channels are dropped at their score-derived rate
// and survivors are rescaled by 1/keep to stay unbiased.
Tensor apply_wfd(const Tensor& x, const ChannelScore& scores, Rng& rng);
Tensor apply_wfd_ex(const Tensor& x, const ChannelScore& scores, Rng& rng, FeatureDropState* state);

// Weighted Feature Alpha Dropout: wFD selection with the alpha replacement
// and per-channel moment-restoring affine from FAD.
Tensor apply_wfad(const Tensor& x, const ChannelScore& scores, Rng& rng);
Tensor apply_wfad_ex(const Tensor& x, const ChannelScore& scores, Rng& rng, FeatureDropState* state);

// Moment-matching affine for keep probability (1 - p_eff).
void alpha_affine(double p_eff, double& a, double& b);

}  // namespace specdrop::dropout
