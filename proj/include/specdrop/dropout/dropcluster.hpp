#pragma once

#include <vector>

#include "specdrop/rng.hpp"
#include "specdrop/tensor.hpp"

namespace specdrop::dropout {

// Contiguous partition of the length axis, one per channel. A cluster k of
// channel c spans [starts[c][k], starts[c][k+1]).
struct ClusterMap {
    int length = 0;
    std::vector<std::vector<int>> starts;

    bool fitted() const { return length > 0; }
    int clusters(int channel) const { return static_cast<int>(starts[channel].size()); }
    int cluster_size(int channel, int k) const {
        int next = k + 1 < clusters(channel) ? starts[channel][k + 1] : length;
        return next - starts[channel][k];
    }
};

// Agglomerative grouping of adjacent positions: neighbouring positions whose
// activations correlate across the batch (Pearson r above `merge_threshold`)
// are merged into one contiguous cluster.
ClusterMap fit_clusters(const Tensor& features, double merge_threshold = 0.5);

struct ClusterDropState {
    // per (sample, channel): dropped flag and scale per cluster
    std::vector<std::vector<uint8_t>> dropped;  // [b * c][clusters]
    std::vector<std::vector<double>> rates;     // [c][clusters] (shared by samples)
};

// Drops whole clusters at rate p_max * lambda_sched * (size / length) and
// rescales survivors by 1/keep. The deterministic mode always drops the
// largest-rate clusters instead of sampling, reproducing the fixed-feature
// behaviour reported for the original implementation.
Tensor apply_dropcluster(const Tensor& x, const ClusterMap& map, double p_max, double lambda_sched,
                         Rng& rng, bool deterministic = false, ClusterDropState* state = nullptr);

}  // namespace specdrop::dropout
