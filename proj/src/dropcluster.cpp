#include "specdrop/dropout/dropcluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace specdrop::dropout {

ClusterMap fit_clusters(const Tensor& features, double merge_threshold) {
    if (features.b < 8)
        throw std::invalid_argument("fit_clusters: need at least 8 samples to estimate correlations");
    const int B = features.b, C = features.c, L = features.l;

    ClusterMap map;
    map.length = L;
    map.starts.resize(C);

    std::vector<double> mean(L), var(L);
    for (int c = 0; c < C; ++c) {
        for (int j = 0; j < L; ++j) {
            double m = 0.0;
            for (int b = 0; b < B; ++b) m += features.at(b, c, j);
            m /= B;
            double v = 0.0;
            for (int b = 0; b < B; ++b) {
                double d = features.at(b, c, j) - m;
                v += d * d;
            }
            mean[j] = m;
            var[j] = v / B;
        }

        auto& st = map.starts[c];
        st.push_back(0);
        constexpr double kVarEps = 1e-18;
        for (int j = 0; j + 1 < L; ++j) {
            double r;
            bool flat_a = var[j] < kVarEps, flat_b = var[j + 1] < kVarEps;
            if (flat_a && flat_b) {
                r = 1.0;  // both constant across the batch: indistinguishable, merge
            } else if (flat_a || flat_b) {
                r = 0.0;
            } else {
                double cov = 0.0;
                for (int b = 0; b < B; ++b)
                    cov += (features.at(b, c, j) - mean[j]) * (features.at(b, c, j + 1) - mean[j + 1]);
                cov /= B;
                r = cov / std::sqrt(var[j] * var[j + 1]);
            }
            if (r < merge_threshold) st.push_back(j + 1);
        }
    }
    return map;
}

Tensor apply_dropcluster(const Tensor& x, const ClusterMap& map, double p_max, double lambda_sched,
                         Rng& rng, bool deterministic, ClusterDropState* state) {
    if (!map.fitted()) throw std::invalid_argument("apply_dropcluster: cluster map has not been fitted");
    if (map.length != x.l || static_cast<int>(map.starts.size()) != x.c)
        throw std::invalid_argument("apply_dropcluster: map does not match input shape");

    Tensor y = x;
    if (state) {
        state->dropped.assign(static_cast<size_t>(x.b) * x.c, {});
        state->rates.assign(x.c, {});
    }
    if (p_max * lambda_sched <= 0.0) return y;

    for (int c = 0; c < x.c; ++c) {
        const int K = map.clusters(c);
        std::vector<double> rates(K);
        for (int k = 0; k < K; ++k)
            rates[k] = p_max * lambda_sched * map.cluster_size(c, k) / static_cast<double>(x.l);
        if (state) state->rates[c] = rates;

        // deterministic mode: the same top-rate clusters go every time
        std::vector<uint8_t> det_drop;
        if (deterministic) {
            det_drop.assign(K, 0);
            int n_drop = static_cast<int>(std::ceil(p_max * lambda_sched * K));
            std::vector<int> order(K);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return rates[a] > rates[b]; });
            for (int i = 0; i < std::min(n_drop, K); ++i) det_drop[order[i]] = 1;
        }

        for (int b = 0; b < x.b; ++b) {
            std::vector<uint8_t> flags(K, 0);
            double* row = y.row(b, c);
            for (int k = 0; k < K; ++k) {
                bool drop = deterministic ? det_drop[k] != 0 : rng.bernoulli(rates[k]);
                int lo = map.starts[c][k];
                int hi = k + 1 < K ? map.starts[c][k + 1] : x.l;
                if (drop) {
                    std::fill(row + lo, row + hi, 0.0);
                    flags[k] = 1;
                } else if (rates[k] > 0.0) {
                    double s = 1.0 / (1.0 - rates[k]);
                    for (int j = lo; j < hi; ++j) row[j] *= s;
                }
            }
            if (state) state->dropped[static_cast<size_t>(b) * x.c + c] = std::move(flags);
        }
    }
    return y;
}

}  // namespace specdrop::dropout
