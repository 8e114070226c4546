#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "specdrop/dropout/dropcluster.hpp"
#include "specdrop/dropout/dropout.hpp"

using namespace specdrop;
using namespace specdrop::dropout;

namespace {

Tensor filled(int b, int c, int l, double v) {
    Tensor t(b, c, l);
    std::fill(t.v.begin(), t.v.end(), v);
    return t;
}

Tensor random_tensor(int b, int c, int l, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(b, c, l);
    for (auto& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

bool binomial_close(double observed_freq, double p, int n) {
    double sigma = std::sqrt(p * (1.0 - p) / n);
    return std::abs(observed_freq - p) <= 3.0 * sigma;
}

}  // namespace

// ---------------------------------------------------------------- schedule

TEST_CASE("schedule is 0 before activation, linear after, 1 at the end") {
    CHECK(schedule_lambda(5, 10, 100) == 0.0);
    CHECK(schedule_lambda(9, 10, 100) == 0.0);
    CHECK(schedule_lambda(100, 10, 100) == 1.0);
    CHECK(schedule_lambda(55, 10, 100) == doctest::Approx(0.5).epsilon(1e-15));
    for (int e = 0; e <= 100; ++e) {
        double lam = schedule_lambda(e, 10, 100);
        double expect = e < 10 ? 0.0 : (e - 10) / 90.0;
        CHECK(lam == expect);  // exact by construction
    }
    CHECK_THROWS_AS(schedule_lambda(5, 100, 100), std::invalid_argument);
    CHECK_THROWS_AS(schedule_lambda(-1, 10, 100), std::invalid_argument);
}

TEST_CASE("dropout config validation flags bad settings and warns above 0.10") {
    DropoutConfig dc;
    dc.p_max = 0.05;
    CHECK(dc.validate().empty());
    dc.p_max = 0.3;
    CHECK_FALSE(dc.validate().empty());  // permitted but warned
    dc.layer_multiplier = 4;
    CHECK_THROWS_AS(dc.validate(), std::invalid_argument);  // 1.2 > 1
    dc.p_max = 1.5;
    dc.layer_multiplier = 1;
    CHECK_THROWS_AS(dc.validate(), std::invalid_argument);
}

// ------------------------------------------------------------------ scores

TEST_CASE("identical channel means produce no droppable channel") {
    Tensor x = filled(4, 8, 16, 0.5);
    auto cs = score_channels(x, 0.90, 0.05, 1.0);
    for (int c = 0; c < 8; ++c) {
        CHECK(cs.s_hat[c] == 0.0);
        CHECK(cs.effective_rates[c] == 0.0);
    }
}

TEST_CASE("zero schedule zeroes every effective rate") {
    Rng rng(1);
    Tensor x = random_tensor(4, 8, 16, rng, 0.1, 2.0);
    auto cs = score_channels(x, 0.90, 0.10, 0.0);
    for (double r : cs.effective_rates) CHECK(r == 0.0);
}

TEST_CASE("means 1..10 at q=0.90 leave only the top channel, matching the oracle") {
    const int C = 10;
    Tensor x(2, C, 4);
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < C; ++c)
            for (int j = 0; j < 4; ++j) x.at(b, c, j) = static_cast<double>(c + 1);

    auto cs = score_channels(x, 0.90, 0.05, 1.0);
    int nonzero = 0;
    for (int c = 0; c < C; ++c)
        if (cs.effective_rates[c] > 0.0) ++nonzero;
    CHECK(nonzero == 1);
    CHECK(cs.effective_rates[C - 1] > 0.0);

    std::vector<double> means;
    for (int c = 0; c < C; ++c) means.push_back(c + 1.0);
    auto ref = oracle::score_channels(means, 0.90, 0.05, 1.0);
    for (int c = 0; c < C; ++c) {
        CHECK(cs.s_hat[c] == doctest::Approx(ref.s_hat[c]).epsilon(1e-12));
        CHECK(cs.effective_rates[c] == doctest::Approx(ref.p_eff[c]).epsilon(1e-12));
    }
    CHECK(cs.effective_rates[C - 1] == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("all-zero activations are degenerate") {
    Tensor x = filled(2, 4, 8, 0.0);
    CHECK_THROWS_AS(score_channels(x, 0.9, 0.05, 1.0), std::invalid_argument);
}

TEST_CASE("absolute threshold mode uses q as a direct cutoff") {
    const int C = 10;
    Tensor x(2, C, 4);
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < C; ++c)
            for (int j = 0; j < 4; ++j) x.at(b, c, j) = static_cast<double>(c + 1);
    auto cs = score_channels(x, 0.90, 0.05, 1.0, ThresholdMode::Absolute);
    for (int c = 0; c < C; ++c) {
        bool kept = cs.s_hat[c] > 0.0;
        CHECK(kept == (std::log10(c + 1.0) >= 0.90));
    }
}

// --------------------------------------------------------------------- FAD

TEST_CASE("FAD with p_eff = 0 is the exact identity") {
    Rng rng(2);
    Tensor x = random_tensor(3, 6, 10, rng);
    Rng drop_rng(3);
    Tensor y = apply_fad(x, 0.0, drop_rng);
    CHECK(y.v == x.v);
}

TEST_CASE("FAD rejects p_eff = 1") {
    Tensor x = filled(1, 2, 4, 1.0);
    Rng rng(4);
    CHECK_THROWS_AS(apply_fad(x, 1.0, rng), std::invalid_argument);
}

TEST_CASE("FAD drop frequency matches the Bernoulli rate within 3 sigma") {
    const double p = 0.05;
    const int trials = 10000;
    Tensor x = filled(1, 1, 4, 0.7);
    Rng rng(5);
    int dropped = 0;
    for (int i = 0; i < trials; ++i) {
        FeatureDropState st;
        apply_fad_ex(x, p, rng, &st);
        dropped += st.dropped[0];
    }
    double freq = static_cast<double>(dropped) / trials;
    CHECK(binomial_close(freq, p, trials));
    // 3-sigma band quoted in the operation example: 0.05 +- 0.007
    CHECK(std::abs(freq - 0.05) < 0.007);
}

TEST_CASE("FAD preserves mean and variance of unit Gaussian input") {
    const double p = 0.05;
    Rng data_rng(6), drop_rng(7);
    // 1000 channels x 1000 positions = 1e6 elements
    Tensor x(1, 1000, 1000);
    for (auto& v : x.v) v = data_rng.normal();
    Tensor y = apply_fad(x, p, drop_rng);
    double mean = 0.0;
    for (double v : y.v) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y.v) var += (v - mean) * (v - mean);
    var /= static_cast<double>(y.size());
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("dropped FAD channels carry the affine-transformed saturation value") {
    const double p = 0.25;
    Tensor x = filled(1, 1, 8, 2.0);
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        FeatureDropState st;
        Tensor y = apply_fad_ex(x, p, rng, &st);
        double a, b;
        oracle::alpha_affine(p, a, b);
        double expect = st.dropped[0] ? a * kAlphaPrime + b : a * 2.0 + b;
        for (int j = 0; j < 8; ++j) CHECK(y.at(0, 0, j) == doctest::Approx(expect).epsilon(1e-12));
    }
}

// --------------------------------------------------------------------- wFD

TEST_CASE("wFD with all-zero rates is the identity") {
    Rng rng(9);
    Tensor x = random_tensor(4, 6, 8, rng, 0.5, 1.5);
    auto cs = score_channels(x, 0.90, 0.05, 0.0);
    Rng drop_rng(10);
    Tensor y = apply_wfd(x, cs, drop_rng);
    CHECK(y.v == x.v);
}

TEST_CASE("channels with zero normalized score are never dropped") {
    const int C = 10;
    Tensor x(8, C, 4);
    Rng noise(11);
    for (int b = 0; b < 8; ++b)
        for (int c = 0; c < C; ++c)
            for (int j = 0; j < 4; ++j) x.at(b, c, j) = (c + 1.0) + 0.01 * noise.uniform();
    auto cs = score_channels(x, 0.90, 0.10, 1.0);
    Rng drop_rng(12);
    for (int trial = 0; trial < 10000; ++trial) {
        FeatureDropState st;
        apply_wfd_ex(x, cs, drop_rng, &st);
        for (int b = 0; b < 8; ++b)
            for (int c = 0; c < C; ++c)
                if (cs.s_hat[c] == 0.0) CHECK(st.dropped[b * C + c] == 0);
    }
}

TEST_CASE("wFD per-channel drop frequency matches its effective rate") {
    const int C = 6;
    Tensor x(1, C, 4);
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < 4; ++j) x.at(0, c, j) = std::pow(2.0, c);
    // quantile 0.5 keeps several channels active for a stronger check
    auto cs = score_channels(x, 0.50, 0.10, 1.0);
    Rng rng(13);
    const int trials = 10000;
    std::vector<int> dropped(C, 0);
    for (int i = 0; i < trials; ++i) {
        FeatureDropState st;
        apply_wfd_ex(x, cs, rng, &st);
        for (int c = 0; c < C; ++c) dropped[c] += st.dropped[c];
    }
    for (int c = 0; c < C; ++c) {
        double p = cs.effective_rates[c];
        double freq = static_cast<double>(dropped[c]) / trials;
        if (p == 0.0)
            CHECK(freq == 0.0);
        else
            CHECK(binomial_close(freq, p, trials));
    }
}

TEST_CASE("wFD survivors are rescaled to preserve the expected activation") {
    Tensor x = filled(1, 2, 4, 1.0);
    ChannelScore cs;
    cs.effective_rates = {0.2, 0.0};
    cs.s_hat = {1.0, 0.0};
    Rng rng(14);
    FeatureDropState st;
    Tensor y = apply_wfd_ex(x, cs, rng, &st);
    if (!st.dropped[0])
        for (int j = 0; j < 4; ++j) CHECK(y.at(0, 0, j) == doctest::Approx(1.0 / 0.8));
    for (int j = 0; j < 4; ++j) CHECK(y.at(0, 1, j) == 1.0);
}

// -------------------------------------------------------------------- wFAD

TEST_CASE("wFAD at zero schedule is the identity") {
    Rng rng(15);
    Tensor x = random_tensor(2, 5, 6, rng, 0.2, 1.2);
    auto cs = score_channels(x, 0.90, 0.10, 0.0);
    Rng drop_rng(16);
    Tensor y = apply_wfad(x, cs, drop_rng);
    CHECK(y.v == x.v);
}

TEST_CASE("single-channel wFAD behaves exactly like FAD at the same rate") {
    Rng rng(17);
    Tensor x = random_tensor(4, 1, 16, rng, 0.1, 1.0);
    const double p = 0.07;
    ChannelScore cs;
    cs.effective_rates = {p};
    cs.s_hat = {1.0};

    Rng r1(42), r2(42);
    Tensor ya = apply_wfad(x, cs, r1);
    Tensor yb = apply_fad(x, p, r2);
    for (size_t i = 0; i < ya.size(); ++i) CHECK(ya.v[i] == doctest::Approx(yb.v[i]).epsilon(1e-12));
}

TEST_CASE("dropped wFAD channels carry a*alpha' + b with per-channel affines") {
    const int C = 4;
    Tensor x = filled(2, C, 4, 0.9);
    ChannelScore cs;
    cs.effective_rates = {0.0, 0.05, 0.10, 0.20};
    cs.s_hat = {0.0, 0.5, 0.75, 1.0};
    Rng rng(18);
    for (int trial = 0; trial < 400; ++trial) {
        FeatureDropState st;
        Tensor y = apply_wfad_ex(x, cs, rng, &st);
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < C; ++c) {
                double a, off;
                oracle::alpha_affine(cs.effective_rates[c], a, off);
                double expect = st.dropped[b * C + c] ? a * kAlphaPrime + off : a * 0.9 + off;
                for (int j = 0; j < 4; ++j)
                    CHECK(y.at(b, c, j) == doctest::Approx(expect).epsilon(1e-12));
            }
    }
}

// -------------------------------------------------------------- dropCluster

TEST_CASE("constant features collapse to a single cluster per channel") {
    Tensor x = filled(8, 3, 32, 1.25);
    auto map = fit_clusters(x);
    for (int c = 0; c < 3; ++c) {
        CHECK(map.clusters(c) == 1);
        CHECK(map.cluster_size(c, 0) == 32);
    }
}

TEST_CASE("two independent block signals split at the block edge") {
    // positions 0..255 follow factor A, 256..511 follow factor B
    const int B = 64, L = 512;
    Tensor x(B, 1, L);
    Rng rng(19);
    for (int b = 0; b < B; ++b) {
        double fa = rng.normal(), fb = rng.normal();
        for (int j = 0; j < L; ++j) x.at(b, 0, j) = j < 256 ? fa : fb;
    }
    auto map = fit_clusters(x);
    REQUIRE(map.clusters(0) == 2);
    CHECK(map.starts[0][0] == 0);
    CHECK(map.starts[0][1] == 256);
}

TEST_CASE("cluster sizes always sum to the length axis") {
    Rng rng(20);
    Tensor x = random_tensor(16, 4, 64, rng);
    auto map = fit_clusters(x);
    for (int c = 0; c < 4; ++c) {
        int total = 0;
        for (int k = 0; k < map.clusters(c); ++k) total += map.cluster_size(c, k);
        CHECK(total == 64);
    }
}

TEST_CASE("cluster fitting requires at least 8 samples") {
    Tensor x = filled(7, 2, 16, 1.0);
    CHECK_THROWS_AS(fit_clusters(x), std::invalid_argument);
}

TEST_CASE("dropCluster at zero schedule is the identity") {
    Tensor x = filled(8, 2, 32, 2.0);
    auto map = fit_clusters(x);
    Rng rng(21);
    Tensor y = apply_dropcluster(x, map, 0.10, 0.0, rng);
    CHECK(y.v == x.v);
}

TEST_CASE("an unfitted map is rejected") {
    Tensor x = filled(2, 2, 16, 1.0);
    ClusterMap map;
    Rng rng(22);
    CHECK_THROWS_AS(apply_dropcluster(x, map, 0.1, 1.0, rng), std::invalid_argument);
}

TEST_CASE("a full-span cluster drops at exactly p_max") {
    Tensor fitx = filled(8, 1, 32, 3.0);
    auto map = fit_clusters(fitx);
    REQUIRE(map.clusters(0) == 1);

    Tensor x = filled(1, 1, 32, 3.0);
    Rng rng(23);
    const double p = 0.10;
    const int trials = 10000;
    int dropped = 0;
    for (int i = 0; i < trials; ++i) {
        ClusterDropState st;
        apply_dropcluster(x, map, p, 1.0, rng, false, &st);
        CHECK(st.rates[0][0] == doctest::Approx(p).epsilon(1e-15));
        dropped += st.dropped[0][0];
    }
    CHECK(binomial_close(static_cast<double>(dropped) / trials, p, trials));
}

TEST_CASE("a 64-sample cluster on a 512 axis drops at p_max/8") {
    // batch with eight independent blocks of 64 positions each
    const int B = 32, L = 512;
    Tensor x(B, 1, L);
    Rng rng(24);
    for (int b = 0; b < B; ++b)
        for (int g = 0; g < 8; ++g) {
            double f = rng.normal();
            for (int j = g * 64; j < (g + 1) * 64; ++j) x.at(b, 0, j) = f;
        }
    auto map = fit_clusters(x);
    REQUIRE(map.clusters(0) == 8);
    REQUIRE(map.cluster_size(0, 0) == 64);

    Rng drop_rng(25);
    const double p = 0.10, expect = p * 64.0 / 512.0;  // 0.0125
    const int trials = 10000;
    int dropped = 0;
    Tensor one = filled(1, 1, L, 1.0);
    for (int i = 0; i < trials; ++i) {
        ClusterDropState st;
        apply_dropcluster(one, map, p, 1.0, drop_rng, false, &st);
        dropped += st.dropped[0][0];
    }
    double freq = static_cast<double>(dropped) / trials;
    CHECK(expect == doctest::Approx(0.0125));
    CHECK(binomial_close(freq, expect, trials));
}

TEST_CASE("deterministic mode drops the same clusters every time") {
    const int B = 32, L = 128;
    Tensor x(B, 1, L);
    Rng rng(26);
    for (int b = 0; b < B; ++b)
        for (int g = 0; g < 4; ++g) {
            double f = rng.normal();
            for (int j = g * 32; j < (g + 1) * 32; ++j) x.at(b, 0, j) = f + 0.01 * g;
        }
    auto map = fit_clusters(x);
    Tensor one = filled(1, 1, L, 1.0);
    Rng drop_rng(27);
    ClusterDropState first;
    apply_dropcluster(one, map, 0.3, 1.0, drop_rng, true, &first);
    for (int i = 0; i < 50; ++i) {
        ClusterDropState st;
        apply_dropcluster(one, map, 0.3, 1.0, drop_rng, true, &st);
        CHECK(st.dropped[0] == first.dropped[0]);
    }
}

TEST_CASE("dropCluster survivors are rescaled by the inverse keep rate") {
    Tensor fitx = filled(8, 1, 16, 1.0);
    auto map = fit_clusters(fitx);
    Tensor x = filled(1, 1, 16, 1.0);
    const double p = 0.25;
    Rng rng(28);
    for (int i = 0; i < 100; ++i) {
        ClusterDropState st;
        Tensor y = apply_dropcluster(x, map, p, 1.0, rng, false, &st);
        double expect = st.dropped[0][0] ? 0.0 : 1.0 / (1.0 - p);
        for (int j = 0; j < 16; ++j) CHECK(y.at(0, 0, j) == doctest::Approx(expect));
    }
}

// ------------------------------------------------------------- layer ratios

TEST_CASE("layer multipliers produce effective rates in exact 1:2:3:4 ratio") {
    Rng data_rng(29);
    Tensor x = random_tensor(4, 8, 16, data_rng, 0.2, 2.0);
    const double p = 0.05, lam = 0.5;
    auto base = score_channels(x, 0.0, 1.0 * p, lam);  // q = 0 keeps all channels
    for (int mult = 1; mult <= 4; ++mult) {
        auto cs = score_channels(x, 0.0, mult * p, lam);
        for (int c = 0; c < x.c; ++c)
            CHECK(cs.effective_rates[c] ==
                  doctest::Approx(mult * base.effective_rates[c]).epsilon(1e-12));
    }
}
