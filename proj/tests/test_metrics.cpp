#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "specdrop/metrics/metrics.hpp"
#include "specdrop/rng.hpp"

using namespace specdrop;
using namespace specdrop::metrics;

TEST_CASE("perfect predictions give zero MAPE and unit r2") {
    std::vector<double> t = {0.3, 1.2, 0.7, 2.0};
    auto m = mape(t, t);
    CHECK(m.mean == 0.0);
    CHECK(m.std == 0.0);
    CHECK(m.excluded == 0);
    CHECK(r_squared(t, t) == 1.0);
}

TEST_CASE("a uniform 10 percent over-prediction gives (10, 0)") {
    std::vector<double> t = {0.4, 1.0, 2.5, 0.9, 3.3};
    std::vector<double> p;
    for (double v : t) p.push_back(1.1 * v);
    auto m = mape(p, t);
    CHECK(m.mean == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(m.std == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("zero targets are excluded and tallied") {
    std::vector<double> t = {1.0, 0.0, 2.0};
    std::vector<double> p = {1.1, 5.0, 2.2};
    auto m = mape(p, t);
    CHECK(m.excluded == 1);
    CHECK(m.counted == 2);
    CHECK(m.mean == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("constant mean prediction gives r2 of zero, zero variance throws") {
    std::vector<double> t = {1.0, 2.0, 3.0, 4.0};
    double mean = 2.5;
    std::vector<double> p(4, mean);
    CHECK(r_squared(p, t) == doctest::Approx(0.0).epsilon(1e-15));
    std::vector<double> flat(4, 1.0);
    CHECK_THROWS_AS(r_squared(p, flat), std::invalid_argument);
}

TEST_CASE("metric implementations match brute-force oracles on random instances") {
    Rng rng(2024);
    for (int rep = 0; rep < 100; ++rep) {
        int n = 25;
        std::vector<double> p(n), t(n);
        for (int i = 0; i < n; ++i) {
            p[i] = rng.uniform(-2.0, 2.0);
            t[i] = rng.uniform(0.1, 2.0);
        }
        auto m = mape(p, t);
        CHECK(std::abs(m.mean - oracle::mape_mean(p, t)) < 1e-10);
        CHECK(std::abs(m.std - oracle::mape_std(p, t)) < 1e-10);
        CHECK(std::abs(r_squared(p, t) - oracle::r_squared(p, t)) < 1e-10);

        std::vector<double> series(12);
        for (auto& v : series) v = rng.uniform(-5.0, 5.0);
        CHECK(std::abs(s_bar(series) - oracle::s_bar(series)) < 1e-10);
    }
}

TEST_CASE("s_bar vanishes on constant and affine series") {
    std::vector<double> c(10, 3.7);
    CHECK(s_bar(c) == 0.0);
    std::vector<double> affine;
    for (int k = 0; k < 15; ++k) affine.push_back(2.5 * k - 7.0);
    CHECK(s_bar(affine) == 0.0);
}

TEST_CASE("s_bar of the alternating series is exactly 4") {
    std::vector<double> m = {0, 1, 0, 1, 0, 1};
    CHECK(s_bar(m) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(oracle::s_bar(m) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("s_bar needs at least three points") {
    CHECK_THROWS_AS(s_bar(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("s_bar is affine-invariant and scales quadratically") {
    Rng rng(31337);
    std::vector<double> m(20);
    for (auto& v : m) v = rng.uniform(-1.0, 1.0);
    double base = s_bar(m);

    std::vector<double> shifted = m;
    for (size_t k = 0; k < m.size(); ++k) shifted[k] += 0.37 * static_cast<double>(k) - 4.2;
    CHECK(s_bar(shifted) == doctest::Approx(base).epsilon(1e-9));

    std::vector<double> scaled = m;
    for (auto& v : scaled) v *= 3.0;
    CHECK(s_bar(scaled) == doctest::Approx(9.0 * base).epsilon(1e-9));
}

TEST_CASE("MAPE is scale-invariant, r2 is affine-invariant") {
    Rng rng(5150);
    int n = 40;
    std::vector<double> p(n), t(n);
    for (int i = 0; i < n; ++i) {
        p[i] = rng.uniform(0.2, 2.0);
        t[i] = rng.uniform(0.2, 2.0);
    }
    auto m1 = mape(p, t);
    std::vector<double> pc = p, tc = t;
    for (int i = 0; i < n; ++i) {
        pc[i] *= -3.7;
        tc[i] *= -3.7;
    }
    auto m2 = mape(pc, tc);
    CHECK(m2.mean == doctest::Approx(m1.mean).epsilon(1e-12));
    CHECK(m2.std == doctest::Approx(m1.std).epsilon(1e-12));

    double r1 = r_squared(p, t);
    std::vector<double> pa = p, ta = t;
    for (int i = 0; i < n; ++i) {
        pa[i] = 2.5 * p[i] + 1.0;
        ta[i] = 2.5 * t[i] + 1.0;
    }
    CHECK(r_squared(pa, ta) == doctest::Approx(r1).epsilon(1e-12));
}

TEST_CASE("metric series enforce increasing epochs and finite values") {
    MetricSeries s;
    s.name = "mape";
    s.append(1, 10.0);
    s.append(2, 9.0);
    CHECK_THROWS_AS(s.append(2, 8.0), std::invalid_argument);
    CHECK_THROWS_AS(s.append(5, std::nan("")), std::invalid_argument);
    s.append(3, 8.0);
    CHECK(s_bar(s) == doctest::Approx(0.0));
}

TEST_CASE("eval reports round-trip through JSON losslessly") {
    EvalReport r;
    r.variant = "standard14";
    r.n_samples = 200;
    r.per_metabolite = {{"pch", 12.25, 3.5}, {"naa", 8.125, 2.25}};
    r.mape = 10.1875;
    r.std = 3.0625;
    r.r2 = 0.9375;
    r.excluded_zero_targets = 2;
    r.best_epoch = 17;
    r.s_bar = {{"mape", 4.0}, {"loss", 0.5}};
    r.ape_histogram.assign(kApeHistogramBins, 0.0);
    r.ape_histogram[3] = 11.0;
    r.ape_histogram_max = 200.0;

    auto back = report_from_json(report_to_json(r));
    CHECK(back.variant == r.variant);
    CHECK(back.n_samples == r.n_samples);
    CHECK(back.per_metabolite.size() == 2);
    CHECK(back.per_metabolite[0].mape == r.per_metabolite[0].mape);
    CHECK(back.mape == r.mape);
    CHECK(back.std == r.std);
    CHECK(back.r2 == r.r2);
    CHECK(back.excluded_zero_targets == r.excluded_zero_targets);
    CHECK(back.best_epoch == r.best_epoch);
    CHECK(back.s_bar == r.s_bar);
    CHECK(back.ape_histogram == r.ape_histogram);
}
