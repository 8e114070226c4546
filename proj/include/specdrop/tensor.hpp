#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "specdrop/rng.hpp"

namespace specdrop {

// Dense [batch, channels, length] buffer, row-major. All network math runs in
// double so finite-difference gradient checks are meaningful.
struct Tensor {
    int b = 0, c = 0, l = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int b_, int c_, int l_) : b(b_), c(c_), l(l_), v(static_cast<size_t>(b_) * c_ * l_, 0.0) {}

    size_t size() const { return v.size(); }
    double& at(int i, int j, int k) { return v[(static_cast<size_t>(i) * c + j) * l + k]; }
    double at(int i, int j, int k) const { return v[(static_cast<size_t>(i) * c + j) * l + k]; }

    double* row(int i, int j) { return v.data() + (static_cast<size_t>(i) * c + j) * l; }
    const double* row(int i, int j) const { return v.data() + (static_cast<size_t>(i) * c + j) * l; }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return b == o.b && c == o.c && l == o.l; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    uint64_t hash() const { return fnv1a64(v.data(), v.size() * sizeof(double)); }
};

// Plain [rows, cols] matrix used at the head of the network and in the loss.
struct Mat {
    int r = 0, c = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r_, int c_) : r(r_), c(c_), v(static_cast<size_t>(r_) * c_, 0.0) {}

    double& at(int i, int j) { return v[static_cast<size_t>(i) * c + j]; }
    double at(int i, int j) const { return v[static_cast<size_t>(i) * c + j]; }
    size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

}  // namespace specdrop
