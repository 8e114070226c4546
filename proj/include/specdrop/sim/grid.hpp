#pragma once

#include <stdexcept>
#include <vector>

namespace specdrop::sim {

// Output spectrum contract: 512 points, ppm axis descending over [0.2, 4.2].
inline constexpr int kOutLen = 512;
inline constexpr double kPpmHigh = 4.2;
inline constexpr double kPpmLow = 0.2;

// Acquisition grid. The default is a 2048-point FID at a 3T proton frequency
// with an 8 ppm spectral width centred at 2.2 ppm, so the [0.2, 4.2] window
// sits in the middle half of the band.
struct GridSpec {
    int n_time = 2048;
    double dwell_s = 1.0 / 986.0;  // SW = 986 Hz = 8 ppm at 123.25 MHz
    double f0_mhz = 123.25;
    double ref_ppm = 2.2;  // ppm at zero frequency offset (band centre)

    double sw_hz() const { return 1.0 / dwell_s; }
    double hz_per_bin() const { return sw_hz() / n_time; }
    double ppm_per_bin() const { return hz_per_bin() / f0_mhz; }

    // Hz offset of a metabolite resonance at chemical shift `ppm`.
    double ppm_to_hz(double ppm) const { return (ppm - ref_ppm) * f0_mhz; }

    // Frequency (Hz) of shifted-spectrum bin k (k = 0 .. n_time-1, ascending).
    double bin_hz(int k) const { return (k - n_time / 2) * hz_per_bin(); }
    double bin_ppm(int k) const { return ref_ppm + bin_hz(k) / f0_mhz; }

    // Fractional bin coordinate of a ppm value on the shifted spectrum.
    double ppm_to_bin(double ppm) const {
        return n_time / 2.0 + (ppm - ref_ppm) * f0_mhz / hz_per_bin();
    }

    void validate() const {
        if (n_time < 1024) throw std::invalid_argument("GridSpec: n_time must be >= 1024");
        if (dwell_s <= 0 || f0_mhz <= 0) throw std::invalid_argument("GridSpec: dwell and f0 must be positive");
        // crop window must lie inside the acquisition band
        double lo = bin_ppm(0), hi = bin_ppm(n_time - 1);
        if (kPpmLow < lo || kPpmHigh > hi)
            throw std::invalid_argument("GridSpec: [0.2, 4.2] ppm outside acquisition band");
    }
};

// Output ppm axis, descending 4.2 -> 0.2 with exact endpoints.
inline std::vector<double> output_ppm_axis() {
    std::vector<double> ppm(kOutLen);
    double step = (kPpmHigh - kPpmLow) / (kOutLen - 1);
    for (int j = 0; j < kOutLen; ++j) ppm[j] = kPpmHigh - j * step;
    ppm.back() = kPpmLow;
    return ppm;
}

}  // namespace specdrop::sim
