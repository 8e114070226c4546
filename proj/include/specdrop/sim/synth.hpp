#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "specdrop/rng.hpp"
#include "specdrop/sim/basis.hpp"

namespace specdrop::sim {

struct Spectrum {
    std::vector<double> signal;        // 512 points, noisy when noise enabled
    std::vector<double> ppm_axis;      // descending [4.2 .. 0.2]
    ParameterVector params;
    std::vector<double> clean_signal;  // noise-free counterpart
};

struct SynthOptions {
    bool add_baseline = true;
    bool add_noise = true;
};

// Linear-combination physics model: amplitude-scaled basis FIDs, Lorentzian
// (global T2* or per-metabolite D) and, for complex26, Gaussian decay in the
// time domain; Fourier transform; zero/first-order phase about the band
// centre; real part; band-limited crop+resample to the 512-point [0.2, 4.2]
// ppm axis; baseline as a weighted sum of 5 library functions; white Gaussian
// noise scaled so peak(clean)/sigma equals the SNR parameter.
//
// `noise_rng` supplies the noise draws and may be null when noise is off.
Spectrum synthesize(const ParameterVector& params, const BasisSet& basis,
                    Rng* noise_rng = nullptr, const SynthOptions& opt = {});

// Complex shifted spectrum before phasing (ascending frequency), exposed for
// tests; scaled by the dwell time so peak areas integrate to the amplitudes.
std::vector<std::complex<double>> time_domain_signal(const ParameterVector& params,
                                                     const BasisSet& basis);

double measure_fwhm_ppm(const std::vector<double>& signal, const std::vector<double>& ppm);

}  // namespace specdrop::sim
