#pragma once

#include <complex>
#include <string>
#include <vector>

#include "specdrop/sim/grid.hpp"
#include "specdrop/sim/variants.hpp"

namespace specdrop::sim {

// Metabolite and baseline basis functions on a common acquisition grid.
//
// Metabolite functions are complex time-domain FIDs built from unit-area
// Lorentzian singlets at standard chemical shifts. The baseline library holds
// smooth real-valued functions on the output ppm axis (low-order Legendre
// polynomials plus broad Gaussians), unit peak magnitude each.
struct BasisSet {
    Variant variant;
    GridSpec grid;
    std::vector<std::string> names;
    std::vector<std::vector<std::complex<double>>> functions;  // [met][n_time]
    std::vector<std::vector<double>> baseline_library;         // [lib][kOutLen]

    // Band-limited interpolation weights mapping the shifted full-grid
    // spectrum onto the 512-point output axis; row-major [kOutLen][n_time].
    std::vector<double> resample_weights;
    std::vector<double> out_ppm;  // descending [4.2 .. 0.2]

    int n_metabolites() const { return static_cast<int>(functions.size()); }
    int library_size() const { return static_cast<int>(baseline_library.size()); }
};

// One resonance line of a metabolite: chemical shift, relative weight and
// intrinsic linewidth (FWHM, Hz) before any model broadening is applied.
struct ResonanceLine {
    double ppm;
    double weight;
    double lw_hz;
};

const std::vector<ResonanceLine>& metabolite_lines(const std::string& name);

BasisSet build_basis_set(const TaskVariant& variant, const GridSpec& grid = {});

// Periodic band-limited (Dirichlet kernel) interpolation weight for offset x
// on an N-point grid. Exactly 1 at x = 0 and 0 at other integers.
double dirichlet_weight(double x, int n);

// Weight matrix evaluating the interpolant of an N-point sequence at
// fractional positions `pos` (row-major [pos.size()][n]).
std::vector<double> resample_matrix(const std::vector<double>& pos, int n);

std::vector<std::vector<double>> build_baseline_library(int size = 16);

}  // namespace specdrop::sim
