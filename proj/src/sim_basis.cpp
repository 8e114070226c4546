#include "specdrop/sim/basis.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace specdrop::sim {

namespace {

// Standard literature chemical shifts. Cho/Cre singlets around 3.2/3.0 ppm
// and the Glx multiplet around 2.1-2.45 ppm reproduce the overlap structure
// that makes in-vivo quantification hard; MM and Lip are broad humps.
const std::map<std::string, std::vector<ResonanceLine>> kLineTable = {
    {"naa", {{2.01, 1.0, 1.5}}},
    {"cre", {{3.03, 0.6, 1.5}, {3.91, 0.4, 1.5}}},
    {"pch", {{3.21, 1.0, 1.5}}},
    {"gpc", {{3.23, 1.0, 1.5}}},
    {"ins", {{3.56, 0.7, 1.8}, {3.61, 0.3, 1.8}}},
    {"tau", {{3.42, 1.0, 1.8}}},
    {"glx", {{2.08, 0.25, 2.5}, {2.14, 0.25, 2.5}, {2.35, 0.30, 2.5}, {2.45, 0.20, 2.5}}},
    {"mm", {{0.93, 1.0, 25.0}}},
    {"lip", {{1.30, 1.0, 25.0}}},
};

}  // namespace

const std::vector<ResonanceLine>& metabolite_lines(const std::string& name) {
    auto it = kLineTable.find(name);
    if (it == kLineTable.end()) throw std::invalid_argument("no resonance lines for metabolite: " + name);
    return it->second;
}

double dirichlet_weight(double x, int n) {
    // periodic sinc; the even-n form uses tan so the Nyquist component is
    // interpolated as a pure cosine (real interpolant for real input)
    double r = std::remainder(x, static_cast<double>(n));
    if (std::abs(r) < 1e-12) return 1.0;
    double s = std::sin(M_PI * r);
    if (n % 2 == 0) return s / (n * std::tan(M_PI * r / n));
    return s / (n * std::sin(M_PI * r / n));
}

std::vector<double> resample_matrix(const std::vector<double>& pos, int n) {
    std::vector<double> w(pos.size() * static_cast<size_t>(n));
    for (size_t j = 0; j < pos.size(); ++j)
        for (int k = 0; k < n; ++k) w[j * n + k] = dirichlet_weight(pos[j] - k, n);
    return w;
}

std::vector<std::vector<double>> build_baseline_library(int size) {
    if (size < 5) throw std::invalid_argument("baseline library must hold at least 5 functions");
    std::vector<std::vector<double>> lib;
    auto ppm = output_ppm_axis();

    // Legendre polynomials P0..P7 on u in [-1, 1]
    int n_poly = std::min(size, 8);
    for (int d = 0; d < n_poly; ++d) {
        std::vector<double> f(kOutLen);
        double peak = 0.0;
        for (int j = 0; j < kOutLen; ++j) {
            double u = (ppm[j] - (kPpmLow + kPpmHigh) / 2.0) / ((kPpmHigh - kPpmLow) / 2.0);
            double pkm1 = 1.0, pk = u;
            double val = d == 0 ? 1.0 : u;
            for (int m = 2; m <= d; ++m) {
                double pk1 = ((2 * m - 1) * u * pk - (m - 1) * pkm1) / m;
                pkm1 = pk;
                pk = pk1;
                val = pk1;
            }
            f[j] = val;
            peak = std::max(peak, std::abs(val));
        }
        for (double& x : f) x /= peak;
        lib.push_back(std::move(f));
    }

    // broad Gaussians sweeping the band
    int n_gauss = size - n_poly;
    for (int g = 0; g < n_gauss; ++g) {
        double centre = kPpmLow + 0.4 + g * (kPpmHigh - kPpmLow - 0.6) / std::max(1, n_gauss - 1);
        double width = 0.4 + 0.05 * (g % 3);
        std::vector<double> f(kOutLen);
        for (int j = 0; j < kOutLen; ++j) {
            double z = (ppm[j] - centre) / width;
            f[j] = std::exp(-0.5 * z * z);
        }
        lib.push_back(std::move(f));
    }
    return lib;
}

BasisSet build_basis_set(const TaskVariant& variant, const GridSpec& grid) {
    grid.validate();
    BasisSet bs;
    bs.variant = variant.id;
    bs.grid = grid;
    bs.names = variant.metabolite_names;

    const int n = grid.n_time;
    for (const auto& name : bs.names) {
        const auto& lines = metabolite_lines(name);
        double wsum = 0.0;
        for (const auto& ln : lines) wsum += ln.weight;
        std::vector<std::complex<double>> fid(n);
        for (const auto& ln : lines) {
            double f_hz = grid.ppm_to_hz(ln.ppm);
            double rate = M_PI * ln.lw_hz;  // FWHM of exp(-r t) is r/pi Hz
            double w = ln.weight / wsum;
            for (int t = 0; t < n; ++t) {
                double tt = t * grid.dwell_s;
                double ph = 2.0 * M_PI * f_hz * tt;
                double env = w * std::exp(-rate * tt);
                fid[t] += std::complex<double>(env * std::cos(ph), env * std::sin(ph));
            }
        }
        bs.functions.push_back(std::move(fid));
    }

    bs.baseline_library = build_baseline_library();
    bs.out_ppm = output_ppm_axis();

    std::vector<double> pos(kOutLen);
    for (int j = 0; j < kOutLen; ++j) pos[j] = grid.ppm_to_bin(bs.out_ppm[j]);
    bs.resample_weights = resample_matrix(pos, n);
    return bs;
}

}  // namespace specdrop::sim
