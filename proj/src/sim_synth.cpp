#include "specdrop/sim/synth.hpp"

#include <unsupported/Eigen/FFT>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace specdrop::sim {

namespace {

void check_params(const ParameterVector& params, const BasisSet& basis, const TaskVariant& tv) {
    if (params.variant != basis.variant)
        throw std::invalid_argument("parameter vector and basis set were built for different variants");
    if (static_cast<int>(params.values.size()) != tv.dim())
        throw std::invalid_argument("parameter vector length does not match the variant schema");
}

}  // namespace

ParameterVector sample_parameters(const TaskVariant& tv, Rng& rng, int baseline_library_size) {
    ParameterVector pv;
    pv.variant = tv.id;
    pv.values.reserve(tv.schema.size());
    for (const auto& spec : tv.schema) pv.values.push_back(rng.uniform(spec.low, spec.high));
    if (tv.has_baseline()) {
        // 5 distinct library functions per spectrum
        std::vector<int> pool(baseline_library_size);
        for (int i = 0; i < baseline_library_size; ++i) pool[i] = i;
        for (int i = 0; i < kBaselineFunctionsPerSpectrum; ++i) {
            int j = i + static_cast<int>(rng.uniform_int(pool.size() - i));
            std::swap(pool[i], pool[j]);
            pv.baseline_selection.push_back(pool[i]);
        }
    }
    return pv;
}

std::vector<std::complex<double>> time_domain_signal(const ParameterVector& params,
                                                     const BasisSet& basis) {
    const TaskVariant tv = make_variant(params.variant);
    check_params(params, basis, tv);
    const GridSpec& g = basis.grid;
    const int n = g.n_time;

    const auto amp_idx = tv.indices_by_role(Role::Amplitude);
    const auto t2_idx = tv.indices_by_role(Role::LorentzianGlobal);
    const auto d_idx = tv.indices_by_role(Role::LorentzianPerMet);
    const auto g_idx = tv.indices_by_role(Role::GaussianGlobal);

    std::vector<std::complex<double>> s(n, {0.0, 0.0});
    for (size_t m = 0; m < amp_idx.size(); ++m) {
        double amp = params.values[amp_idx[m]];
        if (amp == 0.0) continue;
        double met_rate = d_idx.empty() ? 0.0 : params.values[d_idx[m]];
        const auto& fid = basis.functions[m];
        for (int t = 0; t < n; ++t) {
            double tt = t * g.dwell_s;
            double env = amp * (d_idx.empty() ? 1.0 : std::exp(-tt * met_rate));
            s[t] += env * fid[t];
        }
    }
    if (!t2_idx.empty()) {
        double t2 = params.values[t2_idx[0]];
        for (int t = 0; t < n; ++t) s[t] *= std::exp(-(t * g.dwell_s) / t2);
    }
    if (!g_idx.empty()) {
        double gw = params.values[g_idx[0]];
        for (int t = 0; t < n; ++t) {
            double tg = t * g.dwell_s * gw;
            s[t] *= std::exp(-tg * tg);
        }
    }
    return s;
}

Spectrum synthesize(const ParameterVector& params, const BasisSet& basis, Rng* noise_rng,
                    const SynthOptions& opt) {
    const TaskVariant tv = make_variant(params.variant);
    check_params(params, basis, tv);
    const GridSpec& g = basis.grid;
    const int n = g.n_time;

    auto s = time_domain_signal(params, basis);

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> raw(n);
    fft.fwd(raw, s);

    // fftshift to ascending frequency and scale by dwell so spectra carry
    // unit area per unit amplitude
    std::vector<std::complex<double>> spec(n);
    for (int k = 0; k < n; ++k) spec[k] = raw[(k + n / 2) % n] * g.dwell_s;

    // zero/first-order phase about the band centre
    const auto p0_idx = tv.indices_by_role(Role::Phase0);
    const auto p1_idx = tv.indices_by_role(Role::Phase1);
    double phi0 = p0_idx.empty() ? 0.0 : params.values[p0_idx[0]];
    double phi1 = p1_idx.empty() ? 0.0 : params.values[p1_idx[0]];
    if (phi0 != 0.0 || phi1 != 0.0) {
        for (int k = 0; k < n; ++k) {
            double ph = phi0 + phi1 * g.bin_hz(k);
            spec[k] *= std::complex<double>(std::cos(ph), -std::sin(ph));
        }
    }

    std::vector<double> real_spec(n);
    for (int k = 0; k < n; ++k) real_spec[k] = spec[k].real();

    // crop + band-limited resample onto the output ppm axis
    Spectrum out;
    out.ppm_axis = basis.out_ppm;
    out.params = params;
    out.clean_signal.resize(kOutLen);
    {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
            basis.resample_weights.data(), kOutLen, n);
        Eigen::Map<const Eigen::VectorXd> r(real_spec.data(), n);
        Eigen::Map<Eigen::VectorXd> y(out.clean_signal.data(), kOutLen);
        y = W * r;
    }

    if (opt.add_baseline && tv.has_baseline()) {
        const auto base_idx = tv.indices_by_role(Role::BaselineCoeff);
        if (params.baseline_selection.size() != base_idx.size())
            throw std::invalid_argument("baseline selection does not match the coefficient count");
        for (size_t i = 0; i < base_idx.size(); ++i) {
            double coeff = params.values[base_idx[i]];
            const auto& f = basis.baseline_library.at(params.baseline_selection[i]);
            for (int j = 0; j < kOutLen; ++j) out.clean_signal[j] += coeff * f[j];
        }
    }

    for (double v : out.clean_signal)
        if (!std::isfinite(v)) throw std::runtime_error("synthesize produced non-finite values");

    out.signal = out.clean_signal;
    if (opt.add_noise) {
        if (noise_rng == nullptr) throw std::invalid_argument("noise requested but no rng supplied");
        const auto snr_idx = tv.indices_by_role(Role::Snr);
        double snr = params.values[snr_idx.at(0)];
        double peak = 0.0;
        for (double v : out.clean_signal) peak = std::max(peak, std::abs(v));
        double sigma = peak / snr;
        for (int j = 0; j < kOutLen; ++j) out.signal[j] += sigma * noise_rng->normal();
    }
    return out;
}

double measure_fwhm_ppm(const std::vector<double>& signal, const std::vector<double>& ppm) {
    int peak = static_cast<int>(std::max_element(signal.begin(), signal.end()) - signal.begin());
    double half = signal[peak] / 2.0;
    int n = static_cast<int>(signal.size());

    auto cross = [&](int from, int step) -> double {
        for (int i = from; i + step >= 0 && i + step < n; i += step) {
            double a = signal[i], b = signal[i + step];
            if ((a - half) * (b - half) <= 0.0 && a != b) {
                double f = (half - a) / (b - a);
                return ppm[i] + f * (ppm[i + step] - ppm[i]);
            }
        }
        throw std::runtime_error("no half-maximum crossing found");
    };
    double left = cross(peak, -1);
    double right = cross(peak, +1);
    return std::abs(left - right);
}

}  // namespace specdrop::sim
