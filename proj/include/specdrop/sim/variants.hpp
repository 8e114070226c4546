#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "specdrop/rng.hpp"

namespace specdrop::sim {

enum class Variant { Simple7, Standard14, Complex26 };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::Simple7: return "simple7";
        case Variant::Standard14: return "standard14";
        case Variant::Complex26: return "complex26";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "simple7") return Variant::Simple7;
    if (s == "standard14") return Variant::Standard14;
    if (s == "complex26") return Variant::Complex26;
    throw std::invalid_argument("unknown variant name: " + s);
}

enum class Role {
    Amplitude,
    LorentzianGlobal,   // global T2*, decay exp(-t/T2*)
    LorentzianPerMet,   // per-metabolite rate D_m, decay exp(-t*D_m)
    GaussianGlobal,     // Gaussian width G (Hz), decay exp(-(t*G)^2)
    Phase0,
    Phase1,
    Snr,
    BaselineCoeff,
};

inline std::string to_string(Role r) {
    switch (r) {
        case Role::Amplitude: return "amplitude";
        case Role::LorentzianGlobal: return "lorentzian_global";
        case Role::LorentzianPerMet: return "lorentzian_per_met";
        case Role::GaussianGlobal: return "gaussian_global";
        case Role::Phase0: return "phase0";
        case Role::Phase1: return "phase1";
        case Role::Snr: return "snr";
        case Role::BaselineCoeff: return "baseline_coeff";
    }
    return "?";
}

inline Role role_from_string(const std::string& s) {
    if (s == "amplitude") return Role::Amplitude;
    if (s == "lorentzian_global") return Role::LorentzianGlobal;
    if (s == "lorentzian_per_met") return Role::LorentzianPerMet;
    if (s == "gaussian_global") return Role::GaussianGlobal;
    if (s == "phase0") return Role::Phase0;
    if (s == "phase1") return Role::Phase1;
    if (s == "snr") return Role::Snr;
    if (s == "baseline_coeff") return Role::BaselineCoeff;
    throw std::invalid_argument("unknown role: " + s);
}

struct ParamSpec {
    std::string symbol;
    Role role;
    double low;
    double high;
};

// Default sampling bounds. All draws are uniform within [low, high].
// Amplitudes are kept away from zero so percent errors stay well defined;
// T2* and D are chosen so Lorentzian linewidths span roughly 2-20 Hz.
struct SamplingBounds {
    double amp_lo = 0.05, amp_hi = 1.0;
    double t2_lo = 1.0 / (20.0 * M_PI), t2_hi = 1.0 / (2.0 * M_PI);  // seconds
    double d_lo = 2.0 * M_PI, d_hi = 20.0 * M_PI;                    // 1/s
    double g_lo = 1.0, g_hi = 10.0;                                  // Hz
    double phi0_lo = -M_PI / 4.0, phi0_hi = M_PI / 4.0;              // rad
    double phi1_lo = -0.002, phi1_hi = 0.002;                        // rad/Hz
    double snr_lo = 5.0, snr_hi = 30.0;
    double base_lo = 0.0, base_hi = 0.05;

    void validate() const {
        auto chk = [](double lo, double hi, const char* what) {
            if (!(lo <= hi)) throw std::invalid_argument(std::string("bad bounds for ") + what);
        };
        chk(amp_lo, amp_hi, "amplitude");
        chk(t2_lo, t2_hi, "t2star");
        chk(d_lo, d_hi, "d");
        chk(g_lo, g_hi, "g");
        chk(phi0_lo, phi0_hi, "phi0");
        chk(phi1_lo, phi1_hi, "phi1");
        chk(snr_lo, snr_hi, "snr");
        chk(base_lo, base_hi, "baseline");
        if (amp_lo <= 0.0) throw std::invalid_argument("amplitude lower bound must be > 0");
        if (snr_lo < 5.0 || snr_hi > 30.0) throw std::invalid_argument("SNR bounds must stay within [5, 30]");
    }
};

inline constexpr int kBaselineFunctionsPerSpectrum = 5;

struct TaskVariant {
    Variant id;
    std::vector<std::string> metabolite_names;
    std::vector<ParamSpec> schema;

    int dim() const { return static_cast<int>(schema.size()); }

    int index_of(const std::string& symbol) const {
        for (size_t i = 0; i < schema.size(); ++i)
            if (schema[i].symbol == symbol) return static_cast<int>(i);
        throw std::out_of_range("no schema entry named " + symbol);
    }

    std::vector<int> indices_by_role(Role r) const {
        std::vector<int> out;
        for (size_t i = 0; i < schema.size(); ++i)
            if (schema[i].role == r) out.push_back(static_cast<int>(i));
        return out;
    }

    bool has_baseline() const { return !indices_by_role(Role::BaselineCoeff).empty(); }
    bool has_phase() const {
        return !indices_by_role(Role::Phase0).empty() || !indices_by_role(Role::Phase1).empty();
    }
};

inline TaskVariant make_variant(Variant id, const SamplingBounds& b = {}) {
    b.validate();
    TaskVariant tv;
    tv.id = id;
    auto amp = [&](const std::string& m) { tv.schema.push_back({m, Role::Amplitude, b.amp_lo, b.amp_hi}); };
    switch (id) {
        case Variant::Simple7:
            tv.metabolite_names = {"pch", "cre", "naa", "mm", "lip"};
            for (auto& m : tv.metabolite_names) amp(m);
            tv.schema.push_back({"t2star", Role::LorentzianGlobal, b.t2_lo, b.t2_hi});
            tv.schema.push_back({"snr", Role::Snr, b.snr_lo, b.snr_hi});
            break;
        case Variant::Standard14:
            tv.metabolite_names = {"pch", "cre", "naa", "glx", "ins"};
            for (auto& m : tv.metabolite_names) amp(m);
            for (int i = 0; i < kBaselineFunctionsPerSpectrum; ++i)
                tv.schema.push_back({"b" + std::to_string(i), Role::BaselineCoeff, b.base_lo, b.base_hi});
            tv.schema.push_back({"t2star", Role::LorentzianGlobal, b.t2_lo, b.t2_hi});
            tv.schema.push_back({"snr", Role::Snr, b.snr_lo, b.snr_hi});
            tv.schema.push_back({"phi0", Role::Phase0, b.phi0_lo, b.phi0_hi});
            tv.schema.push_back({"phi1", Role::Phase1, b.phi1_lo, b.phi1_hi});
            break;
        case Variant::Complex26:
            tv.metabolite_names = {"pch", "cre", "naa", "glx", "ins", "gpc", "tau", "mm", "lip"};
            for (auto& m : tv.metabolite_names) amp(m);
            for (auto& m : tv.metabolite_names)
                tv.schema.push_back({"d_" + m, Role::LorentzianPerMet, b.d_lo, b.d_hi});
            tv.schema.push_back({"g", Role::GaussianGlobal, b.g_lo, b.g_hi});
            tv.schema.push_back({"phi0", Role::Phase0, b.phi0_lo, b.phi0_hi});
            tv.schema.push_back({"snr", Role::Snr, b.snr_lo, b.snr_hi});
            for (int i = 0; i < kBaselineFunctionsPerSpectrum; ++i)
                tv.schema.push_back({"b" + std::to_string(i), Role::BaselineCoeff, b.base_lo, b.base_hi});
            break;
    }
    return tv;
}

// Ground-truth parameters of one spectrum. `baseline_selection` records which
// library functions the coefficients apply to, so a spectrum can be
// regenerated from its parameters alone.
struct ParameterVector {
    Variant variant;
    std::vector<double> values;
    std::vector<int> baseline_selection;
};

ParameterVector sample_parameters(const TaskVariant& tv, Rng& rng, int baseline_library_size = 16);

inline ParameterVector sample_parameters(const TaskVariant& tv, uint64_t seed, int library_size = 16) {
    Rng rng(seed);
    return sample_parameters(tv, rng, library_size);
}

}  // namespace specdrop::sim
