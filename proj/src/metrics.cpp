#include "specdrop/metrics/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace specdrop::metrics {

std::vector<double> absolute_percent_errors(const std::vector<double>& pred,
                                            const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("mape: size mismatch");
    std::vector<double> ape;
    ape.reserve(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        if (target[i] == 0.0) continue;
        ape.push_back(100.0 * std::abs(pred[i] - target[i]) / std::abs(target[i]));
    }
    return ape;
}

MapeResult mape(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("mape: size mismatch");
    MapeResult r;
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (target[i] == 0.0) {
            ++r.excluded;
            continue;
        }
        sum += 100.0 * std::abs(pred[i] - target[i]) / std::abs(target[i]);
        ++r.counted;
    }
    if (r.counted == 0) return r;
    r.mean = sum / r.counted;
    double ss = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (target[i] == 0.0) continue;
        double ape = 100.0 * std::abs(pred[i] - target[i]) / std::abs(target[i]);
        ss += (ape - r.mean) * (ape - r.mean);
    }
    r.std = std::sqrt(ss / r.counted);
    return r;
}

double r_squared(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("r_squared: size mismatch");
    if (pred.size() < 2) throw std::invalid_argument("r_squared: need at least 2 samples");
    double mean = 0.0;
    for (double t : target) mean += t;
    mean /= static_cast<double>(target.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
        ss_tot += (target[i] - mean) * (target[i] - mean);
    }
    if (ss_tot == 0.0) throw std::invalid_argument("r_squared: target variance is zero");
    return 1.0 - ss_res / ss_tot;
}

double pearson_r(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.size() < 2)
        throw std::invalid_argument("pearson_r: bad input sizes");
    double mp = 0.0, mt = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        mp += pred[i];
        mt += target[i];
    }
    mp /= static_cast<double>(pred.size());
    mt /= static_cast<double>(pred.size());
    double sp = 0.0, st = 0.0, cov = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double dp = pred[i] - mp, dt = target[i] - mt;
        cov += dp * dt;
        sp += dp * dp;
        st += dt * dt;
    }
    if (sp == 0.0 || st == 0.0) return 0.0;
    return cov / std::sqrt(sp * st);
}

void MetricSeries::append(int epoch, double value) {
    if (!epochs.empty() && epoch <= epochs.back())
        throw std::invalid_argument("MetricSeries: epochs must be strictly increasing");
    if (!std::isfinite(value)) throw std::invalid_argument("MetricSeries: non-finite value");
    epochs.push_back(epoch);
    values.push_back(value);
}

double s_bar(const std::vector<double>& values) {
    const size_t n = values.size();
    if (n < 3) throw std::invalid_argument("s_bar: need at least 3 points");
    std::vector<double> d2(n - 2);
    for (size_t k = 1; k + 1 < n; ++k) d2[k - 1] = values[k + 1] - 2.0 * values[k] + values[k - 1];
    double mean = 0.0;
    for (double d : d2) mean += d;
    mean /= static_cast<double>(d2.size());
    double var = 0.0;
    for (double d : d2) var += (d - mean) * (d - mean);
    return var / static_cast<double>(d2.size());
}

double s_bar(const MetricSeries& series) { return s_bar(series.values); }

std::string report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["variant"] = r.variant;
    j["n_samples"] = r.n_samples;
    nlohmann::json mets = nlohmann::json::array();
    for (const auto& m : r.per_metabolite)
        mets.push_back({{"name", m.name}, {"mape", m.mape}, {"std", m.std}});
    j["per_metabolite"] = mets;
    j["mape"] = r.mape;
    j["std"] = r.std;
    j["r2"] = r.r2;
    j["excluded_zero_targets"] = r.excluded_zero_targets;
    j["best_epoch"] = r.best_epoch;
    j["s_bar"] = r.s_bar;
    j["ape_histogram"] = r.ape_histogram;
    j["ape_histogram_max"] = r.ape_histogram_max;
    return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EvalReport r;
    r.variant = j.at("variant").get<std::string>();
    r.n_samples = j.at("n_samples").get<int>();
    for (const auto& m : j.at("per_metabolite"))
        r.per_metabolite.push_back({m.at("name").get<std::string>(), m.at("mape").get<double>(),
                                    m.at("std").get<double>()});
    r.mape = j.at("mape").get<double>();
    r.std = j.at("std").get<double>();
    r.r2 = j.at("r2").get<double>();
    r.excluded_zero_targets = j.at("excluded_zero_targets").get<long>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.s_bar = j.at("s_bar").get<std::map<std::string, double>>();
    r.ape_histogram = j.at("ape_histogram").get<std::vector<double>>();
    r.ape_histogram_max = j.at("ape_histogram_max").get<double>();
    return r;
}

}  // namespace specdrop::metrics
