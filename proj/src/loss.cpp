#include "specdrop/loss/adaptive.hpp"

#include <cmath>
#include <stdexcept>

namespace specdrop::loss {

LossGroups LossGroups::from_schema(const sim::TaskVariant& tv, double pen_min) {
    using sim::Role;
    LossGroups lg;
    lg.pen_min = pen_min;
    lg.dim = tv.dim();

    auto add = [&](const std::string& name, std::vector<int> idx) {
        if (!idx.empty()) lg.groups.emplace_back(name, std::move(idx));
    };
    add("metabolites", tv.indices_by_role(Role::Amplitude));

    std::vector<int> broadening = tv.indices_by_role(Role::LorentzianGlobal);
    for (int i : tv.indices_by_role(Role::LorentzianPerMet)) broadening.push_back(i);
    for (int i : tv.indices_by_role(Role::GaussianGlobal)) broadening.push_back(i);
    add("line_broadening", std::move(broadening));

    add("noise", tv.indices_by_role(Role::Snr));
    add("baseline", tv.indices_by_role(Role::BaselineCoeff));

    std::vector<int> phase = tv.indices_by_role(Role::Phase0);
    for (int i : tv.indices_by_role(Role::Phase1)) phase.push_back(i);
    add("phase", std::move(phase));

    size_t covered = 0;
    for (const auto& [name, idx] : lg.groups) covered += idx.size();
    if (covered != static_cast<size_t>(tv.dim()))
        throw std::logic_error("loss groups do not partition the parameter schema");
    return lg;
}

const std::vector<int>& LossGroups::indices(const std::string& name) const {
    for (const auto& [n, idx] : groups)
        if (n == name) return idx;
    throw std::out_of_range("no loss group named " + name);
}

std::vector<std::string> LossGroups::names() const {
    std::vector<std::string> out;
    for (const auto& [n, idx] : groups) out.push_back(n);
    return out;
}

double compute_lambda(const GroupStats& st, int epoch, double pen_min) {
    if (!std::isfinite(st.r) || !std::isfinite(st.r2) || !std::isfinite(st.s_bar))
        throw std::invalid_argument("compute_lambda: non-finite group statistics");
    if (epoch < 0) throw std::invalid_argument("compute_lambda: negative epoch");
    double pen_epoch = static_cast<double>(epoch) / 100.0;
    double value = ((1.0 - st.r) + (1.0 - st.r2) + st.s_bar) * (10.0 + pen_epoch);
    return std::max(value, pen_min + pen_epoch + st.s_bar);
}

std::map<std::string, double> compute_lambdas(const std::map<std::string, GroupStats>& stats,
                                              int epoch, double pen_min) {
    std::map<std::string, double> out;
    for (const auto& [name, st] : stats) out[name] = compute_lambda(st, epoch, pen_min);
    return out;
}

double total_loss(const Mat& pred, const Mat& target, const LossGroups& groups,
                  const std::map<std::string, double>& lambdas, Mat* dpred) {
    if (pred.r != target.r || pred.c != target.c)
        throw std::invalid_argument("total_loss: shape mismatch between pred and target");
    if (pred.c != groups.dim)
        throw std::invalid_argument("total_loss: output width does not match the group schema");
    const int B = pred.r, D = pred.c;

    // per-element weight: 1/(B*D) for the whole-output term, plus the group's
    // lambda times 1/(B*|g|) (group MSE) and 1/B (individual MSE)
    std::vector<double> weight(D, 1.0 / (static_cast<double>(B) * D));
    for (const auto& [name, idx] : groups.groups) {
        auto it = lambdas.find(name);
        if (it == lambdas.end()) throw std::invalid_argument("total_loss: missing lambda for group " + name);
        double lam = it->second;
        if (!(lam > 0.0)) throw std::invalid_argument("total_loss: lambda must be positive for " + name);
        double w = lam * (1.0 / (static_cast<double>(B) * idx.size()) + 1.0 / static_cast<double>(B));
        for (int j : idx) weight[j] += w;
    }

    if (dpred) {
        *dpred = Mat(B, D);
    }
    double total = 0.0;
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < D; ++j) {
            double diff = pred.at(i, j) - target.at(i, j);
            total += weight[j] * diff * diff;
            if (dpred) dpred->at(i, j) = 2.0 * weight[j] * diff;
        }
    return total;
}

}  // namespace specdrop::loss
