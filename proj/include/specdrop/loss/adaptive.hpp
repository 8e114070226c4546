#pragma once

#include <map>
#include <string>
#include <vector>

#include "specdrop/sim/variants.hpp"
#include "specdrop/tensor.hpp"

namespace specdrop::loss {

// Disjoint spectral-component groups over the parameter schema. The paper's
// four groups (metabolites, line broadening, noise, baseline) are extended
// with a phase group so that every schema entry belongs to exactly one group.
struct LossGroups {
    std::vector<std::pair<std::string, std::vector<int>>> groups;
    double pen_min = 1.0;
    int dim = 0;

    static LossGroups from_schema(const sim::TaskVariant& tv, double pen_min = 1.0);
    const std::vector<int>& indices(const std::string& name) const;
    std::vector<std::string> names() const;
};

// Validation statistics of one group, refreshed once per epoch.
struct GroupStats {
    double r = 0.0;
    double r2 = 0.0;
    double s_bar = 0.0;
};

// Adaptive weight: value = ((1-r) + (1-r2) + s_bar) * (10 + epoch/100),
// floored at pen_min + epoch/100 + s_bar.
double compute_lambda(const GroupStats& stats, int epoch, double pen_min);

std::map<std::string, double> compute_lambdas(const std::map<std::string, GroupStats>& stats,
                                              int epoch, double pen_min);

// Weighted MSE: whole-output term (weight 1) plus, per group, the group MSE
// and each member parameter's own MSE, all carrying the group's lambda.
// When dpred is non-null the gradient w.r.t. pred is written there.
double total_loss(const Mat& pred, const Mat& target, const LossGroups& groups,
                  const std::map<std::string, double>& lambdas, Mat* dpred = nullptr);

}  // namespace specdrop::loss
