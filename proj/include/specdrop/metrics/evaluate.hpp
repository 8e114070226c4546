#pragma once

#include "specdrop/metrics/metrics.hpp"
#include "specdrop/model/resnet.hpp"
#include "specdrop/sim/dataset.hpp"

namespace specdrop::metrics {

// Model outputs live in bounds-normalized space; these helpers map between
// that space and physical parameter values.
Mat normalize_targets(const sim::Dataset& ds, int row_begin, int row_end);
void denormalize_inplace(Mat& values, const sim::TaskVariant& tv);

// Eval-mode predictions over dataset rows [row_begin, row_end), denormalized.
Mat predict(nn::ResNet1D& model, const sim::Dataset& ds, int row_begin, int row_end,
            int batch_size = 250);

// Physical-unit targets for the same row range.
Mat targets(const sim::Dataset& ds, int row_begin, int row_end);

// MAPE/STD/r2 over the metabolite-amplitude dimensions of the validation
// rows, with a per-metabolite breakdown and an APE histogram.
EvalReport evaluate(nn::ResNet1D& model, const sim::Dataset& ds, int batch_size = 250);

EvalReport evaluate_predictions(const Mat& pred, const Mat& target, const sim::TaskVariant& tv,
                                const std::string& variant_name);

}  // namespace specdrop::metrics
