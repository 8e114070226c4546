#include "specdrop/metrics/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace specdrop::metrics {

Mat normalize_targets(const sim::Dataset& ds, int row_begin, int row_end) {
    const int D = ds.dim();
    Mat out(row_end - row_begin, D);
    for (int i = row_begin; i < row_end; ++i) {
        const float* row = ds.target_row(i);
        for (int j = 0; j < D; ++j) {
            const auto& sp = ds.task.schema[j];
            double span = sp.high - sp.low;
            out.at(i - row_begin, j) = span > 0.0 ? (row[j] - sp.low) / span : row[j];
        }
    }
    return out;
}

void denormalize_inplace(Mat& values, const sim::TaskVariant& tv) {
    if (values.c != tv.dim()) throw std::invalid_argument("denormalize: width mismatch");
    for (int i = 0; i < values.r; ++i)
        for (int j = 0; j < values.c; ++j) {
            const auto& sp = tv.schema[j];
            double span = sp.high - sp.low;
            if (span > 0.0) values.at(i, j) = sp.low + values.at(i, j) * span;
        }
}

Mat predict(nn::ResNet1D& model, const sim::Dataset& ds, int row_begin, int row_end, int batch_size) {
    if (model.config().output_dim != ds.dim())
        throw std::invalid_argument("model output width does not match the dataset schema");
    const int n = row_end - row_begin;
    Mat pred(n, ds.dim());
    nn::ForwardCtx ctx;  // eval mode
    for (int start = 0; start < n; start += batch_size) {
        int bs = std::min(batch_size, n - start);
        Tensor x(bs, 1, sim::kOutLen);
        for (int i = 0; i < bs; ++i) {
            const float* row = ds.spectrum_row(row_begin + start + i);
            double* dst = x.row(i, 0);
            for (int j = 0; j < sim::kOutLen; ++j) dst[j] = row[j];
        }
        Mat out = model.forward(x, ctx);
        for (int i = 0; i < bs; ++i)
            for (int j = 0; j < ds.dim(); ++j) pred.at(start + i, j) = out.at(i, j);
    }
    denormalize_inplace(pred, ds.task);
    return pred;
}

Mat targets(const sim::Dataset& ds, int row_begin, int row_end) {
    Mat out(row_end - row_begin, ds.dim());
    for (int i = row_begin; i < row_end; ++i) {
        const float* row = ds.target_row(i);
        for (int j = 0; j < ds.dim(); ++j) out.at(i - row_begin, j) = row[j];
    }
    return out;
}

EvalReport evaluate_predictions(const Mat& pred, const Mat& target, const sim::TaskVariant& tv,
                                const std::string& variant_name) {
    if (pred.r != target.r || pred.c != target.c || pred.c != tv.dim())
        throw std::invalid_argument("evaluate: schema mismatch");
    const auto amp_idx = tv.indices_by_role(sim::Role::Amplitude);

    EvalReport rep;
    rep.variant = variant_name;
    rep.n_samples = pred.r;

    std::vector<double> all_p, all_t;
    for (size_t m = 0; m < amp_idx.size(); ++m) {
        int j = amp_idx[m];
        std::vector<double> p(pred.r), t(pred.r);
        for (int i = 0; i < pred.r; ++i) {
            p[i] = pred.at(i, j);
            t[i] = target.at(i, j);
            all_p.push_back(p[i]);
            all_t.push_back(t[i]);
        }
        MapeResult mr = mape(p, t);
        rep.per_metabolite.push_back({tv.schema[j].symbol, mr.mean, mr.std});
        rep.excluded_zero_targets += mr.excluded;
    }
    MapeResult cum = mape(all_p, all_t);
    rep.mape = cum.mean;
    rep.std = cum.std;
    rep.r2 = r_squared(all_p, all_t);

    // fixed-range APE histogram for the report plots
    auto apes = absolute_percent_errors(all_p, all_t);
    rep.ape_histogram.assign(kApeHistogramBins, 0.0);
    rep.ape_histogram_max = 200.0;
    for (double a : apes) {
        int bin = a >= rep.ape_histogram_max
                      ? kApeHistogramBins - 1
                      : static_cast<int>(a / rep.ape_histogram_max * kApeHistogramBins);
        rep.ape_histogram[std::clamp(bin, 0, kApeHistogramBins - 1)] += 1.0;
    }
    return rep;
}

EvalReport evaluate(nn::ResNet1D& model, const sim::Dataset& ds, int batch_size) {
    int begin = ds.n_train, end = ds.n;
    if (begin >= end) throw std::invalid_argument("evaluate: dataset has no validation rows");
    Mat pred = predict(model, ds, begin, end, batch_size);
    Mat tgt = targets(ds, begin, end);
    return evaluate_predictions(pred, tgt, ds.task, sim::to_string(ds.variant));
}

}  // namespace specdrop::metrics
