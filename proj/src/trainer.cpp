#include "specdrop/harness/trainer.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "specdrop/loss/adaptive.hpp"

namespace specdrop::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string log_to_csv(const std::vector<LogRow>& rows) {
    std::string out = "epoch,metric,split,value\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.value);
        out += std::to_string(r.epoch) + "," + r.metric + "," + r.split + "," + buf + "\n";
    }
    return out;
}

std::vector<LogRow> log_from_csv(const std::string& text) {
    std::vector<LogRow> rows;
    std::istringstream ss(text);
    std::string line;
    std::getline(ss, line);  // header
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        LogRow r;
        size_t a = line.find(','), b = line.find(',', a + 1), c = line.find(',', b + 1);
        if (a == std::string::npos || b == std::string::npos || c == std::string::npos)
            throw std::runtime_error("malformed metrics csv line: " + line);
        r.epoch = std::stoi(line.substr(0, a));
        r.metric = line.substr(a + 1, b - a - 1);
        r.split = line.substr(b + 1, c - b - 1);
        r.value = std::stod(line.substr(c + 1));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<double> extract_series(const std::vector<LogRow>& rows, const std::string& metric,
                                   const std::string& split) {
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.metric == metric && r.split == split) out.push_back(r.value);
    return out;
}

std::string environment_fingerprint() {
    std::string env = "cxx=";
    env += __VERSION__;
    env += ";eigen=" + std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
           "." + std::to_string(EIGEN_MINOR_VERSION);
    return env;
}

namespace {

Tensor batch_inputs(const sim::Dataset& ds, const std::vector<int>& idx, int start, int bs) {
    Tensor x(bs, 1, sim::kOutLen);
    for (int i = 0; i < bs; ++i) {
        const float* row = ds.spectrum_row(idx[start + i]);
        double* dst = x.row(i, 0);
        for (int j = 0; j < sim::kOutLen; ++j) dst[j] = row[j];
    }
    return x;
}

Mat batch_targets(const Mat& all, const std::vector<int>& idx, int start, int bs) {
    Mat y(bs, all.c);
    for (int i = 0; i < bs; ++i)
        for (int j = 0; j < all.c; ++j) y.at(i, j) = all.at(idx[start + i], j);
    return y;
}

int dropcluster_activation_epoch(const RunConfig& cfg) {
    int e = -1;
    for (const auto& d : cfg.dropout)
        if (d.technique == dropout::Technique::DropCluster) {
            int a = d.activation_epoch.value_or(cfg.activation_epoch);
            e = e < 0 ? a : std::min(e, a);
        }
    return e;
}

}  // namespace

RunRecord train(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();

    RunRecord rec;
    rec.cfg = cfg;
    rec.config_hash = cfg.hash();
    rec.env = environment_fingerprint();
    rec.out_dir = resolve_out_path(cfg.out_dir);

    sim::Dataset ds;
    try {
        ds = sim::read_dataset(resolve_out_path(cfg.dataset));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("run config: cannot load dataset: ") + e.what());
    }
    const int n_train = ds.n_train, n_val = ds.n - ds.n_train;
    if (n_train < 1 || n_val < 1) throw ConfigError("dataset has an empty split");

    fs::create_directories(rec.out_dir);

    // emit any config warnings (e.g. rates above 0.10) once at start
    for (const auto& [site, dc] : cfg.model_config(ds.dim()).dropout_sites) {
        std::string warning = dc.validate();
        if (!warning.empty()) std::fprintf(stderr, "warning: %s: %s\n", site.c_str(), warning.c_str());
    }

    nn::ResNet1D model(cfg.model_config(ds.dim()));
    nn::Adam adam(model.params(), cfg.lr);
    loss::LossGroups groups = loss::LossGroups::from_schema(ds.task, cfg.pen_min);

    const Mat ytrain_norm = metrics::normalize_targets(ds, 0, n_train);
    const Mat yval_norm = metrics::normalize_targets(ds, n_train, ds.n);
    const Mat yval_phys = metrics::targets(ds, n_train, ds.n);

    const int dc_epoch = dropcluster_activation_epoch(cfg);
    if (dc_epoch >= 0 && n_val < 8)
        throw ConfigError("dropCluster needs at least 8 validation samples to fit clusters");

    // epoch-1 lambdas come from Eq. 4 on empty statistics
    std::map<std::string, loss::GroupStats> stats;
    for (const auto& g : groups.names()) stats[g] = {};
    std::map<std::string, double> lambdas = loss::compute_lambdas(stats, 0, cfg.pen_min);

    Rng shuffle_rng = Rng::substream(cfg.seed, 0x5A0FFE);
    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    double epoch1_mape = 0.0;
    int blowup_streak = 0;
    rec.best_val_mape = std::numeric_limits<double>::infinity();
    std::string ckpt_path = (fs::path(rec.out_dir) / "best.ckpt").string();

    auto abort_divergence = [&](int epoch, const std::string& why) {
        rec.diverged = true;
        rec.divergence_epoch = epoch;
        rec.divergence_reason = why;
    };

    for (int epoch = 1; epoch <= cfg.epochs && !rec.diverged; ++epoch) {
        // refresh the dropCluster partition once per epoch on held-out data
        if (model.needs_cluster_map() && dc_epoch >= 0 && epoch >= dc_epoch) {
            int hb = std::min(std::max(cfg.batch_size, 8), n_val);
            Tensor held(hb, 1, sim::kOutLen);
            for (int i = 0; i < hb; ++i) {
                const float* row = ds.spectrum_row(ds.n_train + i);
                double* dst = held.row(i, 0);
                for (int j = 0; j < sim::kOutLen; ++j) dst[j] = row[j];
            }
            model.set_cluster_map(dropout::fit_clusters(model.stem_features(held)));
        }

        // Fisher-Yates under the run's own stream
        for (int i = n_train - 1; i > 0; --i) {
            int j = static_cast<int>(shuffle_rng.uniform_int(static_cast<uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }

        nn::ForwardCtx train_ctx;
        train_ctx.training = true;
        train_ctx.epoch = epoch;
        train_ctx.total_epochs = cfg.epochs;

        double loss_sum = 0.0;
        try {
            for (int start = 0; start < n_train; start += cfg.batch_size) {
                int bs = std::min(cfg.batch_size, n_train - start);
                Tensor x = batch_inputs(ds, order, start, bs);
                Mat y = batch_targets(ytrain_norm, order, start, bs);
                Mat pred = model.forward(x, train_ctx);
                Mat dpred;
                double l = loss::total_loss(pred, y, groups, lambdas, &dpred);
                if (!std::isfinite(l)) throw std::runtime_error("non-finite training loss");
                model.zero_grad();
                model.backward(dpred);
                adam.step();
                loss_sum += l * bs;
            }
        } catch (const std::runtime_error& e) {
            abort_divergence(epoch, e.what());
            break;
        }
        rec.log.push_back({epoch, "loss", "train", loss_sum / n_train});

        // validation pass
        Mat pred_phys, pred_norm;
        try {
            pred_phys = metrics::predict(model, ds, n_train, ds.n, cfg.batch_size);
            pred_norm = pred_phys;
            for (int i = 0; i < pred_norm.r; ++i)
                for (int j = 0; j < pred_norm.c; ++j) {
                    const auto& sp = ds.task.schema[j];
                    double span = sp.high - sp.low;
                    if (span > 0.0) pred_norm.at(i, j) = (pred_norm.at(i, j) - sp.low) / span;
                }
        } catch (const std::runtime_error& e) {
            abort_divergence(epoch, e.what());
            break;
        }
        double val_loss = loss::total_loss(pred_norm, yval_norm, groups, lambdas);
        rec.log.push_back({epoch, "loss", "val", val_loss});

        metrics::EvalReport er =
            metrics::evaluate_predictions(pred_phys, yval_phys, ds.task, sim::to_string(ds.variant));
        rec.log.push_back({epoch, "mape", "val", er.mape});
        rec.log.push_back({epoch, "mape_std", "val", er.std});
        rec.log.push_back({epoch, "r2", "val", er.r2});

        // per-group statistics feeding Eq. 4
        for (const auto& [gname, idx] : groups.groups) {
            std::vector<double> gp, gt;
            gp.reserve(static_cast<size_t>(pred_phys.r) * idx.size());
            for (int i = 0; i < pred_phys.r; ++i)
                for (int j : idx) {
                    gp.push_back(pred_phys.at(i, j));
                    gt.push_back(yval_phys.at(i, j));
                }
            metrics::MapeResult gm = metrics::mape(gp, gt);
            rec.log.push_back({epoch, "mape_group_" + gname, "val", gm.mean});
            rec.log.push_back({epoch, "lambda_" + gname, "val", lambdas.at(gname)});

            loss::GroupStats st;
            st.r = metrics::pearson_r(gp, gt);
            double mean = 0.0;
            for (double t : gt) mean += t;
            mean /= static_cast<double>(gt.size());
            double ss_res = 0.0, ss_tot = 0.0;
            for (size_t k = 0; k < gp.size(); ++k) {
                ss_res += (gt[k] - gp[k]) * (gt[k] - gp[k]);
                ss_tot += (gt[k] - mean) * (gt[k] - mean);
            }
            st.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
            std::vector<double> mape_series = extract_series(rec.log, "mape_group_" + gname, "val");
            st.s_bar = mape_series.size() >= 3 ? metrics::s_bar(mape_series) : 0.0;
            if (cfg.normalize_sbar_in_loss) st.s_bar = st.s_bar / (1.0 + st.s_bar);
            stats[gname] = st;
        }
        lambdas = loss::compute_lambdas(stats, epoch, cfg.pen_min);

        // best-model checkpoint by validation MAPE
        if (er.mape < rec.best_val_mape) {
            rec.best_val_mape = er.mape;
            rec.best_epoch = epoch;
            er.best_epoch = epoch;
            rec.best_eval = er;
            json sidecar = {{"config_hash", rec.config_hash},
                            {"epoch", epoch},
                            {"val_mape", er.mape},
                            {"val_std", er.std},
                            {"val_r2", er.r2},
                            {"preset", nn::to_string(cfg.preset)},
                            {"output_dim", ds.dim()}};
            model.save_checkpoint(ckpt_path, sidecar.dump(2));
        }

        // sustained blow-up counts as divergence even while finite
        if (epoch == 1) {
            epoch1_mape = er.mape;
        } else if (er.mape > 10.0 * epoch1_mape) {
            if (++blowup_streak >= 3)
                abort_divergence(epoch, "validation MAPE exceeded 10x its epoch-1 value for 3 epochs");
        } else {
            blowup_streak = 0;
        }
    }

    // consistency metric of every monitored validation series, post hoc
    if (!rec.diverged || rec.best_epoch > 0) {
        for (const auto& name : {"mape", "mape_std", "r2", "loss"}) {
            auto series = extract_series(rec.log, name, "val");
            if (series.size() >= 3) rec.best_eval.s_bar[name] = metrics::s_bar(series);
        }
        auto train_loss = extract_series(rec.log, "loss", "train");
        if (train_loss.size() >= 3) rec.best_eval.s_bar["loss_train"] = metrics::s_bar(train_loss);
        rec.best_eval.best_epoch = rec.best_epoch;
    }

    rec.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_record(rec);
    return rec;
}

void write_record(const RunRecord& rec) {
    fs::create_directories(rec.out_dir);
    {
        std::ofstream f(fs::path(rec.out_dir) / "metrics.csv");
        f << log_to_csv(rec.log);
    }
    {
        json j;
        j["config"] = json::parse(rec.cfg.to_json());
        j["config_hash"] = rec.config_hash;
        j["env"] = rec.env;
        j["wallclock_s"] = rec.wallclock_s;
        j["best_epoch"] = rec.best_epoch;
        j["best_val_mape"] = rec.best_val_mape;
        j["diverged"] = rec.diverged;
        if (rec.diverged) {
            j["divergence_reason"] = rec.divergence_reason;
            j["divergence_epoch"] = rec.divergence_epoch;
        }
        std::ofstream f(fs::path(rec.out_dir) / "run.json");
        f << j.dump(2) << "\n";
    }
    if (rec.best_epoch > 0) {
        std::ofstream f(fs::path(rec.out_dir) / "report.json");
        f << metrics::report_to_json(rec.best_eval) << "\n";
    }
}

RunRecord read_record(const std::string& run_dir) {
    RunRecord rec;
    rec.out_dir = run_dir;
    std::ifstream mf(fs::path(run_dir) / "metrics.csv");
    if (!mf) throw std::runtime_error("no metrics.csv under " + run_dir);
    std::stringstream ms;
    ms << mf.rdbuf();
    rec.log = log_from_csv(ms.str());

    std::ifstream rf(fs::path(run_dir) / "run.json");
    if (!rf) throw std::runtime_error("no run.json under " + run_dir);
    json j = json::parse(rf);
    rec.cfg = RunConfig::from_json(j.at("config").dump());
    rec.config_hash = j.at("config_hash").get<std::string>();
    rec.env = j.value("env", std::string{});
    rec.wallclock_s = j.value("wallclock_s", 0.0);
    rec.best_epoch = j.value("best_epoch", -1);
    rec.best_val_mape = j.value("best_val_mape", 0.0);
    rec.diverged = j.value("diverged", false);
    rec.divergence_reason = j.value("divergence_reason", std::string{});
    rec.divergence_epoch = j.value("divergence_epoch", -1);

    std::ifstream ef(fs::path(run_dir) / "report.json");
    if (ef) {
        std::stringstream es;
        es << ef.rdbuf();
        rec.best_eval = metrics::report_from_json(es.str());
    }
    return rec;
}

}  // namespace specdrop::harness
