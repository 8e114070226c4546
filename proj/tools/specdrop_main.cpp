// specdrop: simulate spectra, train models, run ablations, emit reports.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "specdrop/harness/ablation.hpp"
#include "specdrop/harness/report.hpp"
#include "specdrop/harness/trainer.hpp"
#include "specdrop/sim/dataset.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitConfig = 3;

int cmd_simulate(const std::string& variant, int n, uint64_t seed, double split,
                 const std::string& out, int threads) {
    using namespace specdrop;
    sim::GenerateOptions opt;
    opt.threads = threads;
    sim::Dataset ds = sim::generate_dataset(sim::variant_from_string(variant), n, seed, split, opt);
    std::string path = harness::resolve_out_path(out);
    sim::write_dataset(ds, path);
    std::printf("wrote %d spectra (%d train / %d val, %s) to %s\n", ds.n, ds.n_train, ds.n - ds.n_train,
                variant.c_str(), path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace specdrop;
    CLI::App app{"structured-dropout spectral regression toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "generate a labelled spectrum dataset");
    std::string variant = "standard14", sim_out;
    int sim_n = 1000, sim_threads = 0;
    uint64_t sim_seed = 1;
    double sim_split = 0.8;
    sim_cmd->add_option("--variant", variant, "simple7|standard14|complex26");
    sim_cmd->add_option("--n", sim_n, "number of spectra")->required();
    sim_cmd->add_option("--seed", sim_seed, "generator seed");
    sim_cmd->add_option("--split", sim_split, "train fraction");
    sim_cmd->add_option("--out", sim_out, "output path")->required();
    sim_cmd->add_option("--threads", sim_threads, "worker threads (0 = auto)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train one model from a run config");
    std::string train_cfg_path, ov_dataset, ov_out, ov_preset;
    int ov_epochs = -1, ov_batch = -1;
    double ov_lr = -1.0;
    long long ov_seed = -1;
    train_cmd->add_option("--config", train_cfg_path, "run config JSON")->required();
    train_cmd->add_option("--dataset", ov_dataset, "override dataset path");
    train_cmd->add_option("--out", ov_out, "override output directory");
    train_cmd->add_option("--epochs", ov_epochs, "override epoch count");
    train_cmd->add_option("--batch-size", ov_batch, "override batch size");
    train_cmd->add_option("--lr", ov_lr, "override learning rate");
    train_cmd->add_option("--seed", ov_seed, "override seed");
    train_cmd->add_option("--preset", ov_preset, "override model preset");

    // ablate
    auto* abl_cmd = app.add_subcommand("ablate", "run an ablation matrix");
    std::string abl_cfg_path;
    int abl_jobs = -1;
    abl_cmd->add_option("--config", abl_cfg_path, "ablation config JSON")->required();
    abl_cmd->add_option("--jobs", abl_jobs, "parallel runs");

    // report
    auto* rep_cmd = app.add_subcommand("report", "emit plots and tables from run outputs");
    std::string rep_run, rep_abl, rep_out;
    rep_cmd->add_option("--run", rep_run, "run directory (metrics.csv + run.json)");
    rep_cmd->add_option("--ablation", rep_abl, "ablation directory (ablation.csv)");
    rep_cmd->add_option("--out", rep_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim_cmd->parsed())
            return cmd_simulate(variant, sim_n, sim_seed, sim_split, sim_out, sim_threads);

        if (train_cmd->parsed()) {
            harness::RunConfig cfg = harness::RunConfig::load(train_cfg_path);
            if (!ov_dataset.empty()) cfg.dataset = ov_dataset;
            if (!ov_out.empty()) cfg.out_dir = ov_out;
            if (ov_epochs > 0) cfg.epochs = ov_epochs;
            if (ov_batch > 0) cfg.batch_size = ov_batch;
            if (ov_lr > 0) cfg.lr = ov_lr;
            if (ov_seed >= 0) cfg.seed = static_cast<uint64_t>(ov_seed);
            if (!ov_preset.empty()) cfg.preset = nn::preset_from_string(ov_preset);
            harness::RunRecord rec = harness::train(cfg);
            if (rec.diverged) {
                std::fprintf(stderr, "run diverged at epoch %d: %s\n", rec.divergence_epoch,
                             rec.divergence_reason.c_str());
                return kExitDivergence;
            }
            std::printf("best epoch %d: MAPE %.4f, STD %.4f, r2 %.4f\n", rec.best_epoch,
                        rec.best_eval.mape, rec.best_eval.std, rec.best_eval.r2);
            return kExitOk;
        }

        if (abl_cmd->parsed()) {
            harness::AblationConfig cfg = harness::AblationConfig::load(abl_cfg_path);
            if (abl_jobs > 0) cfg.jobs = abl_jobs;
            harness::AblationTable table = harness::ablate(cfg);
            std::fputs(harness::table_to_csv(table).c_str(), stdout);
            for (const auto& row : table.rows)
                if (row.failed) return kExitDivergence;
            return kExitOk;
        }

        if (rep_cmd->parsed()) {
            if (rep_run.empty() == rep_abl.empty())
                throw harness::ConfigError("report needs exactly one of --run or --ablation");
            if (!rep_run.empty()) {
                std::string out = rep_out.empty() ? rep_run + "/report" : rep_out;
                auto files = harness::report_run(harness::resolve_out_path(rep_run),
                                                 harness::resolve_out_path(out));
                for (const auto& f : files) std::printf("%s\n", f.c_str());
            } else {
                std::string out = rep_out.empty() ? rep_abl : rep_out;
                auto table = harness::read_table_csv(
                    harness::resolve_out_path(rep_abl) + "/ablation.csv");
                harness::write_table(table, harness::resolve_out_path(out));
                std::printf("%s/ablation.csv\n", out.c_str());
            }
            return kExitOk;
        }
    } catch (const harness::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}
