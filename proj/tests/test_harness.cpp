#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "specdrop/harness/ablation.hpp"
#include "specdrop/harness/report.hpp"
#include "specdrop/harness/trainer.hpp"
#include "specdrop/sim/dataset.hpp"

using namespace specdrop;
using namespace specdrop::harness;

namespace fs = std::filesystem;

namespace {

const std::string kWork = (fs::temp_directory_path() / "specdrop_harness_tests").string();

std::string dataset_path(sim::Variant v, int n, uint64_t seed) {
    fs::create_directories(kWork);
    std::string path = kWork + "/" + sim::to_string(v) + "_" + std::to_string(n) + "_" +
                       std::to_string(seed) + ".sds";
    if (!fs::exists(path)) {
        auto ds = sim::generate_dataset(v, n, seed, 0.8);
        sim::write_dataset(ds, path);
    }
    return path;
}

RunConfig small_config(const std::string& out, int epochs = 4) {
    RunConfig cfg;
    cfg.dataset = dataset_path(sim::Variant::Simple7, 300, 5);
    cfg.out_dir = kWork + "/" + out;
    cfg.epochs = epochs;
    cfg.batch_size = 60;
    cfg.lr = 0.003;
    cfg.seed = 21;
    cfg.activation_epoch = std::min(10, epochs - 1);
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<DropoutSpec> combo_dropout() {
    DropoutSpec dc;
    dc.technique = dropout::Technique::DropCluster;
    dc.p_max = 0.10;
    DropoutSpec fad_i;
    fad_i.technique = dropout::Technique::Fad;
    fad_i.placement = dropout::Placement::Inside;
    fad_i.p_max = 0.025;
    DropoutSpec wfad_o;
    wfad_o.technique = dropout::Technique::Wfad;
    wfad_o.placement = dropout::Placement::Outside;
    wfad_o.p_max = 0.025;
    return {dc, fad_i, wfad_o};
}

}  // namespace

TEST_CASE("run config JSON round trip and validation") {
    RunConfig cfg = small_config("cfg_roundtrip");
    cfg.dropout = combo_dropout();
    RunConfig back = RunConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    CHECK(back.hash() == cfg.hash());

    RunConfig bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.activation_epoch = cfg.epochs;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.dropout[1].p_max = 0.30;  // 4x multiplier pushes past 1
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.dataset = "";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("missing dataset is a config error") {
    RunConfig cfg = small_config("cfg_missing");
    cfg.dataset = kWork + "/does_not_exist.sds";
    CHECK_THROWS_AS(train(cfg), ConfigError);
}

TEST_CASE("training writes a complete, reloadable run record") {
    RunConfig cfg = small_config("run_basic");
    RunRecord rec = train(cfg);
    CHECK_FALSE(rec.diverged);
    CHECK(rec.best_epoch >= 1);
    CHECK(fs::exists(fs::path(rec.out_dir) / "metrics.csv"));
    CHECK(fs::exists(fs::path(rec.out_dir) / "run.json"));
    CHECK(fs::exists(fs::path(rec.out_dir) / "best.ckpt"));
    CHECK(fs::exists(fs::path(rec.out_dir) / "report.json"));

    RunRecord back = read_record(rec.out_dir);
    CHECK(back.config_hash == rec.config_hash);
    CHECK(back.best_epoch == rec.best_epoch);
    CHECK(back.log.size() == rec.log.size());
    for (size_t i = 0; i < rec.log.size(); ++i) {
        CHECK(back.log[i].metric == rec.log[i].metric);
        CHECK(back.log[i].value == rec.log[i].value);
    }
    CHECK(back.best_eval.mape == rec.best_eval.mape);

    // every epoch logged the expected metric set
    auto mape_series = extract_series(rec.log, "mape", "val");
    CHECK(static_cast<int>(mape_series.size()) == cfg.epochs);
    CHECK(extract_series(rec.log, "loss", "train").size() == mape_series.size());
    CHECK(extract_series(rec.log, "lambda_metabolites", "val").size() == mape_series.size());
}

TEST_CASE("identical configs produce bit-identical metric logs") {
    RunConfig a = small_config("det_a");
    RunConfig b = small_config("det_b");
    train(a);
    train(b);
    CHECK(slurp(kWork + "/det_a/metrics.csv") == slurp(kWork + "/det_b/metrics.csv"));
}

TEST_CASE("dropout runs are log-identical to the baseline before activation") {
    RunConfig base = small_config("inert_base", 12);
    base.activation_epoch = 10;
    RunConfig dropped = small_config("inert_drop", 12);
    dropped.activation_epoch = 10;
    dropped.dropout = combo_dropout();

    RunRecord rb = train(base);
    RunRecord rd = train(dropped);

    auto upto = [](const std::vector<LogRow>& rows, int epoch_cap) {
        std::vector<LogRow> out;
        for (const auto& r : rows)
            if (r.epoch <= epoch_cap) out.push_back(r);
        return out;
    };
    auto lb = upto(rb.log, 9), ld = upto(rd.log, 9);
    REQUIRE(lb.size() == ld.size());
    for (size_t i = 0; i < lb.size(); ++i) {
        CHECK(lb[i].metric == ld[i].metric);
        CHECK(lb[i].value == ld[i].value);
    }
    // once the schedule passes the activation epoch the logs must diverge
    auto full_b = extract_series(rb.log, "loss", "train");
    auto full_d = extract_series(rd.log, "loss", "train");
    CHECK(full_b != full_d);
}

TEST_CASE("reloading the best checkpoint reproduces the recorded report exactly") {
    RunConfig cfg = small_config("ckpt_run", 5);
    RunRecord rec = train(cfg);

    auto ds = sim::read_dataset(cfg.dataset);
    nn::ResNet1D model(cfg.model_config(ds.dim()));
    model.load_checkpoint((fs::path(rec.out_dir) / "best.ckpt").string());
    auto er = metrics::evaluate(model, ds, cfg.batch_size);
    CHECK(er.mape == rec.best_eval.mape);
    CHECK(er.std == rec.best_eval.std);
    CHECK(er.r2 == rec.best_eval.r2);
    for (size_t m = 0; m < er.per_metabolite.size(); ++m) {
        CHECK(er.per_metabolite[m].mape == rec.best_eval.per_metabolite[m].mape);
        CHECK(er.per_metabolite[m].std == rec.best_eval.per_metabolite[m].std);
    }
}

TEST_CASE("huge learning rates diverge with a marked record") {
    RunConfig cfg = small_config("diverge_run", 4);
    cfg.lr = 1e200;
    RunRecord rec = train(cfg);
    CHECK(rec.diverged);
    CHECK(rec.divergence_epoch >= 1);
    CHECK_FALSE(rec.divergence_reason.empty());
}

TEST_CASE("ablation assembles the three-group table and marks failures") {
    AblationConfig acfg;
    // 4 epochs so the sustained-blow-up divergence rule can trip for the
    // broken run (batch norm keeps its loss finite)
    acfg.base = small_config("unused", 4);
    acfg.base.out_dir.clear();
    acfg.out_dir = kWork + "/ablation";
    acfg.jobs = 2;

    AblationRun baseline{"ResNet", {}, std::nullopt, std::nullopt};
    DropoutSpec fad_o;
    fad_o.technique = dropout::Technique::Fad;
    fad_o.placement = dropout::Placement::Outside;
    fad_o.p_max = 0.05;
    AblationRun individual{"FAD_O", {fad_o}, std::nullopt, std::nullopt};
    AblationRun combo{"dC, FAD_I, wFAD_O", combo_dropout(), std::nullopt, std::nullopt};
    AblationRun broken{"wFD_O", {fad_o}, 1e200, std::nullopt};  // forced divergence
    acfg.runs = {baseline, individual, combo, broken};

    AblationTable table = ablate(acfg);
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[0].group == "I");
    CHECK(table.rows[0].technique == "ResNet");
    CHECK(table.rows[0].drop_prob == "- -");
    CHECK_FALSE(table.rows[0].failed);
    CHECK(table.rows[1].group == "II");
    CHECK(table.rows[2].group == "II");
    CHECK(table.rows[3].group == "III");
    CHECK(table.rows[3].technique == "dC, FAD_I, wFAD_O");
    CHECK(table.rows[3].drop_prob == "0.1/0.025");

    int failed = 0;
    for (const auto& r : table.rows) failed += r.failed ? 1 : 0;
    CHECK(failed == 1);

    // emitted files carry the exact column set of the study table
    std::string csv = slurp(kWork + "/ablation/ablation.csv");
    CHECK(csv.rfind("group,technique,drop prob,Epoch,MAPE,STD,r2,S_bar\n", 0) == 0);
    CHECK(csv.find("na,na,na,na,na") != std::string::npos);
}

TEST_CASE("ablation tables survive a CSV round trip unchanged") {
    AblationTable t;
    t.rows.push_back({"I", "ResNet", "- -", false, 97, 22.51, 13.10, 0.96, 71.27});
    t.rows.push_back({"II", "wFD_O", "0.05", true, -1, 0, 0, 0, 0});
    t.rows.push_back({"III", "dC, FAD_I, wFAD_O", "0.1/0.025", false, 88, 16.24, 2.13, 0.94, 5.14});
    AblationTable back = table_from_csv(table_to_csv(t));
    CHECK(back == t);
}

TEST_CASE("reports annotate each curve with the series' consistency metric") {
    RunConfig cfg = small_config("report_run", 5);
    RunRecord rec = train(cfg);
    auto files = report_run(rec.out_dir, rec.out_dir + "/report");

    bool looked = false;
    for (const auto& f : files) {
        if (f.find("curve_mape.svg") == std::string::npos) continue;
        looked = true;
        std::string svg = slurp(f);
        auto at = svg.find("data-sbar=\"");
        REQUIRE(at != std::string::npos);
        at += 11;
        double annotated = std::stod(svg.substr(at, svg.find('"', at) - at));
        double expect = metrics::s_bar(extract_series(rec.log, "mape", "val"));
        CHECK(annotated == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(looked);
    bool has_hist = false;
    for (const auto& f : files) has_hist |= f.find("ape_histogram.svg") != std::string::npos;
    CHECK(has_hist);
}

TEST_CASE("the output root environment variable prefixes relative paths") {
    setenv("SPECDROP_OUT_ROOT", "/tmp/specdrop_root_test", 1);
    CHECK(resolve_out_path("runs/x") == "/tmp/specdrop_root_test/runs/x");
    CHECK(resolve_out_path("/abs/path") == "/abs/path");
    unsetenv("SPECDROP_OUT_ROOT");
    CHECK(resolve_out_path("runs/x") == "runs/x");
}
