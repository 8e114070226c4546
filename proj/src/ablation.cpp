#include "specdrop/harness/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace specdrop::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<DropoutSpec> dropout_from_json(const json& arr) {
    std::vector<DropoutSpec> out;
    for (const auto& e : arr) {
        DropoutSpec d;
        d.technique = dropout::technique_from_string(e.at("technique").get<std::string>());
        if (e.contains("placement"))
            d.placement = dropout::placement_from_string(e.at("placement").get<std::string>());
        d.p_max = e.value("p_max", d.p_max);
        if (e.contains("q_threshold")) d.q_threshold = e.at("q_threshold").get<double>();
        if (e.contains("activation_epoch")) d.activation_epoch = e.at("activation_epoch").get<int>();
        d.deterministic_clusters = e.value("deterministic_clusters", false);
        out.push_back(d);
    }
    return out;
}

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name)
        out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '_';
    return out;
}

std::string drop_prob_label(const std::vector<DropoutSpec>& specs) {
    if (specs.empty()) return "- -";
    std::vector<double> ps;
    for (const auto& d : specs)
        if (std::find(ps.begin(), ps.end(), d.p_max) == ps.end()) ps.push_back(d.p_max);
    std::string out;
    char buf[32];
    for (size_t i = 0; i < ps.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%g", ps[i]);
        out += (i ? "/" : "") + std::string(buf);
    }
    return out;
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

AblationConfig AblationConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("ablation config is not valid JSON");
    AblationConfig cfg;
    if (!j.contains("base")) throw ConfigError("ablation config: missing base run config");
    cfg.base = RunConfig::from_json(j.at("base").dump());
    cfg.out_dir = j.value("out_dir", std::string{});
    if (cfg.out_dir.empty()) throw ConfigError("ablation config: out_dir is required");
    cfg.jobs = j.value("jobs", 1);
    if (!j.contains("runs") || j.at("runs").empty())
        throw ConfigError("ablation config: at least one run is required");
    for (const auto& e : j.at("runs")) {
        AblationRun r;
        r.name = e.at("name").get<std::string>();
        r.dropout = dropout_from_json(e.value("dropout", json::array()));
        if (e.contains("lr")) r.lr = e.at("lr").get<double>();
        if (e.contains("seed")) r.seed = e.at("seed").get<uint64_t>();
        cfg.runs.push_back(std::move(r));
    }
    return cfg;
}

AblationConfig AblationConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open ablation config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

AblationTable ablate(const AblationConfig& cfg) {
    const std::string out_root = resolve_out_path(cfg.out_dir);
    fs::create_directories(out_root);

    std::vector<AblationRow> rows(cfg.runs.size());
    std::vector<std::string> errors(cfg.runs.size());

    auto execute = [&](size_t i) {
        const AblationRun& run = cfg.runs[i];
        AblationRow& row = rows[i];
        row.technique = run.name;
        row.drop_prob = drop_prob_label(run.dropout);
        size_t k = run.dropout.size();
        row.group = k == 0 ? "I" : (k == 1 ? "II" : "III");
        try {
            RunConfig rc = cfg.base;
            rc.dropout = run.dropout;
            if (run.lr) rc.lr = *run.lr;
            if (run.seed) rc.seed = *run.seed;
            rc.out_dir = (fs::path(cfg.out_dir) / sanitize(run.name)).string();
            RunRecord rec = train(rc);
            if (rec.diverged || rec.best_epoch < 0) {
                row.failed = true;
                errors[i] = rec.divergence_reason;
                return;
            }
            row.epoch = rec.best_epoch;
            row.mape = rec.best_eval.mape;
            row.std = rec.best_eval.std;
            row.r2 = rec.best_eval.r2;
            auto it = rec.best_eval.s_bar.find("mape");
            row.s_bar = it != rec.best_eval.s_bar.end() ? it->second : 0.0;
        } catch (const std::exception& e) {
            row.failed = true;
            errors[i] = e.what();
        }
    };

    int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (size_t i = 0; i < cfg.runs.size(); ++i) execute(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < cfg.runs.size(); i = next.fetch_add(1)) execute(i);
            });
        for (auto& th : pool) th.join();
    }

    // keep the three-group ordering: baseline, individual, combinations
    AblationTable table;
    for (const char* g : {"I", "II", "III"})
        for (const auto& r : rows)
            if (r.group == g) table.rows.push_back(r);

    write_table(table, out_root);
    for (size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            std::fprintf(stderr, "ablation run '%s' failed: %s\n", cfg.runs[i].name.c_str(),
                         errors[i].c_str());
    return table;
}

std::string table_to_csv(const AblationTable& table) {
    // technique names may carry commas ("dC, FAD_I, wFAD_O"), so that field
    // is always quoted
    std::string out = "group,technique,drop prob,Epoch,MAPE,STD,r2,S_bar\n";
    for (const auto& r : table.rows) {
        out += r.group + ",\"" + r.technique + "\"," + r.drop_prob + ",";
        if (r.failed) {
            out += "na,na,na,na,na\n";
        } else {
            out += std::to_string(r.epoch) + "," + num(r.mape) + "," + num(r.std) + "," + num(r.r2) +
                   "," + num(r.s_bar) + "\n";
        }
    }
    return out;
}

AblationTable table_from_csv(const std::string& text) {
    AblationTable table;
    std::istringstream ss(text);
    std::string line;
    std::getline(ss, line);
    if (line != "group,technique,drop prob,Epoch,MAPE,STD,r2,S_bar")
        throw std::runtime_error("unexpected ablation csv header: " + line);
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        AblationRow r;
        size_t a = line.find(',');
        r.group = line.substr(0, a);
        size_t pos = a + 1;
        if (pos >= line.size() || line[pos] != '"')
            throw std::runtime_error("technique field must be quoted: " + line);
        size_t close = line.find('"', pos + 1);
        r.technique = line.substr(pos + 1, close - pos - 1);
        pos = close + 2;  // skip closing quote and comma
        std::vector<std::string> cells;
        while (cells.size() < 5) {
            size_t comma = line.find(',', pos);
            cells.push_back(line.substr(pos, comma - pos));
            pos = comma == std::string::npos ? line.size() : comma + 1;
        }
        cells.push_back(pos <= line.size() ? line.substr(pos) : std::string{});
        r.drop_prob = cells[0];
        if (cells[1] == "na") {
            r.failed = true;
        } else {
            r.epoch = std::stoi(cells[1]);
            r.mape = std::stod(cells[2]);
            r.std = std::stod(cells[3]);
            r.r2 = std::stod(cells[4]);
            r.s_bar = std::stod(cells[5]);
        }
        table.rows.push_back(std::move(r));
    }
    return table;
}

std::string table_to_json(const AblationTable& table) {
    json arr = json::array();
    for (const auto& r : table.rows) {
        json e;
        e["group"] = r.group;
        e["technique"] = r.technique;
        e["drop_prob"] = r.drop_prob;
        e["failed"] = r.failed;
        if (!r.failed) {
            e["epoch"] = r.epoch;
            e["mape"] = r.mape;
            e["std"] = r.std;
            e["r2"] = r.r2;
            e["s_bar"] = r.s_bar;
        }
        arr.push_back(e);
    }
    return json{{"rows", arr}}.dump(2);
}

void write_table(const AblationTable& table, const std::string& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "ablation.csv");
        f << table_to_csv(table);
    }
    {
        std::ofstream f(fs::path(out_dir) / "ablation.json");
        f << table_to_json(table) << "\n";
    }
}

AblationTable read_table_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open ablation table: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return table_from_csv(ss.str());
}

}  // namespace specdrop::harness
