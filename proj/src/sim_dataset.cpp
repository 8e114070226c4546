#include "specdrop/sim/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace specdrop::sim {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'E', 'C', 'D', 'S', 'E', 'T'};
constexpr int kFormatVersion = 1;

static_assert(sizeof(float) == 4, "dataset format requires 32-bit floats");

nlohmann::json schema_to_json(const TaskVariant& tv) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : tv.schema)
        arr.push_back({{"symbol", p.symbol}, {"role", to_string(p.role)}, {"low", p.low}, {"high", p.high}});
    return arr;
}

TaskVariant schema_from_json(Variant id, const nlohmann::json& arr) {
    TaskVariant tv = make_variant(id);  // metabolite list is variant-determined
    if (arr.size() != tv.schema.size())
        throw std::runtime_error("dataset schema length does not match its variant");
    for (size_t i = 0; i < tv.schema.size(); ++i) {
        const auto& e = arr[i];
        tv.schema[i].symbol = e.at("symbol").get<std::string>();
        tv.schema[i].role = role_from_string(e.at("role").get<std::string>());
        tv.schema[i].low = e.at("low").get<double>();
        tv.schema[i].high = e.at("high").get<double>();
    }
    return tv;
}

}  // namespace

Dataset generate_dataset(Variant variant, int n, uint64_t seed, double split,
                         const GenerateOptions& opt) {
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("generate_dataset: split must be in (0, 1)");

    Dataset ds;
    ds.variant = variant;
    ds.task = make_variant(variant, opt.bounds);
    ds.n = n;
    ds.n_train = static_cast<int>(std::lround(n * split));
    ds.split = split;
    ds.seed = seed;

    const BasisSet basis = build_basis_set(ds.task, opt.grid);
    const int dim = ds.task.dim();
    ds.spectra.assign(static_cast<size_t>(n) * kOutLen, 0.0f);
    ds.targets.assign(static_cast<size_t>(n) * dim, 0.0f);

    auto make_sample = [&](int i) {
        // one substream per sample: sample order and thread count never
        // change the result
        Rng rng = Rng::substream(seed, static_cast<uint64_t>(i));
        ParameterVector pv = sample_parameters(ds.task, rng, basis.library_size());
        Spectrum sp = synthesize(pv, basis, &rng);
        float* srow = ds.spectra.data() + static_cast<size_t>(i) * kOutLen;
        for (int j = 0; j < kOutLen; ++j) srow[j] = static_cast<float>(sp.signal[j]);
        float* trow = ds.targets.data() + static_cast<size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) trow[j] = static_cast<float>(pv.values[j]);
    };

    int threads = opt.threads > 0 ? opt.threads
                                  : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) make_sample(i);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (int i = t; i < n; i += threads) make_sample(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    nlohmann::json header = {
        {"version", kFormatVersion},
        {"variant", to_string(ds.variant)},
        {"n", ds.n},
        {"n_train", ds.n_train},
        {"split", ds.split},
        {"seed", ds.seed},
        {"schema", schema_to_json(ds.task)},
        {"ppm", {kPpmHigh, kPpmLow}},
        {"spectrum_length", kOutLen},
        {"generator", ds.generator},
    };
    std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    f.write(reinterpret_cast<const char*>(ds.spectra.data()),
            static_cast<std::streamsize>(ds.spectra.size() * sizeof(float)));
    f.write(reinterpret_cast<const char*>(ds.targets.data()),
            static_cast<std::streamsize>(ds.targets.size() * sizeof(float)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open dataset: " + path);

    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("malformed dataset header (bad magic): " + path);

    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f || hlen == 0 || hlen > (1u << 20)) throw std::runtime_error("malformed dataset header: " + path);
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("malformed dataset header: " + path);

    nlohmann::json header = nlohmann::json::parse(htext, nullptr, false);
    if (header.is_discarded()) throw std::runtime_error("dataset header is not valid JSON: " + path);
    int version = header.at("version").get<int>();
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported dataset version " + std::to_string(version) + ": " + path);

    Dataset ds;
    ds.variant = variant_from_string(header.at("variant").get<std::string>());
    ds.task = schema_from_json(ds.variant, header.at("schema"));
    ds.n = header.at("n").get<int>();
    ds.n_train = header.at("n_train").get<int>();
    ds.split = header.at("split").get<double>();
    ds.seed = header.at("seed").get<uint64_t>();
    ds.generator = header.value("generator", std::string{});
    if (header.at("spectrum_length").get<int>() != kOutLen)
        throw std::runtime_error("unsupported spectrum length in dataset: " + path);
    if (ds.n < 0 || ds.n_train < 0 || ds.n_train > ds.n)
        throw std::runtime_error("inconsistent row counts in dataset header: " + path);

    size_t ns = static_cast<size_t>(ds.n) * kOutLen;
    size_t nt = static_cast<size_t>(ds.n) * ds.task.dim();
    ds.spectra.resize(ns);
    ds.targets.resize(nt);
    f.read(reinterpret_cast<char*>(ds.spectra.data()), static_cast<std::streamsize>(ns * sizeof(float)));
    f.read(reinterpret_cast<char*>(ds.targets.data()), static_cast<std::streamsize>(nt * sizeof(float)));
    if (!f || static_cast<size_t>(f.gcount()) != nt * sizeof(float))
        throw std::runtime_error("dataset payload shorter than header row count: " + path);
    f.peek();
    if (!f.eof()) throw std::runtime_error("dataset payload longer than header row count: " + path);
    return ds;
}

}  // namespace specdrop::sim
