#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anderson/eig.hpp"
#include "anderson/harness.hpp"
#include "anderson/io.hpp"
#include "anderson/realizations.hpp"

using nlohmann::json;

namespace {

// Flags shared by every experiment subcommand. Unset flags leave the config alone.
struct CommonFlags {
    std::string config;
    std::optional<int> dim;
    std::optional<int> half_side;
    std::optional<std::string> disorder;
    std::optional<std::string> boundary;
    std::optional<std::size_t> realizations;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::optional<std::string> dos_table;
    std::optional<std::string> dos_hash;
};

struct ExtraFlags {
    std::optional<double> e0, e0_prime, beta, delta, tau, ell, width;
    std::optional<std::size_t> grid_points, bandwidth_steps;
    std::optional<std::string> mode, normalization;
    std::optional<std::vector<int>> half_sides;
    std::optional<std::vector<double>> epsilon;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "JSON experiment configuration");
    sub->add_option("--dim", f.dim, "lattice dimension");
    sub->add_option("--half-side", f.half_side, "box half side L (M = 2L+1)");
    sub->add_option("--disorder", f.disorder, "single-site distribution as JSON");
    sub->add_option("--boundary", f.boundary, "periodic|simple")->check(CLI::IsMember({"periodic", "simple"}));
    sub->add_option("--realizations", f.realizations, "number of disorder realizations");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--workers", f.workers, "worker threads");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--dos-table", f.dos_table, "calibrated DOS table file");
    sub->add_option("--dos-table-hash", f.dos_hash, "expected hash of the DOS table");
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return json::parse(in);
}

class Merge {
public:
    explicit Merge(json& doc) : doc_(doc) {}

    template <class T>
    void set(const std::optional<T>& v, const std::string& block, const std::string& key) {
        if (!v) return;
        doc_[block][key] = *v;
        overrides.push_back(block + "." + key);
    }

    std::vector<std::string> overrides;

private:
    json& doc_;
};

int run_subcommand(const std::string& kind, const CommonFlags& f, const ExtraFlags& x) {
    json doc = load_config(f.config);
    if (doc.contains("kind") && doc["kind"] != kind)
        throw std::invalid_argument("config kind '" + doc["kind"].get<std::string>() + "' does not match subcommand " +
                                    kind);
    doc["kind"] = kind;
    Merge m(doc);
    m.set(f.dim, "model", "dim");
    m.set(f.half_side, "model", "half_side");
    if (f.disorder) m.set(std::optional<json>(json::parse(*f.disorder)), "model", "disorder");
    m.set(f.boundary, "model", "boundary");
    m.set(x.half_sides, "model", "half_sides");
    m.set(f.realizations, "run", "realizations");
    m.set(f.seed, "run", "seed");
    m.set(f.workers, "run", "workers");
    m.set(f.out, "run", "out");
    m.set(f.dos_table, "dos_table", "path");
    m.set(f.dos_hash, "dos_table", "hash");
    m.set(x.grid_points, "dos_table", "grid_points");
    m.set(x.bandwidth_steps, "dos_table", "bandwidth_steps");
    m.set(x.e0, "stats", "e0");
    m.set(x.e0_prime, "stats", "e0_prime");
    m.set(x.beta, "stats", "beta");
    m.set(x.delta, "stats", "delta");
    m.set(x.tau, "stats", "tau");
    m.set(x.ell, "stats", "ell");
    m.set(x.width, "stats", "width");
    m.set(x.mode, "stats", "mode");
    m.set(x.normalization, "stats", "normalization");
    m.set(x.epsilon, "stats", "epsilon");

    auto config = anderson::parse_config(doc);
    config.flag_overrides = m.overrides;
    const auto manifest = anderson::run_experiment(config);

    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << manifest.outputs.size() + 1 << " files to " << config.out.string() << "\n";
    for (const auto& g : manifest.gate)
        std::cout << (g.passed ? "PASS " : "FAIL ") << g.statistic << " = " << g.value << " (bound " << g.bound
                  << ")\n";
    return manifest.gated() && !manifest.passed() ? 2 : 0;
}

// Eigenvalues of one realization, timed through both counting paths.
int run_spectrum(const CommonFlags& f) {
    anderson::ModelParams model;
    model.dim = f.dim.value_or(1);
    model.half_side = f.half_side.value_or(50);
    if (f.disorder) model.disorder = json::parse(*f.disorder).get<anderson::DisorderSpec>();
    if (f.boundary) model.boundary = anderson::boundary_from_string(*f.boundary);
    const auto seed = anderson::derive_seed(f.seed.value_or(0), 0);
    const auto h = model.hamiltonian(seed);

    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    const auto full = anderson::eigen_full(h, false);
    auto t1 = clock::now();
    const std::size_t sliced = anderson::SpectrumSlicer(h).count_below(0.0).below;
    auto t2 = clock::now();
    std::size_t dense_count = 0;
    for (double v : full.values) dense_count += v < 0.0;

    anderson::CsvWriter csv({"index", "eigenvalue"});
    for (std::size_t j = 0; j < full.values.size(); ++j) csv.cell(j).cell(full.values[j]).end_row();
    const std::string path = f.out.value_or("spectrum.csv");
    anderson::write_file_atomic(path, csv.text());

    std::cout << "N = " << full.values.size() << ", count below 0: full " << dense_count << ", slicing " << sliced
              << "\n"
              << "full diagonalization " << std::chrono::duration<double>(t1 - t0).count() << " s, inertia count "
              << std::chrono::duration<double>(t2 - t1).count() << " s\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anderson model spectral statistics"};
    app.require_subcommand(1);

    CommonFlags common;
    ExtraFlags extra;
    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> help{
        {"dos", "calibrate the integrated density of states table"},
        {"levelstats", "local Poisson count statistics"},
        {"two-energy", "independence of counts at two energies"},
        {"concentration", "eigenvalue count concentration over box sizes"},
        {"spacings", "level spacing distribution"},
        {"centers", "localization centers of eigenvectors"},
        {"joint", "joint energy and center process"},
        {"dcs", "localization center spacing distribution"}};
    for (const auto& kind : anderson::experiment_kind_names()) {
        auto* sub = app.add_subcommand(kind, help.at(kind));
        add_common(sub, common);
        subs[kind] = sub;
    }
    subs["dos"]->add_option("--grid-points", extra.grid_points, "energy grid size");
    subs["dos"]->add_option("--bandwidth-steps", extra.bandwidth_steps, "grid steps for the density difference");
    for (const char* k : {"levelstats", "two-energy", "spacings", "joint", "dcs"})
        subs[k]->add_option("--e0", extra.e0, "reference energy");
    subs["two-energy"]->add_option("--e0-prime", extra.e0_prime, "second reference energy");
    subs["levelstats"]->add_option("--beta", extra.beta, "window exponent");
    subs["levelstats"]->add_option("--delta", extra.delta, "separation exponent");
    subs["concentration"]->add_option("--half-sides", extra.half_sides, "list of box half sides");
    subs["concentration"]->add_option("--epsilon", extra.epsilon, "relative deviation(s)");
    subs["spacings"]->add_option("--mode", extra.mode, "local|macro")->check(CLI::IsMember({"local", "macro"}));
    subs["spacings"]->add_option("--normalization", extra.normalization, "local|remark")
        ->check(CLI::IsMember({"local", "remark"}));
    subs["centers"]->add_option("--tau", extra.tau, "near-maximal threshold for the diameter");
    subs["joint"]->add_option("--ell", extra.ell, "covariant scale");
    subs["dcs"]->add_option("--width", extra.width, "energy window width");

    CommonFlags spec_flags;
    auto* spectrum = app.add_subcommand("spectrum", "dump one realization's spectrum and time both solvers");
    spectrum->add_option("--dim", spec_flags.dim, "lattice dimension");
    spectrum->add_option("--half-side", spec_flags.half_side, "box half side");
    spectrum->add_option("--disorder", spec_flags.disorder, "single-site distribution as JSON");
    spectrum->add_option("--boundary", spec_flags.boundary, "periodic|simple");
    spectrum->add_option("--seed", spec_flags.seed, "master seed");
    spectrum->add_option("--out", spec_flags.out, "CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (spectrum->parsed()) return run_spectrum(spec_flags);
        for (const auto& [kind, sub] : subs)
            if (sub->parsed()) return run_subcommand(kind, common, extra);
    } catch (const anderson::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
