#include "anderson/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "anderson/io.hpp"

#ifndef ANDERSON_VERSION
#define ANDERSON_VERSION "unknown"
#endif

namespace anderson {

using nlohmann::json;

std::string code_version() { return ANDERSON_VERSION; }

const std::vector<std::string>& experiment_kind_names() {
    static const std::vector<std::string> names{"dos",      "levelstats", "two-energy", "concentration",
                                                "spacings", "centers",    "joint",      "dcs"};
    return names;
}

std::string to_string(ExperimentKind k) { return experiment_kind_names()[std::size_t(k)]; }

ExperimentKind experiment_kind_from_string(const std::string& s) {
    const auto& names = experiment_kind_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == s) return ExperimentKind(i);
    throw std::invalid_argument("unknown experiment kind: " + s);
}

static std::string join_problems(const std::vector<std::string>& problems) {
    std::string s = "invalid configuration";
    for (const auto& p : problems) s += "\n  " + p;
    return s;
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument(join_problems(problems)), problems_(std::move(problems)) {}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Reader {
    std::vector<std::string> problems;

    void fail(const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); }

    template <class F>
    void guard(const std::string& path, F&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            fail(path, e.what());
        }
    }

    // Unknown keys are reported; typos otherwise fall back to defaults silently.
    void known_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
        if (!obj.is_object()) return;
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& item : obj.items())
            if (!allowed.count(item.key())) fail(path + item.key(), "unknown field");
    }

    json block(const json& doc, const char* key) {
        if (!doc.contains(key)) return json::object();
        const json& b = doc.at(key);
        if (!b.is_object()) {
            fail(key, "expected an object");
            return json::object();
        }
        return b;
    }

    template <class T>
    void get(const json& obj, const char* key, const std::string& prefix, T& target) {
        if (!obj.contains(key)) return;
        guard(prefix + key, [&] { target = obj.at(key).get<T>(); });
    }

    Interval interval(const json& j) {
        if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [lo, hi]");
        Interval i{j[0].get<double>(), j[1].get<double>()};
        if (!(std::isfinite(i.lo) && std::isfinite(i.hi) && i.lo < i.hi))
            throw std::invalid_argument("interval needs finite lo < hi");
        return i;
    }

    void get_interval(const json& obj, const char* key, const std::string& prefix, Interval& target) {
        if (!obj.contains(key)) return;
        guard(prefix + key, [&] { target = interval(obj.at(key)); });
    }

    std::vector<Interval> intervals(const json& j, std::size_t expected, const std::string& path) {
        if (!j.is_array()) throw std::invalid_argument("expected an array of intervals");
        std::vector<Interval> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            try {
                out.push_back(interval(j[i]));
            } catch (const std::exception& e) {
                throw std::invalid_argument("[" + std::to_string(i) + "] " + e.what());
            }
        }
        if (expected != 0 && out.size() != expected)
            throw std::invalid_argument(path + " needs one side per dimension");
        return out;
    }
};

std::vector<ProductBox> default_boxes(int dim) {
    // Two boxes of measure 1 splitting the unit cube along the first axis.
    std::vector<ProductBox> boxes(2);
    for (int b = 0; b < 2; ++b) {
        boxes[b].energy = {-1.0, 1.0};
        boxes[b].cube.assign(std::size_t(dim), Interval{-0.5, 0.5});
    }
    boxes[0].cube[0] = {-0.5, 0.0};
    boxes[1].cube[0] = {0.0, 0.5};
    return boxes;
}

void parse_stats(Reader& rd, const json& st, ExperimentConfig& c) {
    const std::string p = "stats.";
    const int dim = c.model.dim;
    switch (c.kind) {
    case ExperimentKind::dos:
        rd.known_keys(st, p, {});
        break;
    case ExperimentKind::levelstats: {
        rd.known_keys(st, p, {"e0", "intervals", "beta", "delta", "bandwidth", "calibration_repetitions"});
        auto& s = c.levelstats;
        rd.get(st, "e0", p, s.e0);
        rd.get(st, "bandwidth", p, s.bandwidth);
        rd.get(st, "calibration_repetitions", p, s.calibration_repetitions);
        if (st.contains("intervals"))
            rd.guard(p + "intervals", [&] {
                s.intervals = rd.intervals(st.at("intervals"), 0, "intervals");
                if (s.intervals.empty()) throw std::invalid_argument("at least one interval required");
                check_disjoint(s.intervals);
            });
        s.check_scale = st.contains("beta") || st.contains("delta");
        rd.get(st, "beta", p, s.scale.beta);
        rd.get(st, "delta", p, s.scale.delta);
        if (s.check_scale) {
            if (st.contains("beta"))
                rd.guard(p + "beta", [&] {
                    ScaleSpec only_beta = s.scale;
                    only_beta.delta = 1.0;
                    only_beta.validate(dim);
                });
            if (!(s.scale.delta > 0.0)) rd.fail(p + "delta", "inadmissible exponent: delta must be positive");
        }
        break;
    }
    case ExperimentKind::two_energy: {
        rd.known_keys(st, p, {"e0", "e0_prime", "u_plus", "u_minus", "bandwidth", "calibration_repetitions"});
        auto& s = c.two_energy;
        rd.get(st, "e0", p, s.e0);
        rd.get(st, "e0_prime", p, s.e0_prime);
        rd.get_interval(st, "u_plus", p, s.u_plus);
        rd.get_interval(st, "u_minus", p, s.u_minus);
        rd.get(st, "bandwidth", p, s.bandwidth);
        rd.get(st, "calibration_repetitions", p, s.calibration_repetitions);
        if (s.e0 == s.e0_prime) rd.fail(p + "e0_prime", "must differ from e0");
        break;
    }
    case ExperimentKind::concentration: {
        rd.known_keys(st, p, {"window", "epsilon", "ldp_delta"});
        auto& s = c.concentration;
        rd.get_interval(st, "window", p, s.window);
        if (st.contains("epsilon"))
            rd.guard(p + "epsilon", [&] {
                const json& e = st.at("epsilon");
                s.epsilons = e.is_array() ? e.get<std::vector<double>>() : std::vector<double>{e.get<double>()};
                if (s.epsilons.empty()) throw std::invalid_argument("at least one value required");
                for (double x : s.epsilons)
                    if (!(x > 0.0)) throw std::invalid_argument("must be positive");
            });
        rd.get(st, "ldp_delta", p, s.ldp_delta);
        if (!(s.ldp_delta > 0.0)) rd.fail(p + "ldp_delta", "must be positive");
        break;
    }
    case ExperimentKind::spacings: {
        rd.known_keys(st, p, {"mode", "normalization", "e0", "width_exponent", "width", "j", "bandwidth"});
        auto& s = c.spacings;
        if (st.contains("mode"))
            rd.guard(p + "mode", [&] { s.mode = spacing_mode_from_string(st.at("mode").get<std::string>()); });
        if (st.contains("normalization"))
            rd.guard(p + "normalization", [&] {
                s.normalization = normalization_from_string(st.at("normalization").get<std::string>());
            });
        rd.get(st, "e0", p, s.e0);
        rd.get(st, "width_exponent", p, s.width_exponent);
        rd.get(st, "width", p, s.width);
        rd.get_interval(st, "j", p, s.j);
        rd.get(st, "bandwidth", p, s.bandwidth);
        if (s.mode == SpacingMode::macro && s.normalization == Normalization::remark)
            rd.fail(p + "normalization", "the alternative normalization applies to local mode only");
        if (!(s.width_exponent > 0.0)) rd.fail(p + "width_exponent", "must be positive");
        break;
    }
    case ExperimentKind::centers: {
        rd.known_keys(st, p, {"window", "tau"});
        auto& s = c.centers;
        rd.get_interval(st, "window", p, s.window);
        rd.get(st, "tau", p, s.tau);
        if (!(s.tau >= 0.0 && s.tau < 1.0)) rd.fail(p + "tau", "must lie in [0, 1)");
        break;
    }
    case ExperimentKind::joint: {
        rd.known_keys(st, p, {"e0", "ell", "boxes", "noncovariant", "bandwidth", "calibration_repetitions"});
        auto& s = c.joint;
        rd.get(st, "e0", p, s.e0);
        rd.get(st, "ell", p, s.ell);
        rd.get(st, "bandwidth", p, s.bandwidth);
        rd.get(st, "calibration_repetitions", p, s.calibration_repetitions);
        s.boxes = default_boxes(std::max(dim, 1));
        if (st.contains("boxes"))
            rd.guard(p + "boxes", [&] {
                const json& arr = st.at("boxes");
                if (!arr.is_array() || arr.empty()) throw std::invalid_argument("expected a nonempty array");
                std::vector<ProductBox> boxes;
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    const std::string bp = "[" + std::to_string(i) + "].";
                    ProductBox b;
                    try {
                        b.energy = rd.interval(arr[i].at("energy"));
                    } catch (const std::exception& e) {
                        throw std::invalid_argument(bp + "energy: " + e.what());
                    }
                    try {
                        b.cube = rd.intervals(arr[i].at("cube"), std::size_t(dim), "cube");
                    } catch (const std::exception& e) {
                        throw std::invalid_argument(bp + "cube: " + e.what());
                    }
                    boxes.push_back(std::move(b));
                }
                check_boxes_disjoint(boxes);
                s.boxes = std::move(boxes);
            });
        if (st.contains("noncovariant"))
            rd.guard(p + "noncovariant", [&] {
                const json& arr = st.at("noncovariant");
                if (!arr.is_array()) throw std::invalid_argument("expected an array");
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    const std::string np = "[" + std::to_string(i) + "].";
                    const json& r = arr[i];
                    NoncovariantScales sc;
                    for (auto [key, target] : {std::pair{"ell", &sc.ell}, std::pair{"ell_prime", &sc.ell_prime},
                                               std::pair{"ell_tilde", &sc.ell_tilde}}) {
                        if (!r.contains(key)) throw std::invalid_argument(np + key + ": required");
                        *target = r.at(key).get<double>();
                        if (!(*target > 0.0)) throw std::invalid_argument(np + key + ": must be positive");
                    }
                    if (r.contains("j")) sc.j = rd.interval(r.at("j"));
                    if (!r.contains("c")) throw std::invalid_argument(np + "c: required");
                    sc.c = rd.intervals(r.at("c"), std::size_t(dim), "c");
                    s.noncovariant.push_back(std::move(sc));
                }
            });
        break;
    }
    case ExperimentKind::dcs: {
        rd.known_keys(st, p, {"e0", "width", "oracle_factor", "bandwidth"});
        auto& s = c.dcs;
        rd.get(st, "e0", p, s.e0);
        rd.get(st, "width", p, s.width);
        rd.get(st, "oracle_factor", p, s.oracle_factor);
        rd.get(st, "bandwidth", p, s.bandwidth);
        if (s.oracle_factor == 0) rd.fail(p + "oracle_factor", "must be positive");
        break;
    }
    }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    Reader rd;
    ExperimentConfig c;
    if (!doc.is_object()) throw ConfigError({"(root): expected a JSON object"});
    c.source = doc;
    rd.known_keys(doc, "", {"kind", "model", "stats", "run", "dos_table", "gate"});

    bool have_kind = false;
    if (!doc.contains("kind")) {
        rd.fail("kind", "required");
    } else {
        rd.guard("kind", [&] {
            c.kind = experiment_kind_from_string(doc.at("kind").get<std::string>());
            have_kind = true;
        });
    }

    const json model = rd.block(doc, "model");
    rd.known_keys(model, "model.", {"dim", "half_side", "half_sides", "disorder", "boundary"});
    rd.get(model, "dim", "model.", c.model.dim);
    rd.get(model, "half_side", "model.", c.model.half_side);
    if (model.contains("disorder"))
        rd.guard("model.disorder", [&] { c.model.disorder = model.at("disorder").get<DisorderSpec>(); });
    if (model.contains("boundary"))
        rd.guard("model.boundary",
                 [&] { c.model.boundary = boundary_from_string(model.at("boundary").get<std::string>()); });
    if (!(c.model.dim >= 1 && c.model.dim <= 3)) rd.fail("model.dim", "must be 1, 2 or 3");
    rd.guard("model.half_side", [&] { (void)build_box(std::clamp(c.model.dim, 1, 3), c.model.half_side); });
    if (model.contains("half_sides")) {
        rd.guard("model.half_sides", [&] {
            auto ls = model.at("half_sides").get<std::vector<int>>();
            if (ls.empty()) throw std::invalid_argument("at least one half side required");
            for (int l : ls) (void)build_box(std::clamp(c.model.dim, 1, 3), l);
            std::sort(ls.begin(), ls.end());
            ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
            c.concentration.half_sides = ls;
        });
    } else if (c.kind == ExperimentKind::concentration && model.contains("half_side")) {
        c.concentration.half_sides = {c.model.half_side};
    }
    if (c.kind == ExperimentKind::concentration) c.model.half_side = c.concentration.half_sides.back();

    const json run = rd.block(doc, "run");
    rd.known_keys(run, "run.", {"realizations", "seed", "workers", "out"});
    rd.get(run, "realizations", "run.", c.run.realizations);
    rd.get(run, "seed", "run.", c.run.master_seed);
    rd.get(run, "workers", "run.", c.run.workers);
    if (run.contains("out")) rd.guard("run.out", [&] { c.out = run.at("out").get<std::string>(); });
    if (c.run.realizations == 0) rd.fail("run.realizations", "must be positive");
    if (c.run.workers == 0) rd.fail("run.workers", "must be positive");

    const json table = rd.block(doc, "dos_table");
    rd.known_keys(table, "dos_table.", {"path", "hash", "realizations", "grid_points", "bandwidth_steps"});
    if (table.contains("path")) rd.guard("dos_table.path", [&] { c.dos.path = table.at("path").get<std::string>(); });
    rd.get(table, "hash", "dos_table.", c.dos.hash);
    rd.get(table, "realizations", "dos_table.", c.dos.realizations);
    rd.get(table, "grid_points", "dos_table.", c.dos.grid_points);
    rd.get(table, "bandwidth_steps", "dos_table.", c.dos.bandwidth_steps);
    if (c.dos.realizations == 0) rd.fail("dos_table.realizations", "must be positive");
    if (c.dos.grid_points < 3) rd.fail("dos_table.grid_points", "needs at least 3 points");
    if (c.dos.bandwidth_steps == 0) rd.fail("dos_table.bandwidth_steps", "must be positive");
    if (!c.dos.hash.empty() &&
        (c.dos.hash.size() != 64 || c.dos.hash.find_first_not_of("0123456789abcdef") != std::string::npos))
        rd.fail("dos_table.hash", "expected 64 lowercase hex digits");
    if (!c.dos.hash.empty() && c.dos.path.empty()) rd.fail("dos_table.hash", "given without a path");

    const json stats = rd.block(doc, "stats");
    if (have_kind) parse_stats(rd, stats, c);

    if (have_kind && doc.contains("gate")) {
        const json& g = doc.at("gate");
        if (!g.is_object()) {
            rd.fail("gate", "expected an object of statistic bounds");
        } else {
            const auto names = gate_statistics(c);
            for (const auto& item : g.items()) {
                const std::string path = "gate." + item.key();
                if (std::find(names.begin(), names.end(), item.key()) == names.end()) {
                    rd.fail(path, "not a statistic of this experiment");
                    continue;
                }
                if (!item.value().is_number()) {
                    rd.fail(path, "expected a number");
                    continue;
                }
                c.gate[item.key()] = item.value().get<double>();
            }
        }
    }

    if (!rd.problems.empty()) throw ConfigError(rd.problems);
    return c;
}

std::vector<std::string> gate_statistics(const ExperimentConfig& c) {
    switch (c.kind) {
    case ExperimentKind::dos:
        return {"density_integral_error", "ids_midpoint_error"};
    case ExperimentKind::levelstats:
        return {"tv"};
    case ExperimentKind::two_energy:
        return {"tv_independence", "tv_poisson"};
    case ExperimentKind::concentration:
        return {"tail_at_largest", "monotonicity_violations"};
    case ExperimentKind::spacings:
        return {"sup_distance"};
    case ExperimentKind::centers:
        return {"median_diameter"};
    case ExperimentKind::joint: {
        std::vector<std::string> names{"tv"};
        for (std::size_t i = 0; i < c.joint.noncovariant.size(); ++i) {
            names.push_back("regime_" + std::to_string(i + 1) + "_nonzero_fraction");
            names.push_back("regime_" + std::to_string(i + 1) + "_relative_error");
        }
        return names;
    }
    case ExperimentKind::dcs:
        return {"sup_oracle", "sup_limit"};
    }
    return {};
}

// ---------------------------------------------------------------------------
// Running

bool RunManifest::passed() const {
    return std::all_of(gate.begin(), gate.end(), [](const GateResult& g) { return g.passed; });
}

json RunManifest::to_json() const {
    json j;
    j["config"] = config;
    j["config_hash"] = config_hash;
    j["code_version"] = code_version;
    j["precedence"] = "flags > config > defaults";
    j["flag_overrides"] = flag_overrides;
    j["seeds"] = seeds;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["warnings"] = warnings;
    json files = json::array();
    for (const auto& f : outputs) files.push_back({{"file", f.name}, {"sha256", f.sha256}});
    j["outputs"] = files;
    if (gated()) {
        json g = json::array();
        for (const auto& r : gate)
            g.push_back({{"statistic", r.statistic}, {"value", r.value}, {"bound", r.bound}, {"passed", r.passed}});
        j["gate"] = {{"results", g}, {"passed", passed()}};
    }
    return j;
}

namespace {

class Outputs {
public:
    explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(dir_ / name, content);
        files_.push_back({name, sha256_hex(content)});
    }

    void add_existing(const std::string& name) { files_.push_back({name, sha256_hex(read_file(dir_ / name))}); }

    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    const std::vector<OutputFile>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<OutputFile> files_;
};

// What an experiment publishes for gating.
struct Published {
    std::map<std::string, double> values;
    std::map<std::string, double> calibrated;  // threshold from genuine-law simulations
};

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json density_json(const DensityEstimate& d) {
    return {{"value", d.value},
            {"bandwidth", d.bandwidth},
            {"doubled", d.doubled},
            {"relative_change", d.relative_change},
            {"stable", d.stable}};
}

json calibration_json(const Calibration& c) {
    return {{"threshold", c.threshold}, {"percentile99", c.percentile99}, {"repetitions", c.repetitions}};
}

json records_json(const std::vector<RealizationRecord>& records) {
    json arr = json::array();
    for (const auto& r : records) arr.push_back(r);
    return arr;
}

json count_test_json(const CountTestReport& t) {
    return {{"means", t.means},          {"kmax", t.kmax}, {"empirical", t.empirical},
            {"reference", t.reference},  {"tv", t.tv},     {"marginal_tv", t.marginal_tv},
            {"samples", t.samples},      {"calibration", calibration_json(t.calibration)}};
}

std::string counts_csv(const std::vector<CountSample>& samples, const std::vector<std::string>& names) {
    std::vector<std::string> header{"realization", "seed"};
    header.insert(header.end(), names.begin(), names.end());
    CsvWriter csv(header);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        csv.cell(r).cell(static_cast<unsigned long long>(samples[r].seed));
        for (auto k : samples[r].counts) csv.cell(k);
        csv.end_row();
    }
    return csv.text();
}

std::vector<std::string> numbered(const std::string& stem, std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(stem + std::to_string(i + 1));
    return v;
}

bool model_matches(const DosMetadata& m, const ModelParams& model, bool any_size) {
    return m.disorder == model.disorder && m.dim == model.dim && m.boundary == model.boundary &&
           (any_size || m.half_side == model.half_side);
}

DosTable acquire_table(const ExperimentConfig& c, Outputs& out, json& seeds) {
    const bool any_size = c.kind == ExperimentKind::concentration;
    if (!c.dos.path.empty()) {
        DosTable t = load_dos_table(c.dos.path);
        if (!c.dos.hash.empty() && t.hash != c.dos.hash)
            throw std::runtime_error("dos table hash mismatch: expected " + c.dos.hash + ", found " + t.hash);
        if (!model_matches(t.meta, c.model, any_size))
            throw std::invalid_argument("dos table was calibrated for a different model");
        seeds["dos_table"] = {{"path", c.dos.path.string()}, {"hash", t.hash}};
        return t;
    }
    const RunOptions run{c.dos.realizations, stream_seed(c.run.master_seed, stream::dos), c.run.workers};
    DosTable t = estimate_dos(c.model, default_grid(c.model.disorder, c.model.dim, c.dos.grid_points), run,
                              c.dos.bandwidth_steps);
    save_dos_table(t, out.path("dos_table.csv"));
    out.add_existing("dos_table.csv");
    seeds["dos_table"] = {{"master", run.master_seed}, {"realizations", run.realizations},
                          {"replaced", records_json(t.meta.replaced)}};
    return t;
}

// Every realization seed, with replacements applied.
json expanded_seeds(std::uint64_t master, std::size_t count, const std::vector<RealizationRecord>& replaced) {
    std::vector<RealizationRecord> all(count);
    for (std::size_t r = 0; r < count; ++r) all[r] = {r, derive_seed(master, r), {}};
    for (const auto& rec : replaced)
        if (rec.index < count) all[rec.index] = rec;
    return records_json(all);
}

std::vector<double> curve_grid(double xmax, std::size_t points) {
    std::vector<double> x(points);
    for (std::size_t k = 0; k < points; ++k) x[k] = xmax * double(k) / double(points - 1);
    return x;
}

template <class Vec>
void append(std::vector<std::string>& to, const Vec& from) {
    to.insert(to.end(), from.begin(), from.end());
}

Published run_dos(const ExperimentConfig& c, Outputs& out, json& report, json& seeds) {
    const DosTable t = estimate_dos(c.model, default_grid(c.model.disorder, c.model.dim, c.dos.grid_points),
                                    c.run, c.dos.bandwidth_steps);
    save_dos_table(t, out.path("dos_table.csv"));
    out.add_existing("dos_table.csv");
    seeds["realizations"] = expanded_seeds(c.run.master_seed, c.run.realizations, t.meta.replaced);

    const auto range = t.range();
    const double mid = 0.5 * (range.lo + range.hi);
    const double integral = density_integral(t);
    report["hash"] = t.hash;
    report["metadata"] = dos_metadata_json(t.meta);
    report["density_integral"] = integral;
    report["midpoint"] = mid;
    report["ids_at_midpoint"] = t.ids_at(mid);

    Published pub;
    pub.values["density_integral_error"] = std::abs(integral - 1.0);
    pub.values["ids_midpoint_error"] = std::abs(t.ids_at(mid) - 0.5);
    return pub;
}

Published run_levelstats(const ExperimentConfig& c, Outputs& out, json& report, json& seeds,
                         std::vector<std::string>& warnings) {
    const DosTable t = acquire_table(c, out, seeds);
    const auto rep = levelstats_experiment(c.model, t, c.levelstats, c.run);
    append(warnings, rep.warnings);
    seeds["realizations"] = records_json(rep.records);
    seeds["calibration"] = stream_seed(c.run.master_seed, stream::calibration);

    json intervals = json::array();
    for (const auto& i : c.levelstats.intervals) intervals.push_back(interval_json(i));
    report["e0"] = c.levelstats.e0;
    report["nu"] = density_json(rep.nu);
    report["volume"] = rep.volume;
    report["intervals"] = intervals;
    report["test"] = count_test_json(rep.test);
    out.write("counts.csv", counts_csv(rep.samples, numbered("k", c.levelstats.intervals.size())));

    Published pub;
    pub.values["tv"] = rep.test.tv;
    pub.calibrated["tv"] = rep.test.calibration.threshold;
    return pub;
}

Published run_two_energy(const ExperimentConfig& c, Outputs& out, json& report, json& seeds,
                         std::vector<std::string>& warnings) {
    const DosTable t = acquire_table(c, out, seeds);
    const auto rep = two_energy_experiment(c.model, t, c.two_energy, c.run);
    append(warnings, rep.warnings);
    seeds["realizations"] = records_json(rep.records);
    seeds["calibration"] = stream_seed(c.run.master_seed, stream::calibration);

    const auto& s = rep.test;
    report["e0"] = c.two_energy.e0;
    report["e0_prime"] = c.two_energy.e0_prime;
    report["u_plus"] = interval_json(c.two_energy.u_plus);
    report["u_minus"] = interval_json(c.two_energy.u_minus);
    report["nu"] = density_json(rep.nu);
    report["nu_prime"] = density_json(rep.nu_prime);
    report["volume"] = rep.volume;
    report["divergence"] = rep.divergence;
    report["test"] = {{"kmax", s.kmax},
                      {"joint", s.joint},
                      {"product_of_marginals", s.product_of_marginals},
                      {"product_poisson", s.product_poisson},
                      {"tv_independence", s.tv_independence},
                      {"tv_poisson", s.tv_poisson},
                      {"independence_calibration", calibration_json(s.independence_calibration)},
                      {"poisson_calibration", calibration_json(s.poisson_calibration)},
                      {"samples", s.samples}};
    out.write("counts.csv", counts_csv(rep.samples, {"k_plus", "k_minus"}));

    Published pub;
    pub.values["tv_independence"] = s.tv_independence;
    pub.calibrated["tv_independence"] = s.independence_calibration.threshold;
    pub.values["tv_poisson"] = s.tv_poisson;
    pub.calibrated["tv_poisson"] = s.poisson_calibration.threshold;
    return pub;
}

Published run_concentration(const ExperimentConfig& c, Outputs& out, json& report, json& seeds,
                            std::vector<std::string>& warnings) {
    const DosTable t = acquire_table(c, out, seeds);
    const auto& s = c.concentration;
    const auto rep = concentration_experiment(c.model, t, s, c.run);
    append(warnings, rep.warnings);
    json per_size = json::object();
    for (std::size_t i = 0; i < s.half_sides.size(); ++i) {
        per_size[std::to_string(s.half_sides[i])] = {
            {"master", stream_seed(c.run.master_seed, std::uint64_t(s.half_sides[i]))},
            {"realizations", records_json(rep.records[i])}};
    }
    seeds["realizations"] = per_size;

    CsvWriter tail({"L", "volume", "epsilon", "mass", "expected", "exceed", "trials", "probability", "ci_lo",
                    "ci_hi", "ldp_bound"});
    json rows = json::array();
    for (const auto& r : rep.rows) {
        tail.cell(r.half_side).cell(r.volume).cell(r.epsilon).cell(r.mass).cell(r.expected);
        tail.cell(r.exceed).cell(r.trials).cell(r.probability).cell(r.ci.lo).cell(r.ci.hi).cell(r.ldp_bound);
        tail.end_row();
        rows.push_back({{"L", r.half_side},         {"epsilon", r.epsilon},
                        {"probability", r.probability}, {"ci", {r.ci.lo, r.ci.hi}},
                        {"ldp_bound", r.ldp_bound}});
    }
    out.write("tail.csv", tail.text());

    CsvWriter counts({"L", "realization", "seed", "count"});
    for (std::size_t i = 0; i < s.half_sides.size(); ++i)
        for (std::size_t r = 0; r < rep.counts[i].size(); ++r) {
            counts.cell(s.half_sides[i]).cell(r);
            counts.cell(static_cast<unsigned long long>(rep.records[i][r].seed)).cell(rep.counts[i][r]);
            counts.end_row();
        }
    out.write("counts.csv", counts.text());

    report["window"] = interval_json(s.window);
    report["half_sides"] = s.half_sides;
    report["epsilons"] = s.epsilons;
    report["ldp_delta"] = s.ldp_delta;
    report["rows"] = rows;
    report["nonincreasing"] = rep.nonincreasing;
    report["admissible"] = rep.admissible;

    // Rows come grouped by epsilon, then L ascending.
    const std::size_t nl = s.half_sides.size();
    double largest = 0.0;
    std::size_t violations = 0;
    for (std::size_t e = 0; e < s.epsilons.size(); ++e) {
        for (std::size_t i = 1; i < nl; ++i)
            if (rep.rows[e * nl + i].probability > rep.rows[e * nl + i - 1].probability) ++violations;
        largest = std::max(largest, rep.rows[e * nl + nl - 1].probability);
    }
    Published pub;
    pub.values["tail_at_largest"] = largest;
    pub.values["monotonicity_violations"] = double(violations);
    return pub;
}

std::string survival_csv(const std::vector<double>& x, const std::vector<std::string>& names,
                         const std::vector<std::function<double(double)>>& curves) {
    std::vector<std::string> header{"x"};
    append(header, names);
    CsvWriter csv(header);
    for (double v : x) {
        csv.cell(v);
        for (const auto& f : curves) csv.cell(f(v));
        csv.end_row();
    }
    return csv.text();
}

Published run_spacings(const ExperimentConfig& c, Outputs& out, json& report, json& seeds,
                       std::vector<std::string>& warnings) {
    const DosTable t = acquire_table(c, out, seeds);
    const auto& s = c.spacings;
    const auto rep = dls_experiment(c.model, t, s, c.run);
    append(warnings, rep.warnings);
    seeds["realizations"] = records_json(rep.records);

    CsvWriter sp({"realization", "spacing"});
    std::size_t at = 0;
    for (std::size_t r = 0; r < rep.per_realization.size(); ++r)
        for (std::size_t k = 0; k < rep.per_realization[r]; ++k) sp.cell(r).cell(rep.spacings[at++]).end_row();
    out.write("spacings.csv", sp.text());

    const EmpiricalDistribution emp(rep.spacings);
    const auto reference = dls_reference(t, s);
    const double xmax = std::min(10.0, emp.values().back());
    out.write("survival.csv",
              survival_csv(curve_grid(xmax, 401), {"empirical", "reference"},
                           {[&](double x) { return emp.survival(x); }, reference}));

    report["mode"] = to_string(s.mode);
    report["normalization"] = to_string(s.normalization);
    report["window"] = interval_json(rep.window);
    report["constant"] = rep.constant;
    if (s.mode == SpacingMode::local) report["nu"] = density_json(rep.nu);
    report["window_density"] = rep.window_density;
    report["mass"] = rep.mass;
    report["spacings"] = rep.spacings.size();
    report["skipped"] = rep.skipped;
    report["sup_distance"] = rep.sup_distance;

    Published pub;
    pub.values["sup_distance"] = rep.sup_distance;
    return pub;
}

Published run_centers(const ExperimentConfig& c, Outputs& out, json& report, json& seeds) {
    const auto rep = centers_experiment(c.model, c.centers, c.run);
    seeds["realizations"] = records_json(rep.records);

    std::vector<std::string> header{"realization", "j", "energy", "site"};
    for (int a = 0; a < c.model.dim; ++a) header.push_back("x" + std::to_string(a + 1));
    header.push_back("amplitude");
    header.push_back("diameter");
    CsvWriter csv(header);
    for (const auto& r : rep.centers) {
        csv.cell(r.realization).cell(r.index).cell(r.energy).cell(r.center.site);
        for (int x : r.center.coords) csv.cell(x);
        csv.cell(r.center.amplitude).cell(r.diameter);
        csv.end_row();
    }
    out.write("centers.csv", csv.text());

    report["window"] = interval_json(c.centers.window);
    report["tau"] = c.centers.tau;
    report["centers"] = rep.centers.size();
    report["median_diameter"] = rep.median_diameter;

    Published pub;
    pub.values["median_diameter"] = rep.median_diameter;
    return pub;
}

Published run_joint(const ExperimentConfig& c, Outputs& out, json& report, json& seeds,
                    std::vector<std::string>& warnings) {
    const DosTable t = acquire_table(c, out, seeds);
    const auto rep = joint_experiment(c.model, t, c.joint, c.run);
    append(warnings, rep.warnings);
    seeds["realizations"] = records_json(rep.records);
    seeds["calibration"] = stream_seed(c.run.master_seed, stream::calibration);

    out.write("counts.csv", counts_csv(rep.samples, numbered("box", c.joint.boxes.size())));

    json boxes = json::array();
    for (const auto& b : c.joint.boxes) {
        json cube = json::array();
        for (const auto& i : b.cube) cube.push_back(interval_json(i));
        boxes.push_back({{"energy", interval_json(b.energy)}, {"cube", cube}, {"measure", b.measure()}});
    }
    report["e0"] = c.joint.e0;
    report["nu"] = density_json(rep.nu);
    report["ell"] = rep.ell;
    report["side_ratio"] = rep.side_ratio;
    report["boxes"] = boxes;
    report["test"] = count_test_json(rep.test);

    Published pub;
    pub.values["tv"] = rep.test.tv;
    pub.calibrated["tv"] = rep.test.calibration.threshold;

    CsvWriter nc({"regime", "realization", "raw", "normalized"});
    json regimes = json::array();
    for (std::size_t i = 0; i < rep.noncovariant.size(); ++i) {
        const auto& n = rep.noncovariant[i];
        for (std::size_t r = 0; r < n.counts.size(); ++r)
            nc.cell(i + 1).cell(r).cell(n.counts[r].raw).cell(n.counts[r].normalized).end_row();
        json cside = json::array();
        for (const auto& side : n.scales.c) cside.push_back(interval_json(side));
        regimes.push_back({{"ell", n.scales.ell},
                           {"ell_prime", n.scales.ell_prime},
                           {"ell_tilde", n.scales.ell_tilde},
                           {"j", interval_json(n.scales.j)},
                           {"c", cside},
                           {"zero_fraction", n.zero_fraction},
                           {"mean_normalized", n.mean_normalized},
                           {"target", n.target},
                           {"regime_ratio", n.regime_ratio}});
        const std::string stem = "regime_" + std::to_string(i + 1);
        pub.values[stem + "_nonzero_fraction"] = 1.0 - n.zero_fraction;
        pub.values[stem + "_relative_error"] = std::abs(n.mean_normalized - n.target) / n.target;
    }
    if (!rep.noncovariant.empty()) out.write("noncovariant.csv", nc.text());
    report["noncovariant"] = regimes;
    return pub;
}

Published run_dcs(const ExperimentConfig& c, Outputs& out, json& report, json& seeds,
                  std::vector<std::string>& warnings) {
    const DosTable t = acquire_table(c, out, seeds);
    const auto rep = dcs_experiment(c.model, t, c.dcs, c.run);
    append(warnings, rep.warnings);
    seeds["realizations"] = records_json(rep.records);
    seeds["oracle"] = stream_seed(c.run.master_seed, stream::oracle);

    CsvWriter sp({"source", "spacing"});
    for (double s : rep.spacings) sp.cell("model").cell(s).end_row();
    for (double s : rep.oracle_spacings) sp.cell("oracle").cell(s).end_row();
    out.write("spacings.csv", sp.text());

    const EmpiricalDistribution emp(rep.spacings);
    const EmpiricalDistribution oracle(rep.oracle_spacings);
    const int d = c.model.dim;
    const double xmax = std::max(emp.values().back(), oracle.values().back());
    out.write("dcs_curve.csv",
              survival_csv(curve_grid(xmax, 401), {"empirical", "oracle", "limit"},
                           {[&](double x) { return emp.survival(x); }, [&](double x) { return oracle.survival(x); },
                            [d](double x) { return std::exp(-std::pow(x, d)); }}));

    report["e0"] = c.dcs.e0;
    report["nu"] = density_json(rep.nu);
    report["window"] = interval_json(rep.window);
    report["intensity"] = rep.intensity;
    report["spacings"] = rep.spacings.size();
    report["skipped"] = rep.skipped;
    report["oracle_spacings"] = rep.oracle_spacings.size();
    report["oracle_realizations"] = rep.oracle_realizations;
    report["sup_oracle"] = rep.sup_oracle;
    report["sup_limit"] = rep.sup_limit;

    Published pub;
    pub.values["sup_oracle"] = rep.sup_oracle;
    pub.values["sup_limit"] = rep.sup_limit;
    return pub;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& c) {
    const auto start = std::chrono::steady_clock::now();
    RunManifest m;
    m.config = c.source;
    m.config_hash = sha256_hex(c.source.dump());
    m.code_version = code_version();
    m.flag_overrides = c.flag_overrides;
    m.seeds = {{"master", c.run.master_seed}, {"derivation", "derive_seed(master, index)"}};

    Outputs out(c.out);
    json report;
    report["kind"] = to_string(c.kind);
    report["model"] = c.model;
    report["realizations"] = c.run.realizations;

    Published pub;
    switch (c.kind) {
    case ExperimentKind::dos: pub = run_dos(c, out, report, m.seeds); break;
    case ExperimentKind::levelstats: pub = run_levelstats(c, out, report, m.seeds, m.warnings); break;
    case ExperimentKind::two_energy: pub = run_two_energy(c, out, report, m.seeds, m.warnings); break;
    case ExperimentKind::concentration: pub = run_concentration(c, out, report, m.seeds, m.warnings); break;
    case ExperimentKind::spacings: pub = run_spacings(c, out, report, m.seeds, m.warnings); break;
    case ExperimentKind::centers: pub = run_centers(c, out, report, m.seeds); break;
    case ExperimentKind::joint: pub = run_joint(c, out, report, m.seeds, m.warnings); break;
    case ExperimentKind::dcs: pub = run_dcs(c, out, report, m.seeds, m.warnings); break;
    }

    json stats = json::object();
    for (const auto& [name, value] : pub.values) stats[name] = value;
    report["statistics"] = stats;
    report["warnings"] = m.warnings;
    for (const auto& [name, bound] : c.gate) {
        GateResult g;
        g.statistic = name;
        g.value = pub.values.at(name);
        g.bound = bound;
        if (auto it = pub.calibrated.find(name); it != pub.calibrated.end()) g.bound = std::max(bound, it->second);
        g.passed = g.value <= g.bound;
        m.gate.push_back(g);
    }
    out.write("report.json", report.dump(2) + "\n");

    m.outputs = out.files();
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file_atomic(out.path("manifest.json"), m.to_json().dump(2) + "\n");
    return m;
}

}  // namespace anderson
