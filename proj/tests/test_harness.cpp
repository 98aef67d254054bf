#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "anderson/harness.hpp"
#include "anderson/io.hpp"

using namespace anderson;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reference splitmix64 generator: state advances by the golden gamma, then the
// output is mixed.
struct SplitMix64 {
    std::uint64_t x;
    std::uint64_t next() {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "anderson_harness_test" / name;
    fs::remove_all(dir);
    return dir;
}

const json kUniform5 = {{"kind", "uniform"}, {"a", -0.5}, {"b", 0.5}, {"coupling", 5.0}};

json small_config(const std::string& kind, const fs::path& out, unsigned workers) {
    json c = {{"kind", kind},
              {"model", {{"dim", 1}, {"half_side", 60}, {"disorder", kUniform5}}},
              {"run", {{"realizations", 120}, {"seed", 2024}, {"workers", workers}, {"out", out.string()}}},
              {"dos_table", {{"realizations", 20}, {"grid_points", 401}}}};
    if (kind == "levelstats" || kind == "two-energy" || kind == "joint") c["stats"]["calibration_repetitions"] = 20;
    if (kind == "concentration") c["model"]["half_sides"] = {20, 40, 60};
    if (kind == "centers") c["run"]["realizations"] = 8;
    if (kind == "dcs") {
        c["model"]["disorder"]["coupling"] = 12.0;
        c["run"]["realizations"] = 30;
        c["stats"] = {{"width", 0.1}, {"oracle_factor", 3}};
    }
    if (kind == "joint") {
        c["run"]["realizations"] = 100;
        c["stats"]["noncovariant"] = {{{"ell", 121}, {"ell_prime", 121}, {"ell_tilde", 30}, {"c", {{-0.1, 0.1}}}}};
    }
    if (kind == "spacings") c["stats"] = {{"mode", "macro"}};
    return c;
}

std::map<std::string, std::string> checksums(const RunManifest& m) {
    std::map<std::string, std::string> out;
    for (const auto& f : m.outputs) out[f.name] = f.sha256;
    return out;
}

std::string run_cli(const std::string& args, int& status) {
    const char* cli = std::getenv("ANDERSON_CLI");
    REQUIRE(cli != nullptr);
    const std::string cmd = std::string(cli) + " " + args + " 2>&1";
    std::string output;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[512];
    while (fgets(buf, sizeof buf, pipe)) output += buf;
    const int raw = pclose(pipe);
    status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return output;
}

}  // namespace

TEST_CASE("seed derivation is bit-exact splitmix64") {
    // first output of splitmix64 seeded with 0
    CHECK(derive_seed(0, 0) == 0xE220A8397B1DCDAFULL);
    for (std::uint64_t master : {0ULL, 1ULL, 0xDEADBEEFULL, ~0ULL}) {
        SplitMix64 g{master};
        for (std::uint64_t i = 0; i < 1000; ++i) CHECK(derive_seed(master, i) == g.next());
    }
    CHECK(derive_seed(42, 7) == derive_seed(42, 7));
}

TEST_CASE("no seed collisions over a million indices") {
    std::vector<std::uint64_t> seeds(1000001);
    for (std::uint64_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(123456789, i);
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("distinct masters give distinct seeds") {
    std::mt19937_64 rng(1);
    int same = 0;
    for (int k = 0; k < 10000; ++k) {
        const std::uint64_t a = rng(), b = rng(), idx = rng() % 100000;
        if (a != b && derive_seed(a, idx) == derive_seed(b, idx)) ++same;
    }
    CHECK(same == 0);
    std::set<std::uint64_t> tags{stream::dos, stream::calibration, stream::oracle, stream::second_calibration};
    std::set<std::uint64_t> streams;
    for (auto t : tags) streams.insert(stream_seed(5, t));
    CHECK(streams.size() == tags.size());
}

TEST_CASE("realization retries follow the derived replacement seeds") {
    RunOptions run{5, 77, 2};
    const std::uint64_t base = derive_seed(77, 3);
    auto res = map_realizations(run, [&](std::size_t i, std::uint64_t seed) {
        if (i == 3 && seed != derive_seed(base, 2)) throw std::runtime_error("solver stalled");
        return seed;
    });
    CHECK(res.records[3].failed_seeds == std::vector<std::uint64_t>{base, derive_seed(base, 1)});
    CHECK(res.results[3] == derive_seed(base, 2));
    CHECK(res.records[0].failed_seeds.empty());

    CHECK_THROWS_AS(map_realizations(run,
                                     [](std::size_t i, std::uint64_t) -> int {
                                         if (i == 1) throw std::runtime_error("always");
                                         return 0;
                                     }),
                    WorkerFailure);
}

TEST_CASE("pool rethrows the lowest failing index") {
    try {
        run_indexed(50, 4, [](std::size_t i) {
            if (i == 31 || i == 12) throw std::invalid_argument("task " + std::to_string(i));
        });
        FAIL("expected a throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()) == "task 12");
    }
}

TEST_CASE("beta outside its bound is a validation error naming the bound") {
    json c = {{"kind", "levelstats"}, {"stats", {{"beta", 0.3}}}};
    try {
        parse_config(c);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(e.problems().size() == 1);
        CHECK(e.problems()[0].find("stats.beta") == 0);
        CHECK(e.problems()[0].find("(0.333333, 1)") != std::string::npos);
    }
    c["model"] = {{"dim", 2}};
    c["stats"]["beta"] = 0.45;
    CHECK_THROWS_WITH_AS(parse_config(c), doctest::Contains("(0.5, 1)"), ConfigError);
}

TEST_CASE("validation enumerates every bad field") {
    const json c = {{"kind", "spacings"},
                    {"model", {{"dim", 0}, {"boundary", "open"}}},
                    {"run", {{"realizations", 0}, {"workers", 0}, {"colour", 1}}},
                    {"stats", {{"mode", "wide"}}},
                    {"gate", {{"tv", 0.1}}}};
    try {
        parse_config(c);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        std::set<std::string> paths;
        for (const auto& p : e.problems()) paths.insert(p.substr(0, p.find(':')));
        for (const char* want : {"model.dim", "model.boundary", "run.realizations", "run.workers", "run.colour",
                                 "stats.mode", "gate.tv"})
            CHECK_MESSAGE(paths.count(want) == 1, want);
    }
    CHECK_THROWS_WITH_AS(parse_config(json{{"model", json::object()}}), doctest::Contains("kind: required"),
                         ConfigError);
}

TEST_CASE("defaults and overrides are parsed") {
    const auto c = parse_config(json{{"kind", "two-energy"}, {"stats", {{"e0_prime", 0.75}}}});
    CHECK(c.kind == ExperimentKind::two_energy);
    CHECK(c.two_energy.e0 == 0.0);
    CHECK(c.two_energy.e0_prime == 0.75);
    CHECK(c.run.workers == 1);
    CHECK(gate_statistics(c) == std::vector<std::string>{"tv_independence", "tv_poisson"});
    for (const auto& name : experiment_kind_names()) CHECK(to_string(experiment_kind_from_string(name)) == name);
}

TEST_CASE("dos run writes table and manifest, rerun reproduces checksums") {
    const auto out = scratch("dos");
    json doc = {{"kind", "dos"},
                {"model", {{"half_side", 1000}, {"disorder", {{"kind", "constant"}, {"value", 0.0}}}}},
                {"run", {{"realizations", 1}, {"out", out.string()}}},
                {"gate", {{"ids_midpoint_error", 1e-3}}}};
    const auto m1 = run_experiment(parse_config(doc));
    CHECK(fs::exists(out / "dos_table.csv"));
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(m1.passed());
    const auto on_disk = json::parse(read_file(out / "manifest.json"));
    CHECK(on_disk["config_hash"] == sha256_hex(doc.dump()));
    for (const auto& f : m1.outputs) CHECK(sha256_hex(read_file(out / f.name)) == f.sha256);
    const auto m2 = run_experiment(parse_config(doc));
    CHECK(checksums(m1) == checksums(m2));
}

TEST_CASE("dos table hash is enforced") {
    const auto tdir = scratch("table");
    json dos = {{"kind", "dos"},
                {"model", {{"half_side", 40}, {"disorder", kUniform5}}},
                {"run", {{"realizations", 10}, {"out", tdir.string()}}},
                {"dos_table", {{"grid_points", 301}}}};
    run_experiment(parse_config(dos));
    const auto table = load_dos_table(tdir / "dos_table.csv");

    const auto out = scratch("hashed");
    json ls = {{"kind", "levelstats"},
               {"model", {{"half_side", 40}, {"disorder", kUniform5}}},
               {"run", {{"realizations", 100}, {"out", out.string()}}},
               {"stats", {{"calibration_repetitions", 10}}},
               {"dos_table", {{"path", (tdir / "dos_table.csv").string()}, {"hash", table.hash}}}};
    CHECK_NOTHROW(run_experiment(parse_config(ls)));
    std::string wrong = table.hash;
    wrong[0] = wrong[0] == 'a' ? 'b' : 'a';
    ls["dos_table"]["hash"] = wrong;
    CHECK_THROWS_WITH(run_experiment(parse_config(ls)), doctest::Contains("dos table hash mismatch"));
    ls["dos_table"].erase("hash");
    ls["model"]["half_side"] = 41;
    CHECK_THROWS_WITH(run_experiment(parse_config(ls)), doctest::Contains("different model"));
}

TEST_CASE("concentration writes one row per size and deviation") {
    const auto out = scratch("conc");
    json c = small_config("concentration", out, 1);
    c["stats"] = {{"epsilon", {0.1, 0.3}}};
    const auto m = run_experiment(parse_config(c));
    std::istringstream tail(read_file(out / "tail.csv"));
    std::string line;
    std::getline(tail, line);
    CHECK(line == "L,volume,epsilon,mass,expected,exceed,trials,probability,ci_lo,ci_hi,ldp_bound");
    int rows = 0;
    while (std::getline(tail, line)) ++rows;
    CHECK(rows == 6);
    CHECK(!m.gated());
}

TEST_CASE("gating reflects the declared bounds") {
    const auto out = scratch("gate");
    json c = small_config("spacings", out, 1);
    c["gate"] = {{"sup_distance", 1.0}};
    CHECK(run_experiment(parse_config(c)).passed());
    c["gate"] = {{"sup_distance", 0.0}};
    const auto m = run_experiment(parse_config(c));
    CHECK(m.gated());
    CHECK(!m.passed());
}

TEST_CASE("every experiment kind is identical with 1 and 8 workers") {
    for (const auto& kind : experiment_kind_names()) {
        CAPTURE(kind);
        const auto a = run_experiment(parse_config(small_config(kind, scratch(kind + "_1"), 1)));
        const auto b = run_experiment(parse_config(small_config(kind, scratch(kind + "_8"), 8)));
        CHECK(!a.outputs.empty());
        CHECK(checksums(a) == checksums(b));
    }
}

TEST_CASE("command line: exit codes and flag precedence") {
    if (!std::getenv("ANDERSON_CLI")) return;
    int status = -1;
    const auto out = scratch("cli");
    const std::string disorder = "'{\"kind\":\"uniform\",\"a\":-0.5,\"b\":0.5,\"coupling\":5}'";
    run_cli("levelstats --beta 0.2 --out " + out.string(), status);
    CHECK(status == 1);

    const auto cfg = out.parent_path() / "cli_config.json";
    write_file_atomic(cfg, json{{"run", {{"realizations", 9999}}}, {"gate", {{"sup_distance", 0.0}}}}.dump());
    const auto text = run_cli("spacings --config " + cfg.string() + " --half-side 40 --realizations 20 --disorder " +
                                  disorder + " --out " + out.string(),
                              status);
    CHECK_MESSAGE(status == 2, text);
    const auto manifest = json::parse(read_file(out / "manifest.json"));
    CHECK(manifest["config"]["run"]["realizations"] == 20);
    CHECK(manifest["flag_overrides"].size() == 4);
    CHECK(manifest["gate"]["passed"] == false);

    run_cli("dos --half-side 20 --realizations 3 --grid-points 101 --out " + out.string(), status);
    CHECK(status == 0);
}
