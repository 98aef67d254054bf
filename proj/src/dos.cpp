#include "anderson/dos.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "anderson/eig.hpp"
#include "anderson/io.hpp"

namespace anderson {

namespace {

void check_grid(const std::vector<double>& grid) {
    if (grid.size() < 3) throw std::invalid_argument("energy grid needs at least 3 points");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("energy grid not strictly increasing");
}

std::size_t segment_of(const std::vector<double>& grid, double e) {
    if (!(e >= grid.front() && e <= grid.back())) throw std::out_of_range("outside calibrated range");
    auto it = std::upper_bound(grid.begin(), grid.end(), e);
    std::size_t k = std::size_t(it - grid.begin());
    return k == 0 ? 0 : std::min(k - 1, grid.size() - 2);
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double e) {
    const std::size_t k = segment_of(x, e);
    const double t = (e - x[k]) / (x[k + 1] - x[k]);
    return y[k] + t * (y[k + 1] - y[k]);
}

// Centered differences over `steps` grid points, one-sided near the ends.
std::vector<double> differentiate(const std::vector<double>& energy, const std::vector<double>& ids,
                                  std::size_t steps, std::size_t& clipped) {
    const std::size_t n = energy.size();
    std::vector<double> d(n);
    clipped = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = k >= steps ? k - steps : 0;
        const std::size_t hi = std::min(n - 1, k + steps);
        d[k] = (ids[hi] - ids[lo]) / (energy[hi] - energy[lo]);
        if (d[k] < 0.0) {
            d[k] = 0.0;
            ++clipped;
        }
    }
    return d;
}

}  // namespace

double DosTable::ids_at(double e) const { return interpolate(energy, ids, e); }
double DosTable::density_interpolated(double e) const { return interpolate(energy, density, e); }

std::vector<double> default_grid(const DisorderSpec& disorder, int dim, std::size_t points) {
    if (points < 3) throw std::invalid_argument("energy grid needs at least 3 points");
    const auto env = spectrum_bounds(disorder, dim);
    const double lo = env.lo - 0.5, hi = env.hi + 0.5;
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k) grid[k] = lo + (hi - lo) * double(k) / double(points - 1);
    grid.back() = hi;
    return grid;
}

nlohmann::json dos_metadata_json(const DosMetadata& m) {
    nlohmann::json j{{"disorder", m.disorder},
                     {"dim", m.dim},
                     {"half_side", m.half_side},
                     {"boundary", to_string(m.boundary)},
                     {"realizations", m.realizations},
                     {"master_seed", m.master_seed},
                     {"bandwidth_steps", m.bandwidth_steps},
                     {"clip_count", m.clip_count},
                     {"estimator", m.estimator}};
    j["replaced"] = m.replaced;
    return j;
}

std::string dos_hash(const DosMetadata& m, const std::vector<double>& grid) {
    nlohmann::json key{{"disorder", m.disorder},
                       {"dim", m.dim},
                       {"half_side", m.half_side},
                       {"boundary", to_string(m.boundary)},
                       {"realizations", m.realizations},
                       {"master_seed", m.master_seed}};
    auto& g = key["grid"] = nlohmann::json::array();
    for (double e : grid) g.push_back(format_double(e));
    return sha256_hex(key.dump());
}

DosTable dos_from_ids(std::vector<double> energy, std::vector<double> ids, std::size_t bandwidth_steps) {
    check_grid(energy);
    if (ids.size() != energy.size()) throw std::invalid_argument("ids and grid differ in length");
    if (bandwidth_steps == 0) throw std::invalid_argument("bandwidth must be at least one grid step");
    DosTable t;
    t.density = differentiate(energy, ids, bandwidth_steps, t.meta.clip_count);
    t.energy = std::move(energy);
    t.ids = std::move(ids);
    t.meta.bandwidth_steps = bandwidth_steps;
    t.hash = dos_hash(t.meta, t.energy);
    return t;
}

DosTable estimate_dos(const ModelParams& model, std::vector<double> grid, const RunOptions& run,
                      std::size_t bandwidth_steps) {
    check_grid(grid);
    if (run.realizations < 1) throw std::invalid_argument("at least one realization required");
    const auto box = model.box();
    const std::size_t n = box.volume();

    auto results = map_realizations(run, [&](std::size_t, std::uint64_t seed) {
        const auto h = model.hamiltonian(seed);
        return SpectrumSlicer(h).counts_on_grid(grid);
    });

    std::vector<unsigned long long> totals(grid.size(), 0);
    for (const auto& counts : results.results)
        for (std::size_t k = 0; k < grid.size(); ++k) totals[k] += counts[k];
    std::vector<double> ids(grid.size());
    const double denom = double(run.realizations) * double(n);
    for (std::size_t k = 0; k < grid.size(); ++k) ids[k] = double(totals[k]) / denom;

    DosTable t = dos_from_ids(std::move(grid), std::move(ids), bandwidth_steps);
    t.meta.disorder = model.disorder;
    t.meta.dim = model.dim;
    t.meta.half_side = model.half_side;
    t.meta.boundary = model.boundary;
    t.meta.realizations = run.realizations;
    t.meta.master_seed = run.master_seed;
    for (const auto& rec : results.records)
        if (!rec.failed_seeds.empty()) t.meta.replaced.push_back(rec);
    t.hash = dos_hash(t.meta, t.energy);
    return t;
}

double density_at(const DosTable& table, double e0, double h) {
    if (!(h >= 2.0 * table.step() * (1.0 - 1e-12)))
        throw std::invalid_argument("bandwidth below two grid steps");
    const auto r = table.range();
    if (!(e0 - h >= r.lo && e0 + h <= r.hi)) throw std::out_of_range("outside calibrated range");
    return std::max(0.0, (table.ids_at(e0 + h) - table.ids_at(e0 - h)) / (2.0 * h));
}

DensityEstimate density_estimate(const DosTable& table, double e0, double h) {
    DensityEstimate d;
    d.bandwidth = h;
    d.value = density_at(table, e0, h);
    const auto r = table.range();
    if (e0 - 2.0 * h >= r.lo && e0 + 2.0 * h <= r.hi) {
        d.doubled = density_at(table, e0, 2.0 * h);
        d.relative_change = d.value > 0.0 ? std::abs(d.doubled - d.value) / d.value : INFINITY;
        d.stable = d.relative_change <= 0.05;
    } else {
        d.doubled = NAN;
        d.relative_change = NAN;
    }
    return d;
}

double interval_mass(const DosTable& table, Interval j) {
    if (j.lo > j.hi) throw std::invalid_argument("interval with lo > hi");
    if (j.lo == j.hi) {
        table.ids_at(j.lo);  // range check
        return 0.0;
    }
    return std::max(0.0, table.ids_at(j.hi) - table.ids_at(j.lo));
}

double density_integral(const DosTable& table) {
    double s = 0.0;
    for (std::size_t k = 1; k < table.energy.size(); ++k)
        s += 0.5 * (table.density[k] + table.density[k - 1]) * (table.energy[k] - table.energy[k - 1]);
    return s;
}

void save_dos_table(const DosTable& table, const std::filesystem::path& path) {
    nlohmann::json header{{"hash", table.hash}, {"metadata", dos_metadata_json(table.meta)}};
    CsvWriter csv({"energy", "ids", "density"});
    for (std::size_t k = 0; k < table.energy.size(); ++k) {
        csv.cell(table.energy[k]).cell(table.ids[k]).cell(table.density[k]);
        csv.end_row();
    }
    write_file_atomic(path, header.dump() + "\n" + csv.text());
}

DosTable load_dos_table(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dos table file");
    const auto header = nlohmann::json::parse(line);
    if (!std::getline(in, line) || line != "energy,ids,density")
        throw std::runtime_error("dos table: missing csv header");

    DosTable t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double e, n, d;
        char c1, c2;
        std::istringstream row(line);
        if (!(row >> e >> c1 >> n >> c2 >> d) || c1 != ',' || c2 != ',')
            throw std::runtime_error("dos table: malformed row: " + line);
        t.energy.push_back(e);
        t.ids.push_back(n);
        t.density.push_back(d);
    }
    check_grid(t.energy);

    const auto& m = header.at("metadata");
    t.meta.disorder = m.at("disorder").get<DisorderSpec>();
    t.meta.dim = m.at("dim").get<int>();
    t.meta.half_side = m.at("half_side").get<int>();
    t.meta.boundary = boundary_from_string(m.at("boundary").get<std::string>());
    t.meta.realizations = m.at("realizations").get<std::size_t>();
    t.meta.master_seed = m.at("master_seed").get<std::uint64_t>();
    t.meta.bandwidth_steps = m.at("bandwidth_steps").get<std::size_t>();
    t.meta.clip_count = m.at("clip_count").get<std::size_t>();
    t.meta.estimator = m.at("estimator").get<std::string>();
    for (const auto& r : m.at("replaced")) {
        RealizationRecord rec;
        rec.index = r.at("index").get<std::size_t>();
        rec.seed = r.at("seed").get<std::uint64_t>();
        if (r.contains("failed_seeds")) rec.failed_seeds = r.at("failed_seeds").get<std::vector<std::uint64_t>>();
        t.meta.replaced.push_back(rec);
    }
    t.hash = header.at("hash").get<std::string>();
    if (t.hash != dos_hash(t.meta, t.energy)) throw std::runtime_error("dos table hash mismatch");
    return t;
}

}  // namespace anderson
