#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anderson/model.hpp"
#include "anderson/realizations.hpp"

namespace anderson {

struct DosMetadata {
    DisorderSpec disorder;
    int dim = 1;
    int half_side = 1;
    Boundary boundary = Boundary::periodic;
    std::size_t realizations = 0;
    std::uint64_t master_seed = 0;
    std::size_t bandwidth_steps = 5;
    std::size_t clip_count = 0;
    std::string estimator = "disorder-averaged normalized eigenvalue count";
    std::vector<RealizationRecord> replaced;  // realizations that needed a new seed
};

// Integrated density of states N(E_k) and density nu(E_k) on a grid.
struct DosTable {
    std::vector<double> energy;
    std::vector<double> ids;
    std::vector<double> density;
    DosMetadata meta;
    std::string hash;

    Interval range() const { return {energy.front(), energy.back()}; }
    double step() const { return (energy.back() - energy.front()) / double(energy.size() - 1); }
    // Linear interpolation; throws outside the grid.
    double ids_at(double e) const;
    double density_interpolated(double e) const;
};

// Uniform grid over the spectrum envelope widened by 0.5 on each side.
std::vector<double> default_grid(const DisorderSpec& disorder, int dim, std::size_t points = 2001);

// Averages count_below(H, E_k) / N over run.realizations draws.
DosTable estimate_dos(const ModelParams& model, std::vector<double> grid, const RunOptions& run,
                      std::size_t bandwidth_steps = 5);

// Table from a given ids column; density by centered differences.
DosTable dos_from_ids(std::vector<double> energy, std::vector<double> ids,
                      std::size_t bandwidth_steps = 5);

// Content hash of (disorder, box, boundary, grid, R, seed).
std::string dos_hash(const DosMetadata& meta, const std::vector<double>& grid);

// (N(E0 + h) - N(E0 - h)) / (2h); h must cover at least two grid steps.
double density_at(const DosTable& table, double e0, double h);

struct DensityEstimate {
    double value = 0.0;
    double bandwidth = 0.0;
    double doubled = 0.0;          // estimate at 2h, NaN when 2h leaves the grid
    double relative_change = 0.0;  // |doubled - value| / value
    bool stable = false;           // relative change within 5%
};
DensityEstimate density_estimate(const DosTable& table, double e0, double h);

double interval_mass(const DosTable& table, Interval j);

// Trapezoid integral of the density column over the whole grid.
double density_integral(const DosTable& table);

void save_dos_table(const DosTable& table, const std::filesystem::path& path);
// Verifies the stored hash against the metadata and grid.
DosTable load_dos_table(const std::filesystem::path& path);

nlohmann::json dos_metadata_json(const DosMetadata& meta);

}  // namespace anderson
