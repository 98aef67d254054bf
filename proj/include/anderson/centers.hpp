#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "anderson/dos.hpp"
#include "anderson/eig.hpp"
#include "anderson/pointproc.hpp"
#include "anderson/realizations.hpp"
#include "anderson/spacings.hpp"

namespace anderson {

// Site maximizing |phi|; ties go to the smallest linear index.
struct LocalizationCenter {
    std::size_t index = 0;  // eigen index j
    std::size_t site = 0;
    std::vector<int> coords;
    double amplitude = 0.0;
};

LocalizationCenter localization_center(std::span<const double> vector, const LatticeBox& box,
                                       std::size_t index = 0);

// Torus diameter (max norm) of {g : |phi(g)| >= (1 - tau) max |phi|}.
int center_cloud_diameter(std::span<const double> vector, const LatticeBox& box, double tau);

struct JointPoint {
    std::size_t index = 0;
    double xi = 0.0;        // nu0 (E_j - E0) ell^d
    std::vector<double> x;  // center coordinates / ell
};

std::vector<JointPoint> joint_points(const SpectralData& pairs, double e0, double nu0, double ell,
                                     const LatticeBox& box, std::vector<std::string>* warnings = nullptr);

// Energy interval times spatial cube, every side half-open [lo, hi).
struct ProductBox {
    Interval energy;
    std::vector<Interval> cube;

    double measure() const;
    bool contains(const JointPoint& p) const;
};

// Throws "boxes overlap" unless every pair is separated along some axis.
void check_boxes_disjoint(std::span<const ProductBox> boxes);

std::vector<std::size_t> product_box_counts(std::span<const JointPoint> points, std::span<const ProductBox> boxes);

// Non-covariant scaling: energies at scale ell, positions at scale
// ell_tilde; ell_prime only enters through the regime ratio.
struct NoncovariantScales {
    double ell = 1.0;
    double ell_prime = 1.0;
    double ell_tilde = 1.0;
    Interval j{-1.0, 1.0};
    std::vector<Interval> c;  // one side per dimension, half-open
};

struct NoncovariantCount {
    std::size_t raw = 0;
    double normalized = 0.0;  // (ell / ell_tilde)^d * raw, expected |J||C|
};

NoncovariantCount noncovariant_count(const SpectralData& pairs, double e0, double nu0,
                                     const NoncovariantScales& scales, const LatticeBox& box);

// Nearest-neighbour torus distances, each multiplied by (nu0 |I|)^(1/d).
// Fewer than two centers give an empty result.
std::vector<double> center_spacings(std::span<const std::size_t> sites, double nu0, double width,
                                    const LatticeBox& box);

// ---------------------------------------------------------------------------
// Experiments

struct CentersSettings {
    Interval window{-0.1, 0.1};
    double tau = 0.5;
};

struct CenterRecord {
    std::size_t realization = 0;
    std::size_t index = 0;
    double energy = 0.0;
    LocalizationCenter center;
    int diameter = 0;
};

struct CentersReport {
    std::vector<CenterRecord> centers;
    double median_diameter = 0.0;
    std::vector<RealizationRecord> records;
};

CentersReport centers_experiment(const ModelParams& model, const CentersSettings& settings, const RunOptions& run);

struct JointSettings {
    double e0 = 0.0;
    double ell = 0.0;  // nonpositive: the box side M
    std::vector<ProductBox> boxes;
    std::vector<NoncovariantScales> noncovariant;
    double bandwidth = 0.0;
    std::size_t calibration_repetitions = 200;
};

struct NoncovariantSummary {
    NoncovariantScales scales;
    std::vector<NoncovariantCount> counts;
    double zero_fraction = 0.0;
    double mean_normalized = 0.0;
    double target = 0.0;  // |J| |C|
    double regime_ratio = 0.0;  // ell_tilde / ell_prime
};

struct JointReport {
    DensityEstimate nu;
    double ell = 0.0;
    double side_ratio = 0.0;  // M / ell
    std::vector<CountSample> samples;
    CountTestReport test;
    std::vector<NoncovariantSummary> noncovariant;
    std::vector<std::string> warnings;
    std::vector<RealizationRecord> records;
};

JointReport joint_experiment(const ModelParams& model, const DosTable& table, const JointSettings& settings,
                             const RunOptions& run);

struct DcsSettings {
    double e0 = 0.0;
    double width = 0.0;  // nonpositive: 1 / log^d(volume)
    std::size_t oracle_factor = 10;
    double bandwidth = 0.0;
};

struct DcsReport {
    DensityEstimate nu;
    Interval window;
    double intensity = 0.0;  // nu0 |I| per site
    std::vector<double> spacings;
    std::vector<std::size_t> centers_per_realization;
    std::size_t skipped = 0;
    std::vector<double> oracle_spacings;
    std::size_t oracle_realizations = 0;
    double sup_oracle = 0.0;
    double sup_limit = 0.0;  // against exp(-s^d), informational
    std::vector<std::string> warnings;
    std::vector<RealizationRecord> records;
};

DcsReport dcs_experiment(const ModelParams& model, const DosTable& table, const DcsSettings& settings,
                         const RunOptions& run);

// Homogeneous Poisson configuration of lattice sites with nu0 |I| points per
// site on average, normalized like center_spacings.
std::vector<double> poisson_center_spacings(std::mt19937_64& engine, double nu0, double width,
                                            const LatticeBox& box);

}  // namespace anderson
