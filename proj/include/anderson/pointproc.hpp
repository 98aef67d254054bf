#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "anderson/dos.hpp"
#include "anderson/eig.hpp"
#include "anderson/realizations.hpp"
#include "anderson/stats.hpp"

namespace anderson {

// xi_j = volume * nu0 * (E_j - E0)
struct RescaledConfiguration {
    double reference_energy = 0.0;
    double nu0 = 0.0;
    std::size_t volume = 0;
    std::vector<double> points;
};

RescaledConfiguration rescale_levels(std::span<const double> levels, double e0, double nu0,
                                     std::size_t volume);
inline RescaledConfiguration rescale_levels(const SpectralData& s, double e0, double nu0,
                                            std::size_t volume) {
    return rescale_levels(s.values, e0, nu0, volume);
}
std::vector<double> restore_levels(const RescaledConfiguration& c);

// N(I) / |I|, the alternative constant that replaces nu(E0).
double window_density(const DosTable& table, Interval window);

// Reference density at E0 with its bandwidth diagnostic. A nonpositive h
// selects the table's own smoothing width; throws when the value is not
// positive.
DensityEstimate reference_density(const DosTable& table, double e0, double h = 0.0);

struct ScaleSpec {
    double beta = 0.5;   // window exponent, d/(d+2) < beta < 1
    double delta = 0.5;  // separation exponent
    void validate(int dim) const;
};

struct AdmissibleWindow {
    Interval energy;    // E0 +- volume^-beta
    Interval rescaled;  // volume^(1-beta) * [-1, 1]
};
AdmissibleWindow admissible_window(double e0, double beta, std::size_t volume, int dim);

struct CountSample {
    std::vector<std::size_t> counts;
    std::uint64_t seed = 0;
};

// Throws "intervals not disjoint" when two closed intervals share more than
// an endpoint.
void check_disjoint(std::span<const Interval> intervals);

// Points in each closed interval, by binary search.
CountSample interval_counts(const RescaledConfiguration& config, std::span<const Interval> intervals);

// Separation below exp(-volume^delta) and exits from the admissible rescaled
// range; reported, never fatal.
std::vector<std::string> interval_warnings(std::span<const Interval> intervals, std::size_t volume,
                                           const ScaleSpec& scale);

struct CountTestReport {
    std::vector<double> means;
    std::vector<std::size_t> kmax;
    std::vector<double> empirical;  // joint cells, overflow last
    std::vector<double> reference;
    double tv = 0.0;
    std::vector<double> marginal_tv;
    std::size_t samples = 0;
    Calibration calibration;

    double threshold(double floor) const { return std::max(floor, calibration.threshold); }
};

// Empirical joint count law against the product Poisson law, cells truncated
// where the Poisson tail drops below 1e-4. The calibration draws the same
// number of genuine Poisson vectors `repetitions` times.
CountTestReport count_distribution_test(std::span<const CountSample> samples, std::span<const double> means,
                                        std::uint64_t calibration_seed, std::size_t repetitions = 200);

struct IndependenceReport {
    std::vector<std::size_t> kmax;
    std::vector<double> joint;
    std::vector<double> product_of_marginals;
    std::vector<double> product_poisson;
    double tv_independence = 0.0;
    double tv_poisson = 0.0;
    Calibration independence_calibration;
    Calibration poisson_calibration;
    std::size_t samples = 0;
};

// Two-axis samples: joint law against the product of its own marginals and
// against the product Poisson law.
IndependenceReport independence_test(std::span<const CountSample> samples, std::span<const double> means,
                                     std::uint64_t calibration_seed, std::size_t repetitions = 200);

// ---------------------------------------------------------------------------
// Experiments

struct LevelStatsSettings {
    double e0 = 0.0;
    std::vector<Interval> intervals{{-1.0, 1.0}};  // rescaled
    ScaleSpec scale;
    bool check_scale = false;
    double bandwidth = 0.0;
    std::size_t calibration_repetitions = 200;
};

struct LevelStatsReport {
    DensityEstimate nu;
    std::size_t volume = 0;
    std::vector<CountSample> samples;
    CountTestReport test;
    std::vector<std::string> warnings;
    std::vector<RealizationRecord> records;
};

LevelStatsReport levelstats_experiment(const ModelParams& model, const DosTable& table,
                                       const LevelStatsSettings& settings, const RunOptions& run);

struct TwoEnergySettings {
    double e0 = 0.0;
    double e0_prime = 0.5;
    Interval u_plus{-0.5, 0.5};
    Interval u_minus{-0.5, 0.5};
    double bandwidth = 0.0;
    std::size_t calibration_repetitions = 200;
};

struct TwoEnergyReport {
    DensityEstimate nu;
    DensityEstimate nu_prime;
    std::size_t volume = 0;
    double divergence = 0.0;  // volume * |E0 - E0'|
    std::vector<CountSample> samples;
    IndependenceReport test;
    std::vector<std::string> warnings;
    std::vector<RealizationRecord> records;
};

TwoEnergyReport two_energy_experiment(const ModelParams& model, const DosTable& table,
                                      const TwoEnergySettings& settings, const RunOptions& run);

struct ConcentrationSettings {
    Interval window{-0.5, 0.5};
    std::vector<double> epsilons{0.1};
    std::vector<int> half_sides{125, 250, 500};
    double ldp_delta = 0.5;  // exponent in exp(-(N(I)|L|)^delta / delta)
};

struct ConcentrationRow {
    int half_side = 0;
    std::size_t volume = 0;
    double epsilon = 0.0;
    double mass = 0.0;
    double expected = 0.0;
    std::size_t exceed = 0;
    std::size_t trials = 0;
    double probability = 0.0;
    ProportionInterval ci;
    double ldp_bound = 0.0;
};

struct ConcentrationReport {
    std::vector<ConcentrationRow> rows;  // grouped by epsilon, then by L ascending
    std::vector<std::vector<std::size_t>> counts;  // per L, per realization
    bool nonincreasing = true;
    // Whether N(I) >= |I|^(2 - v) holds for some v in (0, 1).
    bool admissible = false;
    std::vector<std::string> warnings;
    std::vector<std::vector<RealizationRecord>> records;
};

double ldp_bound(double expected_count, double delta);

ConcentrationReport concentration_experiment(const ModelParams& model, const DosTable& table,
                                             const ConcentrationSettings& settings, const RunOptions& run);

}  // namespace anderson
