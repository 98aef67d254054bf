#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace anderson {

// One engine output mapped to [0, 1) as (x >> 11) * 2^-53.
inline double unit_uniform(std::mt19937_64& engine) {
    return double(engine() >> 11) * 0x1.0p-53;
}

// Poisson variate by sequential inversion of the cdf (mean below 700).
std::size_t poisson_sample(std::mt19937_64& engine, double mean);

double poisson_log_pmf(double mean, std::size_t k);
double poisson_pmf(double mean, std::size_t k);
// P(X > k)
double poisson_tail(double mean, std::size_t k);
// Smallest k with P(X > k) < tail.
std::size_t poisson_truncation(double mean, double tail = 1e-4);

// Product of Poisson pmfs, evaluated in log space.
double poisson_reference(std::span<const double> means, std::span<const std::size_t> counts);

// Histogram of count vectors over the box prod_i [0, kmax_i], plus one
// overflow cell collecting every vector with some coordinate above its bound.
class CountTable {
public:
    explicit CountTable(std::vector<std::size_t> kmax);

    std::size_t axes() const { return kmax_.size(); }
    const std::vector<std::size_t>& kmax() const { return kmax_; }
    std::size_t cells() const { return inner_ + 1; }
    std::size_t overflow_cell() const { return inner_; }
    std::size_t cell_of(std::span<const std::size_t> counts) const;
    // Count vector of an inner cell.
    std::vector<std::size_t> counts_of(std::size_t cell) const;

    void add(std::span<const std::size_t> counts);
    std::size_t total() const { return total_; }
    std::vector<double> pmf() const;

    // Cell probabilities of the product law with the given marginals; each
    // marginal lists P(X_i = k) for k = 0..kmax_i. The overflow cell takes the
    // remaining mass.
    std::vector<double> product_law(const std::vector<std::vector<double>>& marginals) const;

private:
    std::vector<std::size_t> kmax_;
    std::vector<std::size_t> stride_;
    std::size_t inner_ = 1;
    std::vector<std::size_t> hits_;
    std::size_t total_ = 0;
};

// 0.5 * sum |p - q|
double total_variation(std::span<const double> p, std::span<const double> q);

struct ProportionInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval; z = 1.96 gives 95%.
ProportionInterval wilson_interval(std::size_t successes, std::size_t trials,
                                   double z = 1.959963984540054);

// Linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);

// Null distribution of a distance statistic: `draw` computes the statistic
// on one simulated data set. Returns the 99th percentile over `repetitions`
// draws, never below `floor`.
struct Calibration {
    double threshold = 0.0;
    double percentile99 = 0.0;
    std::size_t repetitions = 0;
};
Calibration calibrate(std::size_t repetitions, std::uint64_t seed,
                      const std::function<double(std::mt19937_64&)>& draw, double floor = 0.02);

}  // namespace anderson
