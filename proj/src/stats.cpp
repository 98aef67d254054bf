#include "anderson/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace anderson {

std::size_t poisson_sample(std::mt19937_64& engine, double mean) {
    if (!(mean >= 0.0) || mean > 700.0) throw std::invalid_argument("poisson mean out of range");
    const double u = unit_uniform(engine);
    double p = std::exp(-mean);
    double cdf = p;
    std::size_t k = 0;
    while (u >= cdf) {
        ++k;
        p *= mean / double(k);
        cdf += p;
        if (p == 0.0 && double(k) > mean) break;  // rounding left u above the summed cdf
    }
    return k;
}

double poisson_log_pmf(double mean, std::size_t k) {
    if (mean < 0.0) throw std::invalid_argument("negative poisson mean");
    if (mean == 0.0) return k == 0 ? 0.0 : -INFINITY;
    return -mean + double(k) * std::log(mean) - std::lgamma(double(k) + 1.0);
}

double poisson_pmf(double mean, std::size_t k) { return std::exp(poisson_log_pmf(mean, k)); }

double poisson_tail(double mean, std::size_t k) {
    double cdf = 0.0;
    for (std::size_t j = 0; j <= k; ++j) cdf += poisson_pmf(mean, j);
    return std::max(0.0, 1.0 - cdf);
}

std::size_t poisson_truncation(double mean, double tail) {
    std::size_t k = 0;
    double cdf = poisson_pmf(mean, 0);
    while (1.0 - cdf >= tail) {
        ++k;
        cdf += poisson_pmf(mean, k);
    }
    return k;
}

double poisson_reference(std::span<const double> means, std::span<const std::size_t> counts) {
    if (means.size() != counts.size()) throw std::invalid_argument("means and counts differ in length");
    double log_p = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) log_p += poisson_log_pmf(means[i], counts[i]);
    return std::exp(log_p);
}

// ---------------------------------------------------------------------------

CountTable::CountTable(std::vector<std::size_t> kmax) : kmax_(std::move(kmax)) {
    if (kmax_.empty()) throw std::invalid_argument("count table needs at least one axis");
    stride_.assign(kmax_.size(), 1);
    for (std::size_t a = kmax_.size(); a-- > 0;) {
        stride_[a] = inner_;
        inner_ *= kmax_[a] + 1;
    }
    hits_.assign(inner_ + 1, 0);
}

std::size_t CountTable::cell_of(std::span<const std::size_t> counts) const {
    if (counts.size() != kmax_.size()) throw std::invalid_argument("count vector has wrong length");
    std::size_t cell = 0;
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] > kmax_[a]) return inner_;
        cell += counts[a] * stride_[a];
    }
    return cell;
}

std::vector<std::size_t> CountTable::counts_of(std::size_t cell) const {
    if (cell >= inner_) throw std::out_of_range("overflow cell has no count vector");
    std::vector<std::size_t> k(kmax_.size());
    for (std::size_t a = 0; a < k.size(); ++a) {
        k[a] = cell / stride_[a];
        cell %= stride_[a];
    }
    return k;
}

void CountTable::add(std::span<const std::size_t> counts) {
    ++hits_[cell_of(counts)];
    ++total_;
}

std::vector<double> CountTable::pmf() const {
    std::vector<double> p(hits_.size(), 0.0);
    if (total_ == 0) return p;
    for (std::size_t c = 0; c < hits_.size(); ++c) p[c] = double(hits_[c]) / double(total_);
    return p;
}

std::vector<double> CountTable::product_law(const std::vector<std::vector<double>>& marginals) const {
    if (marginals.size() != kmax_.size()) throw std::invalid_argument("one marginal per axis required");
    for (std::size_t a = 0; a < kmax_.size(); ++a)
        if (marginals[a].size() != kmax_[a] + 1) throw std::invalid_argument("marginal length mismatch");
    std::vector<double> q(inner_ + 1, 0.0);
    double inner_mass = 0.0;
    for (std::size_t c = 0; c < inner_; ++c) {
        const auto k = counts_of(c);
        double p = 1.0;
        for (std::size_t a = 0; a < k.size(); ++a) p *= marginals[a][k[a]];
        q[c] = p;
        inner_mass += p;
    }
    q[inner_] = std::max(0.0, 1.0 - inner_mass);
    return q;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("pmfs differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return std::min(1.0, 0.5 * s);
}

ProportionInterval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = double(trials);
    const double p = double(successes) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    // The endpoints are exact at 0 and n successes; rounding would leave a residue.
    return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
            successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * double(values.size() - 1);
    const std::size_t i = std::size_t(std::floor(pos));
    const double frac = pos - double(i);
    if (i + 1 >= values.size()) return values.back();
    return values[i] + frac * (values[i + 1] - values[i]);
}

Calibration calibrate(std::size_t repetitions, std::uint64_t seed,
                      const std::function<double(std::mt19937_64&)>& draw, double floor) {
    if (repetitions == 0) throw std::invalid_argument("calibration needs repetitions");
    std::mt19937_64 engine(seed);
    std::vector<double> stats(repetitions);
    for (auto& s : stats) s = draw(engine);
    Calibration c;
    c.repetitions = repetitions;
    c.percentile99 = percentile(std::move(stats), 0.99);
    c.threshold = std::max(floor, c.percentile99);
    return c;
}

}  // namespace anderson
