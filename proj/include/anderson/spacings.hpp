#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "anderson/dos.hpp"
#include "anderson/pointproc.hpp"
#include "anderson/realizations.hpp"

namespace anderson {

// Survival function S(x) = #{v >= x} / n of a sample of nonnegative values.
class EmpiricalDistribution {
public:
    EmpiricalDistribution() = default;
    explicit EmpiricalDistribution(std::vector<double> samples);

    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    const std::vector<double>& values() const { return values_; }

    double survival(double x) const;        // #{v >= x} / n
    double survival_after(double x) const;  // #{v > x} / n, the limit from the right

private:
    std::vector<double> values_;
};

using SurvivalFunction = std::function<double(double)>;

// c * (E_{j+1} - E_j); throws "insufficient levels" below two levels.
std::vector<double> spacing_sequence(std::span<const double> levels, double c);

// Exact sup over x >= 0 of |S_emp(x) - reference(x)| for a continuous
// nonincreasing reference, checking both sides of every jump.
double dls_statistic(const EmpiricalDistribution& emp, const SurvivalFunction& reference);

// Two-sample version: sup over x >= 0 of |S_a(x) - S_b(x)|.
double sup_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

// g(x) = integral over J of exp(-nu_J(l) x) nu_J(l) dl with nu_J = nu / N(J),
// by the trapezoid rule on the table nodes inside J. N(J) is taken with the
// same quadrature so that g(0) = 1.
class GLimit {
public:
    GLimit(const DosTable& table, Interval j);
    double operator()(double x) const;
    double min_rate() const;
    double max_rate() const;

private:
    std::vector<double> nodes_;
    std::vector<double> rates_;  // nu_J at the nodes
};

double g_limit(const DosTable& table, Interval j, double x);

enum class SpacingMode { local, macro };
enum class Normalization { local, remark };

std::string to_string(SpacingMode m);
std::string to_string(Normalization n);
SpacingMode spacing_mode_from_string(const std::string& s);
Normalization normalization_from_string(const std::string& s);

struct DlsSettings {
    SpacingMode mode = SpacingMode::local;
    Normalization normalization = Normalization::local;
    double e0 = 0.0;
    double width_exponent = 0.3;  // local window |I| = volume^-exponent
    double width = 0.0;           // overrides the exponent rule when positive
    Interval j{-1.0, 1.0};        // macro window
    double bandwidth = 0.0;
};

struct DlsReport {
    Interval window;
    double constant = 0.0;  // c in c * (E_{j+1} - E_j)
    DensityEstimate nu;     // local mode
    double window_density = 0.0;
    double mass = 0.0;      // N(J) or N(I)
    std::vector<double> spacings;
    std::vector<std::size_t> per_realization;  // spacings contributed
    std::size_t skipped = 0;                   // realizations with < 2 levels in the window
    double sup_distance = 0.0;
    std::vector<std::string> warnings;
    std::vector<RealizationRecord> records;
};

DlsReport dls_experiment(const ModelParams& model, const DosTable& table, const DlsSettings& settings,
                         const RunOptions& run);

// Reference survival function for a finished report: e^-x in local mode,
// g_{nu,J} in macro mode.
SurvivalFunction dls_reference(const DosTable& table, const DlsSettings& settings);

// Spacings of the levels of one realization whose lower level lies in the
// window; the last level inside pairs with the first above it.
std::vector<double> window_spacings(std::span<const double> levels, std::size_t in_window, double c);

}  // namespace anderson
