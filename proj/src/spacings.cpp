#include "anderson/spacings.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace anderson {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples) : values_(std::move(samples)) {
    for (double v : values_)
        if (!(v >= 0.0)) throw std::invalid_argument("empirical distribution takes nonnegative finite values");
    std::sort(values_.begin(), values_.end());
}

double EmpiricalDistribution::survival(double x) const {
    if (values_.empty()) return 0.0;
    auto it = std::lower_bound(values_.begin(), values_.end(), x);
    return double(values_.end() - it) / double(values_.size());
}

double EmpiricalDistribution::survival_after(double x) const {
    if (values_.empty()) return 0.0;
    auto it = std::upper_bound(values_.begin(), values_.end(), x);
    return double(values_.end() - it) / double(values_.size());
}

std::vector<double> spacing_sequence(std::span<const double> levels, double c) {
    if (levels.size() < 2) throw std::invalid_argument("insufficient levels");
    if (!(c > 0.0)) throw std::invalid_argument("normalization constant must be positive");
    std::vector<double> s(levels.size() - 1);
    for (std::size_t j = 0; j + 1 < levels.size(); ++j) {
        const double gap = levels[j + 1] - levels[j];
        if (gap < 0.0) throw std::invalid_argument("levels not sorted");
        s[j] = c * gap;
    }
    return s;
}

std::vector<double> window_spacings(std::span<const double> levels, std::size_t in_window, double c) {
    if (in_window > levels.size()) throw std::invalid_argument("window count exceeds level count");
    std::vector<double> s;
    for (std::size_t j = 0; j < in_window && j + 1 < levels.size(); ++j) s.push_back(c * (levels[j + 1] - levels[j]));
    return s;
}

double dls_statistic(const EmpiricalDistribution& emp, const SurvivalFunction& reference) {
    double sup = std::abs(emp.survival(0.0) - reference(0.0));
    const auto& v = emp.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0 && v[i] == v[i - 1]) continue;
        const double r = reference(v[i]);
        sup = std::max({sup, std::abs(emp.survival(v[i]) - r), std::abs(emp.survival_after(v[i]) - r)});
    }
    return sup;
}

double sup_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    std::vector<double> points;
    points.reserve(a.size() + b.size() + 1);
    points.push_back(0.0);
    points.insert(points.end(), a.values().begin(), a.values().end());
    points.insert(points.end(), b.values().begin(), b.values().end());
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    double sup = 0.0;
    for (double t : points)
        sup = std::max({sup, std::abs(a.survival(t) - b.survival(t)),
                        std::abs(a.survival_after(t) - b.survival_after(t))});
    return sup;
}

// ---------------------------------------------------------------------------

GLimit::GLimit(const DosTable& table, Interval j) {
    if (!(j.hi > j.lo)) throw std::invalid_argument("macroscopic window must have positive width");
    const auto r = table.range();
    if (j.lo < r.lo || j.hi > r.hi) throw std::out_of_range("outside calibrated range");
    nodes_.push_back(j.lo);
    for (double e : table.energy)
        if (e > j.lo && e < j.hi) nodes_.push_back(e);
    nodes_.push_back(j.hi);
    std::vector<double> nu(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) nu[k] = table.density_interpolated(nodes_[k]);
    double mass = 0.0;
    for (std::size_t k = 1; k < nodes_.size(); ++k) mass += 0.5 * (nu[k] + nu[k - 1]) * (nodes_[k] - nodes_[k - 1]);
    if (!(mass > 0.0)) throw std::invalid_argument("interval has zero mass under the table");
    rates_.resize(nu.size());
    for (std::size_t k = 0; k < nu.size(); ++k) rates_[k] = nu[k] / mass;
}

double GLimit::operator()(double x) const {
    double s = 0.0;
    double prev = rates_[0] * std::exp(-rates_[0] * x);
    for (std::size_t k = 1; k < nodes_.size(); ++k) {
        const double cur = rates_[k] * std::exp(-rates_[k] * x);
        s += 0.5 * (prev + cur) * (nodes_[k] - nodes_[k - 1]);
        prev = cur;
    }
    return s;
}

double GLimit::min_rate() const { return *std::min_element(rates_.begin(), rates_.end()); }
double GLimit::max_rate() const { return *std::max_element(rates_.begin(), rates_.end()); }

double g_limit(const DosTable& table, Interval j, double x) { return GLimit(table, j)(x); }

std::string to_string(SpacingMode m) { return m == SpacingMode::local ? "local" : "macro"; }
std::string to_string(Normalization n) { return n == Normalization::local ? "local" : "remark"; }

SpacingMode spacing_mode_from_string(const std::string& s) {
    if (s == "local") return SpacingMode::local;
    if (s == "macro") return SpacingMode::macro;
    throw std::invalid_argument("unknown spacing mode: " + s);
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "local") return Normalization::local;
    if (s == "remark") return Normalization::remark;
    throw std::invalid_argument("unknown normalization: " + s);
}

SurvivalFunction dls_reference(const DosTable& table, const DlsSettings& settings) {
    if (settings.mode == SpacingMode::local) return [](double x) { return std::exp(-x); };
    return GLimit(table, settings.j);
}

DlsReport dls_experiment(const ModelParams& model, const DosTable& table, const DlsSettings& settings,
                         const RunOptions& run) {
    DlsReport rep;
    const double volume = double(model.box().volume());
    if (settings.mode == SpacingMode::local) {
        rep.nu = reference_density(table, settings.e0, settings.bandwidth);
        if (!rep.nu.stable)
            rep.warnings.push_back("reference density changes by more than 5% under bandwidth doubling");
        const double w = settings.width > 0.0 ? settings.width : std::pow(volume, -settings.width_exponent);
        rep.window = {settings.e0 - 0.5 * w, settings.e0 + 0.5 * w};
        rep.mass = interval_mass(table, rep.window);
        rep.window_density = rep.mass / w;
        rep.constant = settings.normalization == Normalization::local ? volume * rep.nu.value
                                                                      : volume * rep.window_density;
    } else {
        if (settings.normalization == Normalization::remark)
            throw std::invalid_argument("the alternative normalization applies to local mode only");
        rep.window = settings.j;
        rep.mass = interval_mass(table, rep.window);
        rep.window_density = rep.mass / rep.window.width();
        rep.constant = volume * rep.mass;
    }
    if (!(rep.constant > 0.0)) throw std::invalid_argument("density nonpositive at reference energy");
    const auto reference = dls_reference(table, settings);

    auto results = map_realizations(run, [&](std::size_t, std::uint64_t seed) {
        const auto h = model.hamiltonian(seed);
        const auto lv = SpectrumSlicer(h).levels_in_window(rep.window, 1);
        if (lv.in_window < 2) return std::vector<double>{};
        return window_spacings(lv.values, lv.in_window, rep.constant);
    });
    for (const auto& s : results.results) {
        if (s.empty()) ++rep.skipped;
        rep.per_realization.push_back(s.size());
        rep.spacings.insert(rep.spacings.end(), s.begin(), s.end());
    }
    rep.records = std::move(results.records);
    if (rep.skipped > 0)
        rep.warnings.push_back(std::to_string(rep.skipped) + " realizations had fewer than 2 levels in the window");
    if (rep.spacings.empty()) throw std::runtime_error("no spacings collected");
    rep.sup_distance = dls_statistic(EmpiricalDistribution(rep.spacings), reference);
    return rep;
}

}  // namespace anderson
