#include "anderson/pointproc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace anderson {

namespace {

std::vector<std::vector<double>> poisson_marginals(std::span<const double> means,
                                                   const std::vector<std::size_t>& kmax) {
    std::vector<std::vector<double>> m(means.size());
    for (std::size_t a = 0; a < means.size(); ++a)
        for (std::size_t k = 0; k <= kmax[a]; ++k) m[a].push_back(poisson_pmf(means[a], k));
    return m;
}

std::vector<std::size_t> truncations(std::span<const double> means) {
    std::vector<std::size_t> kmax;
    for (double mu : means) {
        if (!(mu >= 0.0)) throw std::invalid_argument("poisson mean must be nonnegative");
        kmax.push_back(poisson_truncation(mu));
    }
    return kmax;
}

std::vector<std::vector<double>> empirical_marginals(std::span<const CountSample> samples,
                                                     const std::vector<std::size_t>& kmax) {
    std::vector<std::vector<double>> m(kmax.size());
    for (std::size_t a = 0; a < kmax.size(); ++a) {
        m[a].assign(kmax[a] + 1, 0.0);
        for (const auto& s : samples)
            if (s.counts[a] <= kmax[a]) m[a][s.counts[a]] += 1.0;
        for (double& p : m[a]) p /= double(samples.size());
    }
    return m;
}

std::vector<double> joint_pmf(std::span<const CountSample> samples, const std::vector<std::size_t>& kmax) {
    CountTable t(kmax);
    for (const auto& s : samples) t.add(s.counts);
    return t.pmf();
}

std::vector<CountSample> simulate_poisson(std::mt19937_64& engine, std::span<const double> means,
                                          std::size_t count) {
    std::vector<CountSample> out(count);
    for (auto& s : out) {
        s.counts.resize(means.size());
        for (std::size_t a = 0; a < means.size(); ++a) s.counts[a] = poisson_sample(engine, means[a]);
    }
    return out;
}

double independence_distance(std::span<const CountSample> samples, const std::vector<std::size_t>& kmax) {
    CountTable layout(kmax);
    return total_variation(joint_pmf(samples, kmax), layout.product_law(empirical_marginals(samples, kmax)));
}

Interval preimage(Interval u, double e0, double scale) {
    return {e0 + u.lo / scale, e0 + u.hi / scale};
}

}  // namespace

RescaledConfiguration rescale_levels(std::span<const double> levels, double e0, double nu0,
                                     std::size_t volume) {
    if (!(nu0 > 0.0)) throw std::invalid_argument("density nonpositive at reference energy");
    if (volume < 1) throw std::invalid_argument("volume must be positive");
    RescaledConfiguration c;
    c.reference_energy = e0;
    c.nu0 = nu0;
    c.volume = volume;
    const double scale = double(volume) * nu0;
    c.points.reserve(levels.size());
    for (double e : levels) c.points.push_back(scale * (e - e0));
    if (!std::is_sorted(c.points.begin(), c.points.end())) throw std::invalid_argument("levels not sorted");
    return c;
}

std::vector<double> restore_levels(const RescaledConfiguration& c) {
    const double scale = double(c.volume) * c.nu0;
    std::vector<double> e;
    e.reserve(c.points.size());
    for (double x : c.points) e.push_back(c.reference_energy + x / scale);
    return e;
}

double window_density(const DosTable& table, Interval window) {
    if (!(window.width() > 0.0)) throw std::invalid_argument("window must have positive width");
    return interval_mass(table, window) / window.width();
}

DensityEstimate reference_density(const DosTable& table, double e0, double h) {
    if (h <= 0.0) h = double(std::max<std::size_t>(2, table.meta.bandwidth_steps)) * table.step();
    auto d = density_estimate(table, e0, h);
    if (!(d.value > 0.0)) throw std::invalid_argument("density nonpositive at reference energy");
    return d;
}

void ScaleSpec::validate(int dim) const {
    const double lower = double(dim) / double(dim + 2);
    if (!(beta > lower && beta < 1.0)) {
        std::ostringstream msg;
        msg << "inadmissible exponent: beta must lie in (" << lower << ", 1)";
        throw std::invalid_argument(msg.str());
    }
    if (!(delta > 0.0)) throw std::invalid_argument("inadmissible exponent: delta must be positive");
}

AdmissibleWindow admissible_window(double e0, double beta, std::size_t volume, int dim) {
    ScaleSpec{beta, 1.0}.validate(dim);
    const double v = double(volume);
    const double half = std::pow(v, -beta);
    const double reach = std::pow(v, 1.0 - beta);
    return {{e0 - half, e0 + half}, {-reach, reach}};
}

void check_disjoint(std::span<const Interval> intervals) {
    std::vector<Interval> sorted(intervals.begin(), intervals.end());
    for (const auto& iv : sorted)
        if (iv.lo > iv.hi) throw std::invalid_argument("interval with lo > hi");
    std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].lo < sorted[i - 1].hi) throw std::invalid_argument("intervals not disjoint");
}

CountSample interval_counts(const RescaledConfiguration& config, std::span<const Interval> intervals) {
    check_disjoint(intervals);
    CountSample s;
    const auto& p = config.points;
    for (const auto& iv : intervals) {
        auto first = std::lower_bound(p.begin(), p.end(), iv.lo);
        auto last = std::upper_bound(p.begin(), p.end(), iv.hi);
        s.counts.push_back(std::size_t(std::max<std::ptrdiff_t>(0, last - first)));
    }
    return s;
}

std::vector<std::string> interval_warnings(std::span<const Interval> intervals, std::size_t volume,
                                           const ScaleSpec& scale) {
    std::vector<std::string> w;
    const double v = double(volume);
    const double reach = std::pow(v, 1.0 - scale.beta);
    const double gap = std::exp(-std::pow(v, scale.delta));
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i].lo < -reach || intervals[i].hi > reach) {
            std::ostringstream m;
            m << "interval " << i << " leaves the admissible rescaled range [-" << reach << ", " << reach << "]";
            w.push_back(m.str());
        }
        for (std::size_t j = i + 1; j < intervals.size(); ++j) {
            const double d = std::max(intervals[j].lo - intervals[i].hi, intervals[i].lo - intervals[j].hi);
            if (d < gap) {
                std::ostringstream m;
                m << "intervals " << i << " and " << j << " are closer than exp(-volume^delta) = " << gap;
                w.push_back(m.str());
            }
        }
    }
    return w;
}

CountTestReport count_distribution_test(std::span<const CountSample> samples, std::span<const double> means,
                                        std::uint64_t calibration_seed, std::size_t repetitions) {
    if (samples.size() < 100) throw std::invalid_argument("count test needs at least 100 samples");
    for (const auto& s : samples)
        if (s.counts.size() != means.size()) throw std::invalid_argument("count sample has wrong length");
    CountTestReport r;
    r.means.assign(means.begin(), means.end());
    r.kmax = truncations(means);
    r.samples = samples.size();

    CountTable layout(r.kmax);
    r.empirical = joint_pmf(samples, r.kmax);
    r.reference = layout.product_law(poisson_marginals(means, r.kmax));
    r.tv = total_variation(r.empirical, r.reference);

    for (std::size_t a = 0; a < means.size(); ++a) {
        CountTable one({r.kmax[a]});
        for (const auto& s : samples) one.add(std::span<const std::size_t>(&s.counts[a], 1));
        const auto ref = one.product_law({poisson_marginals(means.subspan(a, 1), {r.kmax[a]})[0]});
        r.marginal_tv.push_back(total_variation(one.pmf(), ref));
    }

    const std::size_t n = samples.size();
    r.calibration = calibrate(repetitions, calibration_seed, [&](std::mt19937_64& engine) {
        const auto sim = simulate_poisson(engine, means, n);
        return total_variation(joint_pmf(sim, r.kmax), r.reference);
    });
    return r;
}

IndependenceReport independence_test(std::span<const CountSample> samples, std::span<const double> means,
                                     std::uint64_t calibration_seed, std::size_t repetitions) {
    if (means.size() != 2) throw std::invalid_argument("independence test takes two axes");
    if (samples.size() < 100) throw std::invalid_argument("count test needs at least 100 samples");
    for (const auto& s : samples)
        if (s.counts.size() != 2) throw std::invalid_argument("count sample has wrong length");
    IndependenceReport r;
    r.kmax = truncations(means);
    r.samples = samples.size();
    CountTable layout(r.kmax);
    r.joint = joint_pmf(samples, r.kmax);
    r.product_of_marginals = layout.product_law(empirical_marginals(samples, r.kmax));
    r.product_poisson = layout.product_law(poisson_marginals(means, r.kmax));
    r.tv_independence = total_variation(r.joint, r.product_of_marginals);
    r.tv_poisson = total_variation(r.joint, r.product_poisson);

    const std::size_t n = samples.size();
    r.independence_calibration = calibrate(repetitions, calibration_seed, [&](std::mt19937_64& engine) {
        return independence_distance(simulate_poisson(engine, means, n), r.kmax);
    });
    r.poisson_calibration = calibrate(repetitions, derive_seed(calibration_seed, 1), [&](std::mt19937_64& engine) {
        return total_variation(joint_pmf(simulate_poisson(engine, means, n), r.kmax), r.product_poisson);
    });
    return r;
}

// ---------------------------------------------------------------------------

LevelStatsReport levelstats_experiment(const ModelParams& model, const DosTable& table,
                                       const LevelStatsSettings& settings, const RunOptions& run) {
    if (settings.check_scale) settings.scale.validate(model.dim);
    check_disjoint(settings.intervals);
    LevelStatsReport rep;
    rep.volume = model.box().volume();
    rep.nu = reference_density(table, settings.e0, settings.bandwidth);
    if (!rep.nu.stable) rep.warnings.push_back("reference density changes by more than 5% under bandwidth doubling");
    if (settings.check_scale) {
        auto w = interval_warnings(settings.intervals, rep.volume, settings.scale);
        rep.warnings.insert(rep.warnings.end(), w.begin(), w.end());
    }

    const double scale = double(rep.volume) * rep.nu.value;
    std::vector<Interval> windows;
    std::vector<double> means;
    for (const auto& u : settings.intervals) {
        windows.push_back(preimage(u, settings.e0, scale));
        means.push_back(u.width());
    }

    auto results = map_realizations(run, [&](std::size_t, std::uint64_t seed) {
        const auto h = model.hamiltonian(seed);
        const SpectrumSlicer slicer(h);
        CountSample s;
        s.seed = seed;
        for (const auto& w : windows) s.counts.push_back(slicer.count_in(w));
        return s;
    });
    rep.samples = std::move(results.results);
    rep.records = std::move(results.records);
    rep.test = count_distribution_test(rep.samples, means, stream_seed(run.master_seed, stream::calibration),
                                       settings.calibration_repetitions);
    return rep;
}

TwoEnergyReport two_energy_experiment(const ModelParams& model, const DosTable& table,
                                      const TwoEnergySettings& settings, const RunOptions& run) {
    TwoEnergyReport rep;
    rep.volume = model.box().volume();
    rep.nu = reference_density(table, settings.e0, settings.bandwidth);
    rep.nu_prime = reference_density(table, settings.e0_prime, settings.bandwidth);
    rep.divergence = double(rep.volume) * std::abs(settings.e0 - settings.e0_prime);
    if (rep.divergence < 100.0)
        rep.warnings.push_back("volume * |E0 - E0'| below 100: separation condition weakly met");

    const auto w_plus = preimage(settings.u_plus, settings.e0, double(rep.volume) * rep.nu.value);
    const auto w_minus = preimage(settings.u_minus, settings.e0_prime, double(rep.volume) * rep.nu_prime.value);

    auto results = map_realizations(run, [&](std::size_t, std::uint64_t seed) {
        const auto h = model.hamiltonian(seed);
        const SpectrumSlicer slicer(h);
        return CountSample{{slicer.count_in(w_plus), slicer.count_in(w_minus)}, seed};
    });
    rep.samples = std::move(results.results);
    rep.records = std::move(results.records);
    const std::vector<double> means{settings.u_plus.width(), settings.u_minus.width()};
    rep.test = independence_test(rep.samples, means, stream_seed(run.master_seed, stream::calibration),
                                 settings.calibration_repetitions);
    return rep;
}

double ldp_bound(double expected_count, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    return std::exp(-std::pow(expected_count, delta) / delta);
}

ConcentrationReport concentration_experiment(const ModelParams& model, const DosTable& table,
                                             const ConcentrationSettings& settings, const RunOptions& run) {
    for (double eps : settings.epsilons)
        if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (settings.half_sides.empty()) throw std::invalid_argument("concentration needs at least one box size");
    const double mass = interval_mass(table, settings.window);
    if (!(mass > 0.0)) throw std::invalid_argument("interval has zero mass under the table");

    ConcentrationReport rep;
    const double w = settings.window.width();
    rep.admissible = mass > std::min(w, w * w) || (w == 1.0 && mass >= 1.0);
    if (!rep.admissible) rep.warnings.push_back("N(I) >= |I|^(2-v) fails for every v in (0, 1)");

    auto sizes = settings.half_sides;
    std::sort(sizes.begin(), sizes.end());
    std::vector<std::size_t> volumes;
    for (int l : sizes) {
        ModelParams m = model;
        m.half_side = l;
        RunOptions r = run;
        r.master_seed = stream_seed(run.master_seed, std::uint64_t(l));
        auto results = map_realizations(r, [&](std::size_t, std::uint64_t seed) {
            const auto h = m.hamiltonian(seed);
            return count_in_interval(h, settings.window);
        });
        volumes.push_back(m.box().volume());
        rep.counts.push_back(std::move(results.results));
        rep.records.push_back(std::move(results.records));
    }

    for (double eps : settings.epsilons) {
        double previous = INFINITY;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            ConcentrationRow row;
            row.half_side = sizes[i];
            row.volume = volumes[i];
            row.epsilon = eps;
            row.mass = mass;
            row.expected = mass * double(volumes[i]);
            row.trials = rep.counts[i].size();
            for (std::size_t c : rep.counts[i])
                if (std::abs(double(c) - row.expected) >= eps * row.expected) ++row.exceed;
            row.probability = row.trials ? double(row.exceed) / double(row.trials) : 0.0;
            row.ci = wilson_interval(row.exceed, row.trials);
            row.ldp_bound = ldp_bound(row.expected, settings.ldp_delta);
            if (row.probability > previous) rep.nonincreasing = false;
            previous = row.probability;
            rep.rows.push_back(row);
        }
    }
    return rep;
}

}  // namespace anderson
