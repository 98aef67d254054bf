#include "anderson/centers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace anderson {

namespace {

bool half_open(const Interval& iv, double x) { return iv.lo <= x && x < iv.hi; }

bool overlap_open(const Interval& a, const Interval& b) { return a.lo < b.hi && b.lo < a.hi; }

std::vector<double> rescaled_coords(std::size_t site, const LatticeBox& box, double ell) {
    const auto c = box.coords_of(site);
    std::vector<double> x(c.size());
    for (std::size_t a = 0; a < c.size(); ++a) x[a] = double(c[a]) / ell;
    return x;
}

void require_vectors(const SpectralData& s) {
    if (s.count() > 0 && !s.has_vectors()) throw std::invalid_argument("missing eigenvectors");
}

}  // namespace

LocalizationCenter localization_center(std::span<const double> v, const LatticeBox& box, std::size_t index) {
    if (v.size() != box.volume()) throw std::invalid_argument("vector length does not match the box");
    double norm2 = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        norm2 += v[i] * v[i];
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (norm2 == 0.0) throw std::invalid_argument("zero vector");
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-10) throw std::invalid_argument("vector not normalized");
    return {index, arg, box.coords_of(arg), std::abs(v[arg])};
}

int center_cloud_diameter(std::span<const double> v, const LatticeBox& box, double tau) {
    if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in [0, 1)");
    if (v.size() != box.volume()) throw std::invalid_argument("vector length does not match the box");
    double peak = 0.0;
    for (double x : v) peak = std::max(peak, std::abs(x));
    if (peak == 0.0) throw std::invalid_argument("zero vector");
    const double cut = (1.0 - tau) * peak;
    std::vector<std::size_t> cloud;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) >= cut) cloud.push_back(i);
    int diam = 0;
    for (std::size_t a = 0; a < cloud.size(); ++a)
        for (std::size_t b = a + 1; b < cloud.size(); ++b) diam = std::max(diam, box.torus_distance(cloud[a], cloud[b]));
    return diam;
}

std::vector<JointPoint> joint_points(const SpectralData& pairs, double e0, double nu0, double ell,
                                     const LatticeBox& box, std::vector<std::string>* warnings) {
    require_vectors(pairs);
    if (!(nu0 > 0.0)) throw std::invalid_argument("density nonpositive at reference energy");
    if (!(ell > 0.0)) throw std::invalid_argument("scale must be positive");
    if (warnings) {
        const double logv = std::log(double(box.volume()));
        if (ell <= 5.0 * logv || ell > double(box.side())) {
            std::ostringstream m;
            m << "scale " << ell << " outside (5 log|L|, M] = (" << 5.0 * logv << ", " << box.side() << "]";
            warnings->push_back(m.str());
        }
    }
    const double energy_scale = nu0 * std::pow(ell, box.dim());
    std::vector<JointPoint> out;
    for (std::size_t k = 0; k < pairs.count(); ++k) {
        const auto c = localization_center(pairs.vector(k), box, pairs.indices.empty() ? k : pairs.indices[k]);
        out.push_back({c.index, energy_scale * (pairs.values[k] - e0), rescaled_coords(c.site, box, ell)});
    }
    return out;
}

double ProductBox::measure() const {
    double m = energy.width();
    for (const auto& side : cube) m *= side.width();
    return m;
}

bool ProductBox::contains(const JointPoint& p) const {
    if (p.x.size() != cube.size()) throw std::invalid_argument("box dimension does not match the point");
    if (!half_open(energy, p.xi)) return false;
    for (std::size_t a = 0; a < cube.size(); ++a)
        if (!half_open(cube[a], p.x[a])) return false;
    return true;
}

void check_boxes_disjoint(std::span<const ProductBox> boxes) {
    for (const auto& b : boxes) {
        if (b.energy.lo > b.energy.hi) throw std::invalid_argument("interval with lo > hi");
        for (const auto& s : b.cube)
            if (s.lo > s.hi) throw std::invalid_argument("interval with lo > hi");
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            const auto &a = boxes[i], &b = boxes[j];
            if (a.cube.size() != b.cube.size()) throw std::invalid_argument("boxes of different dimension");
            bool meet = overlap_open(a.energy, b.energy);
            for (std::size_t k = 0; meet && k < a.cube.size(); ++k) meet = overlap_open(a.cube[k], b.cube[k]);
            if (meet) throw std::invalid_argument("boxes overlap");
        }
    }
}

std::vector<std::size_t> product_box_counts(std::span<const JointPoint> points, std::span<const ProductBox> boxes) {
    check_boxes_disjoint(boxes);
    std::vector<std::size_t> counts(boxes.size(), 0);
    for (const auto& p : points)
        for (std::size_t b = 0; b < boxes.size(); ++b)
            if (boxes[b].contains(p)) ++counts[b];
    return counts;
}

NoncovariantCount noncovariant_count(const SpectralData& pairs, double e0, double nu0,
                                     const NoncovariantScales& s, const LatticeBox& box) {
    require_vectors(pairs);
    if (!(s.ell > 0.0 && s.ell_prime > 0.0 && s.ell_tilde > 0.0)) throw std::invalid_argument("scales must be positive");
    if (s.c.size() != std::size_t(box.dim())) throw std::invalid_argument("spatial box dimension does not match the lattice");
    const double energy_scale = nu0 * std::pow(s.ell, box.dim());
    NoncovariantCount out;
    for (std::size_t k = 0; k < pairs.count(); ++k) {
        if (!s.j.contains(energy_scale * (pairs.values[k] - e0))) continue;
        const auto c = localization_center(pairs.vector(k), box);
        const auto x = rescaled_coords(c.site, box, s.ell_tilde);
        bool inside = true;
        for (std::size_t a = 0; a < x.size(); ++a) inside = inside && half_open(s.c[a], x[a]);
        if (inside) ++out.raw;
    }
    out.normalized = std::pow(s.ell / s.ell_tilde, box.dim()) * double(out.raw);
    return out;
}

std::vector<double> center_spacings(std::span<const std::size_t> sites, double nu0, double width,
                                    const LatticeBox& box) {
    if (!(nu0 > 0.0 && width > 0.0)) throw std::invalid_argument("normalization must be positive");
    std::vector<double> s;
    if (sites.size() < 2) return s;
    const double scale = std::pow(nu0 * width, 1.0 / double(box.dim()));
    s.reserve(sites.size());
    for (std::size_t j = 0; j < sites.size(); ++j) {
        int best = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i < sites.size(); ++i)
            if (i != j) best = std::min(best, box.torus_distance(sites[i], sites[j]));
        s.push_back(double(best) * scale);
    }
    return s;
}

std::vector<double> poisson_center_spacings(std::mt19937_64& engine, double nu0, double width,
                                            const LatticeBox& box) {
    const std::size_t n = box.volume();
    const std::size_t k = poisson_sample(engine, nu0 * width * double(n));
    std::vector<std::size_t> sites(k);
    for (auto& s : sites) s = std::min(n - 1, std::size_t(unit_uniform(engine) * double(n)));
    return center_spacings(sites, nu0, width, box);
}

// ---------------------------------------------------------------------------

CentersReport centers_experiment(const ModelParams& model, const CentersSettings& settings, const RunOptions& run) {
    if (!(settings.tau >= 0.0 && settings.tau < 1.0)) throw std::invalid_argument("tau must lie in [0, 1)");
    const auto box = model.box();
    auto results = map_realizations(run, [&](std::size_t r, std::uint64_t seed) {
        const auto h = model.hamiltonian(seed);
        const auto pairs = eigenpairs_in_window(h, settings.window);
        std::vector<CenterRecord> recs;
        for (std::size_t k = 0; k < pairs.count(); ++k) {
            CenterRecord c;
            c.realization = r;
            c.index = pairs.indices[k];
            c.energy = pairs.values[k];
            c.center = localization_center(pairs.vector(k), box, c.index);
            c.diameter = center_cloud_diameter(pairs.vector(k), box, settings.tau);
            recs.push_back(std::move(c));
        }
        return recs;
    });
    CentersReport rep;
    std::vector<double> diam;
    for (auto& recs : results.results)
        for (auto& c : recs) {
            diam.push_back(double(c.diameter));
            rep.centers.push_back(std::move(c));
        }
    if (!diam.empty()) rep.median_diameter = percentile(diam, 0.5);
    rep.records = std::move(results.records);
    return rep;
}

JointReport joint_experiment(const ModelParams& model, const DosTable& table, const JointSettings& settings,
                             const RunOptions& run) {
    const auto box = model.box();
    JointReport rep;
    rep.nu = reference_density(table, settings.e0, settings.bandwidth);
    const double nu0 = rep.nu.value;
    rep.ell = settings.ell > 0.0 ? settings.ell : double(box.side());
    rep.side_ratio = double(box.side()) / rep.ell;
    check_boxes_disjoint(settings.boxes);
    for (const auto& b : settings.boxes)
        if (b.cube.size() != std::size_t(box.dim())) throw std::invalid_argument("spatial box dimension does not match the lattice");

    // One eigenpair window covering every energy range asked for.
    double reach = 0.0;
    const double scale = nu0 * std::pow(rep.ell, box.dim());
    for (const auto& b : settings.boxes)
        reach = std::max({reach, std::abs(b.energy.lo) / scale, std::abs(b.energy.hi) / scale});
    for (const auto& s : settings.noncovariant) {
        const double sc = nu0 * std::pow(s.ell, box.dim());
        reach = std::max({reach, std::abs(s.j.lo) / sc, std::abs(s.j.hi) / sc});
        if (s.ell_tilde > double(box.side()))
            rep.warnings.push_back("spatial scale exceeds the box side");
    }
    const Interval window{settings.e0 - reach, settings.e0 + reach};
    std::vector<std::string> scale_warnings;
    joint_points(SpectralData{}, settings.e0, nu0, rep.ell, box, &scale_warnings);
    rep.warnings.insert(rep.warnings.end(), scale_warnings.begin(), scale_warnings.end());

    struct Outcome {
        CountSample sample;
        std::vector<NoncovariantCount> nc;
    };
    auto results = map_realizations(run, [&](std::size_t, std::uint64_t seed) {
        const auto h = model.hamiltonian(seed);
        const auto pairs = eigenpairs_in_window(h, window);
        Outcome o;
        o.sample.seed = seed;
        if (!settings.boxes.empty())
            o.sample.counts = product_box_counts(joint_points(pairs, settings.e0, nu0, rep.ell, box), settings.boxes);
        for (const auto& s : settings.noncovariant) o.nc.push_back(noncovariant_count(pairs, settings.e0, nu0, s, box));
        return o;
    });
    rep.records = std::move(results.records);

    for (auto& o : results.results) rep.samples.push_back(o.sample);
    if (!settings.boxes.empty()) {
        std::vector<double> means;
        for (const auto& b : settings.boxes) means.push_back(b.measure());
        rep.test = count_distribution_test(rep.samples, means, stream_seed(run.master_seed, stream::calibration),
                                           settings.calibration_repetitions);
    }
    for (std::size_t k = 0; k < settings.noncovariant.size(); ++k) {
        NoncovariantSummary sum;
        sum.scales = settings.noncovariant[k];
        sum.target = sum.scales.j.width();
        for (const auto& side : sum.scales.c) sum.target *= side.width();
        sum.regime_ratio = sum.scales.ell_tilde / sum.scales.ell_prime;
        std::size_t zeros = 0;
        double total = 0.0;
        for (const auto& o : results.results) {
            sum.counts.push_back(o.nc[k]);
            if (o.nc[k].raw == 0) ++zeros;
            total += o.nc[k].normalized;
        }
        const double n = double(results.results.size());
        sum.zero_fraction = n > 0 ? double(zeros) / n : 0.0;
        sum.mean_normalized = n > 0 ? total / n : 0.0;
        rep.noncovariant.push_back(std::move(sum));
    }
    return rep;
}

DcsReport dcs_experiment(const ModelParams& model, const DosTable& table, const DcsSettings& settings,
                         const RunOptions& run) {
    const auto box = model.box();
    DcsReport rep;
    rep.nu = reference_density(table, settings.e0, settings.bandwidth);
    const double nu0 = rep.nu.value;
    const double logv = std::log(double(box.volume()));
    const double width = settings.width > 0.0 ? settings.width : std::pow(logv, -double(box.dim()));
    if (width > std::pow(logv, -double(box.dim())))
        rep.warnings.push_back("window wider than 1/log^d|L|");
    rep.window = {settings.e0 - 0.5 * width, settings.e0 + 0.5 * width};
    rep.intensity = nu0 * width;

    auto results = map_realizations(run, [&](std::size_t, std::uint64_t seed) {
        const auto h = model.hamiltonian(seed);
        const auto pairs = eigenpairs_in_window(h, rep.window);
        std::vector<std::size_t> sites;
        for (std::size_t k = 0; k < pairs.count(); ++k) sites.push_back(localization_center(pairs.vector(k), box).site);
        return sites;
    });
    rep.records = std::move(results.records);
    for (const auto& sites : results.results) {
        rep.centers_per_realization.push_back(sites.size());
        if (sites.size() < 2) {
            ++rep.skipped;
            continue;
        }
        const auto s = center_spacings(sites, nu0, width, box);
        rep.spacings.insert(rep.spacings.end(), s.begin(), s.end());
    }
    if (rep.skipped > 0)
        rep.warnings.push_back(std::to_string(rep.skipped) + " realizations had fewer than 2 centers in the window");

    rep.oracle_realizations = settings.oracle_factor * run.realizations;
    std::mt19937_64 engine(stream_seed(run.master_seed, stream::oracle));
    for (std::size_t r = 0; r < rep.oracle_realizations; ++r) {
        const auto s = poisson_center_spacings(engine, nu0, width, box);
        rep.oracle_spacings.insert(rep.oracle_spacings.end(), s.begin(), s.end());
    }
    if (rep.spacings.empty() || rep.oracle_spacings.empty()) throw std::runtime_error("no center spacings collected");
    const EmpiricalDistribution emp(rep.spacings);
    rep.sup_oracle = sup_distance(emp, EmpiricalDistribution(rep.oracle_spacings));
    const double d = double(box.dim());
    rep.sup_limit = dls_statistic(emp, [d](double s) { return std::exp(-std::pow(s, d)); });
    return rep;
}

}  // namespace anderson
