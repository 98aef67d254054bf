#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "anderson/pointproc.hpp"

using namespace anderson;

namespace {

ModelParams chain(int half_side, double coupling) {
    ModelParams m;
    m.dim = 1;
    m.half_side = half_side;
    m.disorder = DisorderSpec::uniform(-0.5, 0.5, coupling);
    return m;
}

std::vector<CountSample> poisson_samples(std::size_t n, std::vector<double> means, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<CountSample> out(n);
    for (auto& s : out)
        for (double m : means) s.counts.push_back(poisson_sample(rng, m));
    return out;
}

}  // namespace

TEST_CASE("rescaling arithmetic") {
    const std::vector<double> levels{0.1, 0.2};
    const auto c = rescale_levels(levels, 0.1, 0.5, 100);
    REQUIRE(c.points.size() == 2);
    CHECK(c.points[0] == 0.0);
    CHECK(c.points[1] == doctest::Approx(5.0).epsilon(1e-14));
    CHECK_THROWS_WITH(rescale_levels(levels, 0.1, 0.0, 100), "density nonpositive at reference energy");
    CHECK_THROWS_WITH(rescale_levels(levels, 0.1, -1.0, 100), "density nonpositive at reference energy");
}

TEST_CASE("rescaling is shift equivariant and invertible") {
    std::mt19937_64 rng(2);
    std::vector<double> levels(50);
    for (auto& v : levels) v = 4.0 * unit_uniform(rng) - 2.0;
    std::sort(levels.begin(), levels.end());
    const double t = 0.37, nu0 = 0.13;
    const std::size_t volume = 1001;
    const auto a = rescale_levels(levels, 0.2, nu0, volume);
    auto shifted = levels;
    for (auto& v : shifted) v += t;
    const auto b = rescale_levels(shifted, 0.2, nu0, volume);
    for (std::size_t j = 0; j < levels.size(); ++j) {
        CHECK(b.points[j] - a.points[j] == doctest::Approx(double(volume) * nu0 * t).epsilon(1e-11));
    }
    const auto back = restore_levels(a);
    for (std::size_t j = 0; j < levels.size(); ++j) CHECK(std::abs(back[j] - levels[j]) <= 1e-12 * std::abs(levels[j]) + 1e-15);
}

TEST_CASE("alternative normalization scales points by the ratio of constants") {
    const std::vector<double> levels{-0.01, 0.003, 0.02};
    const double nu0 = 0.15, alt = 0.18;
    const auto a = rescale_levels(levels, 0.0, nu0, 501);
    const auto b = rescale_levels(levels, 0.0, alt, 501);
    for (std::size_t j = 0; j < levels.size(); ++j) CHECK(b.points[j] == doctest::Approx(a.points[j] * alt / nu0));
}

TEST_CASE("admissible window") {
    const auto w = admissible_window(0.0, 0.5, 10000, 1);
    CHECK(w.energy.width() == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(w.rescaled.lo == doctest::Approx(-100.0));
    CHECK(w.rescaled.hi == doctest::Approx(100.0));
    CHECK_THROWS_WITH(admissible_window(0.0, 1.0 / 3.0, 10000, 1),
                      doctest::Contains("inadmissible exponent"));
    CHECK_THROWS_WITH(admissible_window(0.0, 0.5, 10000, 2), doctest::Contains("inadmissible exponent"));
    const auto near_one = admissible_window(0.0, 0.999999, 10000, 1);
    CHECK(near_one.rescaled.hi == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("interval counts") {
    RescaledConfiguration c;
    c.points = {-0.5, 0.2, 3.0};
    const std::vector<Interval> two{{-1.0, 0.0}, {0.1, 1.0}};
    CHECK(interval_counts(c, two).counts == std::vector<std::size_t>{1, 1});

    RescaledConfiguration empty;
    CHECK(interval_counts(empty, two).counts == std::vector<std::size_t>{0, 0});

    RescaledConfiguration r;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) r.points.push_back(2.0 * unit_uniform(rng));
    std::sort(r.points.begin(), r.points.end());
    const std::vector<Interval> halves{{0.0, 1.0}, {1.0, 2.0}};
    const std::vector<Interval> whole{{0.0, 2.0}};
    const auto h = interval_counts(r, halves).counts;
    CHECK(h[0] + h[1] == interval_counts(r, whole).counts[0]);

    const std::vector<Interval> overlap{{0.0, 1.0}, {0.5, 2.0}};
    CHECK_THROWS_WITH(interval_counts(r, overlap), "intervals not disjoint");
}

TEST_CASE("separation and range warnings are not fatal") {
    ScaleSpec s;
    const std::vector<Interval> far{{-1.0, 0.0}, {0.5, 1.0}};
    CHECK(interval_warnings(far, 100, s).empty());
    const std::vector<Interval> touching{{-1.0, 0.0}, {0.0, 1.0}};
    CHECK(!interval_warnings(touching, 100, s).empty());
    const std::vector<Interval> wide{{-50.0, 50.0}};
    CHECK(!interval_warnings(wide, 100, s).empty());
}

TEST_CASE("degenerate empirical law has total variation 1 - e^-2") {
    const std::vector<CountSample> zeros(500, CountSample{{0}, 0});
    const std::vector<double> means{2.0};
    const auto rep = count_distribution_test(zeros, means, 1);
    CHECK(rep.tv == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
    CHECK(rep.tv == doctest::Approx(0.8647).epsilon(1e-4));
    CHECK(rep.samples == 500);
    CHECK_THROWS(count_distribution_test(std::vector<CountSample>(99, CountSample{{0}, 0}), means, 1));
}

TEST_CASE("genuine Poisson counts pass their own calibration") {
    const std::vector<double> means{2.0};
    const auto samples = poisson_samples(2000, means, 99);
    const auto rep = count_distribution_test(samples, means, 5);
    CHECK(rep.tv <= rep.calibration.threshold);
    CHECK(rep.calibration.repetitions == 200);
    CHECK(rep.kmax == std::vector<std::size_t>{poisson_truncation(2.0)});
    double mass = 0.0;
    for (double p : rep.reference) mass += p;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two independent Poisson streams look independent") {
    const std::vector<double> means{1.0, 1.0};
    const auto samples = poisson_samples(2000, means, 17);
    const auto rep = independence_test(samples, means, 3);
    CHECK(rep.tv_independence <= rep.independence_calibration.threshold);
    CHECK(rep.tv_poisson <= rep.poisson_calibration.threshold);
    // limit value of the joint law at (0, 0)
    CHECK(poisson_reference(means, std::vector<std::size_t>{0, 0}) == doctest::Approx(0.1353).epsilon(1e-4));
}

TEST_CASE("diagonal law against the product of its marginals") {
    // k+ = k- always, mean 2
    std::mt19937_64 rng(8);
    std::vector<CountSample> samples(20000);
    for (auto& s : samples) {
        const auto k = poisson_sample(rng, 2.0);
        s.counts = {k, k};
    }
    const std::vector<double> means{2.0, 2.0};
    const auto rep = independence_test(samples, means, 1, 20);

    // brute force on the same truncated cells
    const std::size_t K = poisson_truncation(2.0);
    std::map<std::size_t, double> marginal;  // K + 1 stands for overflow
    for (const auto& s : samples) marginal[std::min(s.counts[0], K + 1)] += 1.0 / double(samples.size());
    double tv = 0.0, overflow_joint = 0.0, overflow_product = 0.0;
    for (std::size_t i = 0; i <= K + 1; ++i)
        for (std::size_t j = 0; j <= K + 1; ++j) {
            const double joint = i == j ? marginal[i] : 0.0;
            const double prod = marginal[i] * marginal[j];
            if (i > K || j > K) {
                overflow_joint += joint;
                overflow_product += prod;
            } else {
                tv += std::abs(joint - prod);
            }
        }
    tv = 0.5 * (tv + std::abs(overflow_joint - overflow_product));
    CHECK(rep.tv_independence == doctest::Approx(tv).epsilon(1e-12));

    // exact law: 1 - sum_k p_k^2 = 1 - e^-4 I0(4)
    const double i0_4 = 11.301921952136330;
    CHECK(std::abs(rep.tv_independence - (1.0 - std::exp(-4.0) * i0_4)) < 0.02);
}

TEST_CASE("large deviation bound arithmetic") {
    CHECK(ldp_bound(100.0, 0.5) == doctest::Approx(std::exp(-20.0)).epsilon(1e-12));
}

TEST_CASE("concentration over the full envelope never exceeds") {
    const auto model = chain(40, 5.0);
    const auto table = estimate_dos(model, default_grid(model.disorder, 1, 201), {20, 0, 1});
    ConcentrationSettings s;
    s.window = table.range();
    s.epsilons = {1.0};
    s.half_sides = {20, 40};
    const auto rep = concentration_experiment(model, table, s, {30, 1, 1});
    REQUIRE(rep.rows.size() == 2);
    for (const auto& r : rep.rows) {
        CHECK(r.probability == 0.0);
        CHECK(r.trials == 30);
        CHECK(r.ci.lo == 0.0);
    }
    CHECK(rep.nonincreasing);
}

TEST_CASE("levelstats is independent of the worker count") {
    const auto model = chain(100, 5.0);
    const auto table = estimate_dos(model, default_grid(model.disorder, 1, 401), {30, 0, 1});
    LevelStatsSettings s;
    s.intervals = {{-1.0, 0.0}, {0.0, 1.0}};
    s.calibration_repetitions = 20;
    const auto a = levelstats_experiment(model, table, s, {120, 42, 1});
    const auto b = levelstats_experiment(model, table, s, {120, 42, 3});
    CHECK(a.test.tv == b.test.tv);
    CHECK(a.test.empirical == b.test.empirical);
    CHECK(a.test.calibration.threshold == b.test.calibration.threshold);
    for (std::size_t r = 0; r < a.samples.size(); ++r) CHECK(a.samples[r].counts == b.samples[r].counts);
}

TEST_CASE("levelstats counts agree with a full diagonalization") {
    const auto model = chain(60, 5.0);
    const auto table = estimate_dos(model, default_grid(model.disorder, 1, 401), {30, 0, 1});
    LevelStatsSettings s;
    s.intervals = {{-3.0, -0.5}, {0.0, 2.0}};
    s.calibration_repetitions = 10;
    const auto rep = levelstats_experiment(model, table, s, {100, 6, 1});
    for (std::size_t r = 0; r < 100; r += 17) {
        const auto full = eigen_full(model.hamiltonian(rep.samples[r].seed), false);
        const auto cfg = rescale_levels(full, s.e0, rep.nu.value, model.box().volume());
        CHECK(interval_counts(cfg, s.intervals).counts == rep.samples[r].counts);
    }
}
