#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "anderson/io.hpp"
#include "anderson/stats.hpp"

using namespace anderson;

TEST_CASE("poisson pmf against the recurrence") {
    for (double m : {0.3, 2.0, 17.5}) {
        double p = std::exp(-m);
        for (std::size_t k = 0; k < 60; ++k) {
            CHECK(poisson_pmf(m, k) == doctest::Approx(p).epsilon(1e-12));
            p *= m / double(k + 1);
        }
    }
    CHECK(poisson_pmf(0.0, 0) == 1.0);
    CHECK(poisson_pmf(0.0, 3) == 0.0);
}

TEST_CASE("poisson tail and truncation by brute force") {
    for (double m : {0.5, 2.0, 9.0}) {
        double cdf = 0.0;
        std::size_t first = 0;
        bool found = false;
        for (std::size_t k = 0; k < 100; ++k) {
            cdf += poisson_pmf(m, k);
            CHECK(poisson_tail(m, k) == doctest::Approx(1.0 - cdf).epsilon(1e-9).scale(1.0));
            if (!found && 1.0 - cdf < 1e-4) {
                first = k;
                found = true;
            }
        }
        CHECK(poisson_truncation(m) == first);
    }
}

TEST_CASE("poisson reference values") {
    const std::vector<double> m2{2.0};
    const std::vector<std::size_t> k0{0};
    CHECK(poisson_reference(m2, k0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(poisson_reference(m2, k0) == doctest::Approx(0.135335).epsilon(1e-5));

    const std::vector<double> m11{1.0, 1.0};
    const std::vector<std::size_t> k11{1, 1};
    CHECK(poisson_reference(m11, k11) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));

    for (double m : {0.1, 2.0, 40.0}) {
        double s = 0.0;
        for (std::size_t k = 0; k < 400; ++k) {
            const std::vector<double> mm{m};
            const std::vector<std::size_t> kk{k};
            s += poisson_reference(mm, kk);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    // large k stays finite in log space
    const std::vector<double> big{500.0};
    const std::vector<std::size_t> kb{500};
    CHECK(poisson_reference(big, kb) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI * 500.0)).epsilon(1e-3));
}

TEST_CASE("poisson sampler moments") {
    std::mt19937_64 rng(7);
    for (double m : {0.5, 2.0, 30.0}) {
        const int n = 100000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = double(poisson_sample(rng, m));
            s += k;
            s2 += k * k;
        }
        const double mean = s / n;
        const double var = s2 / n - mean * mean;
        CHECK(std::abs(mean - m) < 5.0 * std::sqrt(m / n));
        CHECK(std::abs(var - m) < 0.05 * m);
    }
}

TEST_CASE("count table cells") {
    CountTable t({2, 3});
    CHECK(t.cells() == 3 * 4 + 1);
    for (std::size_t c = 0; c + 1 < t.cells(); ++c) CHECK(t.cell_of(t.counts_of(c)) == c);
    const std::vector<std::size_t> over{3, 0};
    CHECK(t.cell_of(over) == t.overflow_cell());
    t.add(std::vector<std::size_t>{0, 0});
    t.add(std::vector<std::size_t>{1, 3});
    t.add(over);
    CHECK(t.total() == 3);
    const auto p = t.pmf();
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
    CHECK(p[t.overflow_cell()] == doctest::Approx(1.0 / 3.0));

    const std::vector<std::vector<double>> marg{{0.5, 0.25, 0.125}, {0.4, 0.3, 0.2, 0.05}};
    const auto q = t.product_law(marg);
    CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q[t.cell_of(std::vector<std::size_t>{2, 1})] == doctest::Approx(0.125 * 0.3));
    CHECK(q[t.overflow_cell()] == doctest::Approx(1.0 - 0.875 * 0.95));
}

TEST_CASE("total variation") {
    const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0}, r{0.5, 0.5};
    CHECK(total_variation(p, q) == 1.0);
    CHECK(total_variation(p, r) == 0.5);
    CHECK(total_variation(r, r) == 0.0);
}

TEST_CASE("wilson interval matches tabulated values") {
    const auto ci = wilson_interval(5, 100);
    CHECK(ci.lo == doctest::Approx(0.02154).epsilon(1e-3));
    CHECK(ci.hi == doctest::Approx(0.11175).epsilon(1e-3));
    const auto zero = wilson_interval(0, 50);
    CHECK(zero.lo == 0.0);
    CHECK(zero.hi == doctest::Approx(0.07135).epsilon(1e-3));
}

TEST_CASE("percentile interpolates between order statistics") {
    CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 0.5) == 2.5);
    CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 0.99) == doctest::Approx(3.97));
    CHECK(percentile({1.0, 2.0}, 0.0) == 1.0);
    CHECK(percentile({1.0, 2.0}, 1.0) == 2.0);
}

TEST_CASE("calibration floor and percentile") {
    const auto low = calibrate(50, 1, [](std::mt19937_64&) { return 0.001; });
    CHECK(low.threshold == 0.02);
    CHECK(low.percentile99 == doctest::Approx(0.001));
    const auto high = calibrate(100, 1, [](std::mt19937_64& g) { return unit_uniform(g); });
    CHECK(high.repetitions == 100);
    CHECK(high.threshold > 0.9);
    const auto again = calibrate(100, 1, [](std::mt19937_64& g) { return unit_uniform(g); });
    CHECK(again.threshold == high.threshold);
}

// ---------------------------------------------------------------------------
// io

TEST_CASE("shortest round-trip formatting") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double x = std::ldexp(unit_uniform(rng) - 0.5, int(rng() % 200) - 100);
        CHECK(std::stod(format_double(x)) == x);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("csv writer quoting") {
    CsvWriter w({"a", "b"});
    w.cell(1).cell("x,y").end_row();
    w.cell(0.5).cell("say \"hi\"").end_row();
    CHECK(w.text() == "a,b\n1,\"x,y\"\n0.5,\"say \"\"hi\"\"\"\n");
    CsvWriter short_row({"a", "b"});
    short_row.cell(1);
    CHECK_THROWS(short_row.end_row());
}

TEST_CASE("atomic write leaves no temporary behind") {
    const auto dir = std::filesystem::temp_directory_path() / "anderson_io_test";
    std::filesystem::remove_all(dir);
    const auto path = dir / "nested" / "f.txt";
    write_file_atomic(path, "hello\n");
    CHECK(read_file(path) == "hello\n");
    write_file_atomic(path, "again\n");
    CHECK(read_file(path) == "again\n");
    int entries = 0;
    for (const auto& e : std::filesystem::directory_iterator(path.parent_path())) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sha256 test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
