#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "anderson/eig.hpp"
#include "anderson/model.hpp"

using namespace anderson;

TEST_CASE("smallest torus") {
    const auto box = build_box(1, 1);
    CHECK(box.side() == 3);
    CHECK(box.volume() == 3);
    auto nb = box.torus_neighbors(0);
    std::sort(nb.begin(), nb.end());
    CHECK(nb == std::vector<std::size_t>{1, 2});
}

TEST_CASE("2d torus with M=3 has four distinct neighbors per site") {
    const auto box = build_box(2, 1);
    CHECK(box.volume() == 9);
    for (std::size_t i = 0; i < box.volume(); ++i) {
        auto nb = box.torus_neighbors(i);
        std::set<std::size_t> uniq(nb.begin(), nb.end());
        CHECK(uniq.size() == 4);
        CHECK(uniq.count(i) == 0);
    }
}

TEST_CASE("wrap-around neighbor") {
    const auto box = build_box(1, 500);
    CHECK(box.volume() == 1001);
    CHECK(box.torus_neighbor(1000, 0, +1) == 0);
    CHECK(box.torus_neighbor(0, 0, -1) == 1000);
}

TEST_CASE("site/index maps are inverse bijections") {
    for (int d : {1, 2, 3}) {
        const auto box = build_box(d, 2);
        for (std::size_t i = 0; i < box.volume(); ++i) {
            const auto c = box.coords_of(i);
            for (int x : c) CHECK((x >= -2 && x <= 2));
            CHECK(box.index_of(c) == i);
        }
    }
    // row-major over shifted coordinates, first coordinate slowest
    const auto box = build_box(2, 1);
    CHECK(box.index_of(std::vector<int>{-1, -1}) == 0);
    CHECK(box.index_of(std::vector<int>{-1, 0}) == 1);
    CHECK(box.index_of(std::vector<int>{0, -1}) == 3);
}

TEST_CASE("invalid boxes") {
    CHECK_THROWS_WITH_AS(build_box(0, 3), "invalid lattice", std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_box(2, 0), "invalid lattice", std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_box(1, -1), "invalid lattice", std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_box(64, 1000), "box too large", std::invalid_argument);
}

TEST_CASE("torus distance is a bounded translation-invariant metric") {
    const auto box = build_box(2, 3);
    const int bound = box.side() / 2;
    for (std::size_t a = 0; a < box.volume(); a += 5) {
        for (std::size_t b = 0; b < box.volume(); b += 3) {
            const int dab = box.torus_distance(a, b);
            CHECK(dab == box.torus_distance(b, a));
            CHECK(dab <= bound);
            CHECK((dab == 0) == (a == b));
            // translate both by one step along axis 1
            CHECK(dab == box.torus_distance(box.torus_neighbor(a, 1, 1), box.torus_neighbor(b, 1, 1)));
        }
    }
    const auto chain = build_box(1, 4);
    CHECK(chain.torus_distance(0, chain.side() - 1) == 1);
}

TEST_CASE("disorder spec validation and json") {
    CHECK_THROWS(DisorderSpec::uniform(1.0, 1.0, 1.0));
    CHECK_THROWS(DisorderSpec::uniform(0.0, 1.0, 0.0));
    CHECK_THROWS(DisorderSpec::piecewise({0.0, 1.0, 2.0}, {0.5, 0.6}, 1.0));
    CHECK_NOTHROW(DisorderSpec::piecewise({0.0, 1.0, 2.0}, {0.25, 0.75}, 1.0));

    const auto j = nlohmann::json::parse(R"({"kind":"uniform","a":-0.5,"b":0.5,"coupling":5.0})");
    const auto spec = j.get<DisorderSpec>();
    CHECK(spec == DisorderSpec::uniform(-0.5, 0.5, 5.0));
    CHECK(nlohmann::json(spec) == j);
    const auto pw = DisorderSpec::piecewise({-1.0, 0.0, 2.0}, {0.5, 0.25}, 3.0);
    CHECK(nlohmann::json(pw).get<DisorderSpec>() == pw);
}

TEST_CASE("sample_disorder support, determinism and mean") {
    const auto spec = DisorderSpec::uniform(-0.5, 0.5, 5.0);
    const auto box = build_box(1, 50000);  // N = 100001
    const auto r1 = sample_disorder(spec, box, 42);
    const auto r2 = sample_disorder(spec, box, 42);
    CHECK(r1.values == r2.values);
    CHECK(r1.values != sample_disorder(spec, box, 43).values);
    for (double v : r1.values) CHECK((v >= -2.5 && v <= 2.5));
    const double n = double(r1.values.size());
    const double mean = std::accumulate(r1.values.begin(), r1.values.end(), 0.0) / n;
    CHECK(std::abs(mean) <= 4.0 * (5.0 / std::sqrt(12.0)) / std::sqrt(n));
}

TEST_CASE("piecewise sampling matches piece masses") {
    const auto spec = DisorderSpec::piecewise({0.0, 1.0, 2.0}, {0.2, 0.8}, 1.0);
    const auto box = build_box(1, 20000);
    const auto r = sample_disorder(spec, box, 7);
    const double n = double(r.values.size());
    const double upper = double(std::count_if(r.values.begin(), r.values.end(), [](double v) { return v >= 1.0; }));
    CHECK(std::abs(upper / n - 0.8) <= 4.0 * std::sqrt(0.16 / n));
    for (double v : r.values) CHECK((v >= 0.0 && v <= 2.0));
}

TEST_CASE("assemble: triangle adjacency") {
    const auto box = build_box(1, 1);
    const auto h = assemble_hamiltonian(box, std::vector<double>{0.0, 0.0, 0.0});
    CHECK(h.structure() == MatrixStructure::periodic_chain);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(h.entry(i, j) == (i == j ? 0.0 : 1.0));
    const auto s = eigen_full(h, false);
    CHECK(s.values[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(s.values[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(s.values[2] == doctest::Approx(2.0).epsilon(1e-12));

    const auto h5 = assemble_hamiltonian(box, std::vector<double>{5.0, 0.0, 0.0});
    CHECK(h5.trace() == 5.0);
    CHECK(h5.entry(0, 1) == 1.0);
    CHECK(h5.entry(0, 2) == 1.0);
}

TEST_CASE("assemble: regular graph row sums") {
    const auto box = build_box(2, 1);
    const auto h = assemble_hamiltonian(box, std::vector<double>(9, 0.0));
    std::vector<double> ones(9, 1.0), y(9);
    h.multiply(ones, y);
    for (double v : y) CHECK(v == 4.0);
    for (std::size_t i = 0; i < 9; ++i) CHECK(h.row_degree(i) == 4);
}

TEST_CASE("assemble: each torus row has 2d unit off-diagonals and is symmetric") {
    const auto box = build_box(3, 2);
    const auto spec = DisorderSpec::uniform(-0.5, 0.5, 2.0);
    const auto omega = sample_disorder(spec, box, 3);
    const auto h = assemble_hamiltonian(box, omega);
    const auto a = h.to_dense();
    const std::size_t n = h.size();
    for (std::size_t i = 0; i < n; ++i) {
        int units = 0;
        CHECK(a[i * n + i] == omega.values[i]);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(a[i * n + j] == a[j * n + i]);
            if (i != j && a[i * n + j] == 1.0) ++units;
            if (i != j) CHECK((a[i * n + j] == 0.0 || a[i * n + j] == 1.0));
        }
        CHECK(units == 6);
    }
}

TEST_CASE("assemble: structure detection and boundary") {
    const auto box = build_box(1, 5);
    std::vector<double> w(box.volume(), 0.0);
    CHECK(assemble_hamiltonian(box, w, Boundary::periodic).structure() == MatrixStructure::periodic_chain);
    CHECK(assemble_hamiltonian(box, w, Boundary::simple).structure() == MatrixStructure::tridiagonal);
    CHECK(assemble_hamiltonian(build_box(2, 2), std::vector<double>(25, 0.0)).structure() ==
          MatrixStructure::general);
    CHECK_THROWS_AS(assemble_hamiltonian(box, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("spectrum bounds") {
    auto b = spectrum_bounds(DisorderSpec::uniform(-0.5, 0.5, 10.0), 1);
    CHECK(b.lo == -7.0);
    CHECK(b.hi == 7.0);
    b = spectrum_bounds(DisorderSpec::uniform(0.0, 1.0, 1.0), 2);
    CHECK(b.lo == -4.0);
    CHECK(b.hi == 5.0);
    b = spectrum_bounds(DisorderSpec::constant(0.0), 1);
    CHECK(b.lo == -2.0);
    CHECK(b.hi == 2.0);
}

TEST_CASE("envelope, trace and Gershgorin over random realizations") {
    const auto spec = DisorderSpec::uniform(-0.5, 0.5, 3.0);
    for (int d : {1, 2}) {
        const auto box = build_box(d, d == 1 ? 20 : 4);
        const auto env = spectrum_bounds(spec, d);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto omega = sample_disorder(spec, box, seed);
            const auto h = assemble_hamiltonian(box, omega);
            const auto s = eigen_full(h, false);
            const auto discs = gershgorin_union(h);
            double max_abs = 0.0;
            for (double v : omega.values) max_abs = std::max(max_abs, std::abs(v));
            const double sum = std::accumulate(s.values.begin(), s.values.end(), 0.0);
            CHECK(std::abs(sum - h.trace()) <= 1e-9 * double(h.size()) * max_abs);
            for (double e : s.values) {
                CHECK(env.contains(e));
                CHECK(std::any_of(discs.begin(), discs.end(), [&](const Interval& iv) { return iv.contains(e); }));
            }
        }
    }
}

TEST_CASE("translation relabeling leaves the spectrum unchanged") {
    const auto box = build_box(2, 2);
    const auto spec = DisorderSpec::uniform(-0.5, 0.5, 4.0);
    const auto omega = sample_disorder(spec, box, 11);
    std::vector<double> shifted(box.volume());
    for (std::size_t i = 0; i < box.volume(); ++i) shifted[box.torus_neighbor(i, 0, +1)] = omega.values[i];
    const auto a = eigen_full(assemble_hamiltonian(box, omega), false);
    const auto b = eigen_full(assemble_hamiltonian(box, shifted), false);
    for (std::size_t k = 0; k < a.count(); ++k) CHECK(a.values[k] == doctest::Approx(b.values[k]).epsilon(1e-12));
}
