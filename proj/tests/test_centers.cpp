#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "anderson/centers.hpp"

using namespace anderson;

namespace {

std::vector<double> delta_vector(std::size_t n, std::size_t at) {
    std::vector<double> v(n, 0.0);
    v[at] = 1.0;
    return v;
}

SpectralData single_pair(double energy, std::vector<double> vector) {
    SpectralData s;
    s.values = {energy};
    s.dimension = vector.size();
    s.vectors = std::move(vector);
    s.indices = {0};
    return s;
}

// Max-norm torus distance, computed coordinate by coordinate.
int torus_distance(const std::vector<int>& a, const std::vector<int>& b, int side) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int raw = std::abs(a[i] - b[i]);
        d = std::max(d, std::min(raw, side - raw));
    }
    return d;
}

}  // namespace

TEST_CASE("center of a delta vector") {
    const auto box = build_box(1, 5);
    const auto c = localization_center(delta_vector(box.volume(), 5), box, 3);
    CHECK(c.site == 5);
    CHECK(c.amplitude == 1.0);
    CHECK(c.index == 3);
    CHECK(c.coords == box.coords_of(5));
}

TEST_CASE("ties go to the smallest index") {
    const auto box = build_box(2, 2);
    const std::size_t n = box.volume();
    const std::vector<double> flat(n, 1.0 / std::sqrt(double(n)));
    const auto c = localization_center(flat, box);
    CHECK(c.site == 0);
    CHECK(c.amplitude == doctest::Approx(1.0 / std::sqrt(double(n))));
    auto v = delta_vector(n, 7);
    v[7] = -std::sqrt(0.5);
    v[3] = std::sqrt(0.5);
    CHECK(localization_center(v, box).site == 3);
}

TEST_CASE("center errors") {
    const auto box = build_box(1, 3);
    CHECK_THROWS_WITH(localization_center(std::vector<double>(box.volume(), 0.0), box), "zero vector");
    CHECK_THROWS_WITH(localization_center(std::vector<double>(box.volume(), 1.0), box), "vector not normalized");
}

TEST_CASE("strong coupling: distinct centers near their potential values") {
    const auto box = build_box(1, 25);
    const auto spec = DisorderSpec::uniform(-0.5, 0.5, 50.0);
    const auto omega = sample_disorder(spec, box, 77);
    const auto h = assemble_hamiltonian(box, omega);
    const auto full = eigen_full(h, true);
    const std::size_t n = box.volume();
    std::set<std::size_t> sites;
    for (std::size_t j = 0; j < n; ++j) {
        const std::vector<double> v(full.vectors.begin() + j * n, full.vectors.begin() + (j + 1) * n);
        const auto c = localization_center(v, box, j);
        sites.insert(c.site);
        CHECK(std::abs(full.values[j] - omega.values[c.site]) <= 2.0);
    }
    CHECK(sites.size() == n);
}

TEST_CASE("cloud diameter") {
    const auto box = build_box(1, 10);
    const std::size_t n = box.volume();
    for (double tau : {0.0, 0.5, 0.99}) CHECK(center_cloud_diameter(delta_vector(n, 4), box, tau) == 0);
    std::vector<double> ends(n, 0.0);
    ends[0] = ends[n - 1] = std::sqrt(0.5);
    CHECK(center_cloud_diameter(ends, box, 0.0) == 1);
    std::vector<double> spread(n, 0.0);
    spread[2] = 0.8;
    spread[9] = 0.6;
    CHECK(center_cloud_diameter(spread, box, 0.0) == 0);
    CHECK(center_cloud_diameter(spread, box, 0.3) == 7);
}

TEST_CASE("median cloud diameter grows at most logarithmically") {
    CentersSettings s;
    std::vector<double> med, logm;
    for (int L : {125, 250, 500}) {
        ModelParams m;
        m.half_side = L;
        m.disorder = DisorderSpec::uniform(-0.5, 0.5, 5.0);
        const auto rep = centers_experiment(m, s, {20, 5, 1});
        REQUIRE(!rep.centers.empty());
        med.push_back(rep.median_diameter);
        logm.push_back(std::log(double(2 * L + 1)));
    }
    // least-squares slope of the median against log M
    const double mx = std::accumulate(logm.begin(), logm.end(), 0.0) / 3.0;
    const double my = std::accumulate(med.begin(), med.end(), 0.0) / 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (logm[i] - mx) * (med[i] - my);
        sxx += (logm[i] - mx) * (logm[i] - mx);
    }
    const double slope = sxy / sxx;
    CHECK(slope <= 10.0);
    // linear growth in M would put the largest median far above the smallest
    CHECK(med[2] <= med[0] + 10.0 * std::log(4.0));
}

TEST_CASE("joint points: rescaling conventions") {
    const auto box = build_box(1, 10);
    const std::size_t n = box.volume();
    const auto pair = single_pair(0.3, delta_vector(n, 2));
    const auto p = joint_points(pair, 0.3, 0.2, 7.0, box);
    REQUIRE(p.size() == 1);
    CHECK(p[0].xi == 0.0);

    const auto edge = single_pair(0.1, delta_vector(n, n - 1));
    const auto at_m = joint_points(edge, 0.0, 0.2, double(box.side()), box);
    CHECK(std::abs(at_m[0].x[0]) <= 0.5);
    const auto first = joint_points(single_pair(0.1, delta_vector(n, 0)), 0.0, 0.2, double(box.side()), box);
    CHECK(std::abs(first[0].x[0]) <= 0.5);

    const auto box2 = build_box(2, 4);
    const auto pair2 = single_pair(0.37, delta_vector(box2.volume(), 13));
    const auto a = joint_points(pair2, 0.1, 0.3, 3.0, box2);
    const auto b = joint_points(pair2, 0.1, 0.3, 6.0, box2);
    CHECK(b[0].xi == 4.0 * a[0].xi);
    for (int i = 0; i < 2; ++i) CHECK(b[0].x[i] * 2.0 == a[0].x[i]);

    SpectralData bare;
    bare.values = {0.0};
    CHECK_THROWS_WITH(joint_points(bare, 0.0, 0.1, 3.0, box), "missing eigenvectors");
}

TEST_CASE("joint points warn on weak scales") {
    const auto box = build_box(1, 10);
    std::vector<std::string> w;
    joint_points(single_pair(0.0, delta_vector(box.volume(), 0)), 0.0, 0.2, 2.0, box, &w);
    CHECK(!w.empty());
}

TEST_CASE("product box counts") {
    ProductBox left{{-1.0, 1.0}, {{-0.5, 0.0}}};
    ProductBox right{{-1.0, 1.0}, {{0.0, 0.5}}};
    const std::vector<ProductBox> boxes{left, right};
    CHECK(left.measure() == 1.0);
    CHECK(product_box_counts(std::vector<JointPoint>{}, boxes) == std::vector<std::size_t>{0, 0});

    std::vector<JointPoint> pts{{0, 0.0, {-0.25}}, {1, 0.5, {0.0}}, {2, -1.0, {0.49}}, {3, 1.0, {0.1}}};
    CHECK(product_box_counts(pts, boxes) == std::vector<std::size_t>{1, 2});
    const std::vector<ProductBox> whole{{{-1.0, 1.0}, {{-0.5, 0.5}}}};
    CHECK(product_box_counts(pts, whole)[0] == 3);

    const std::vector<ProductBox> overlapping{left, {{0.0, 2.0}, {{-0.25, 0.25}}}};
    CHECK_THROWS_WITH(check_boxes_disjoint(overlapping), "boxes overlap");
    CHECK_THROWS_WITH(product_box_counts(pts, overlapping), "boxes overlap");

    const std::vector<double> mean{left.measure()};
    CHECK(poisson_reference(mean, std::vector<std::size_t>{0}) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("noncovariant count of a single point") {
    const auto box = build_box(1, 10);
    const auto pair = single_pair(0.0, delta_vector(box.volume(), 10));
    NoncovariantScales s;
    s.ell = s.ell_prime = s.ell_tilde = 5.0;
    s.j = {-1.0, 1.0};
    s.c = {{-0.5, 0.5}};
    const auto c = noncovariant_count(pair, 0.0, 0.2, s, box);
    CHECK(c.raw == 1);
    CHECK(c.normalized == 1.0);
    s.ell_tilde = 2.5;
    const auto d = noncovariant_count(pair, 0.0, 0.2, s, box);
    CHECK(d.raw == 1);
    CHECK(d.normalized == 2.0);
}

TEST_CASE("center spacings arithmetic") {
    const auto box = build_box(1, 10);
    const std::vector<std::size_t> two{2, 5};
    const auto s = center_spacings(two, 1.0 / 9.0, 1.0, box);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const std::vector<std::size_t> same{4, 4, 4};
    for (double v : center_spacings(same, 0.3, 0.1, box)) CHECK(v == 0.0);
    CHECK(center_spacings(std::vector<std::size_t>{4}, 0.3, 0.1, box).empty());
    // across the seam: sites 0 and 20 are neighbours on a 21-site torus
    CHECK(center_spacings(std::vector<std::size_t>{0, 20}, 1.0, 1.0, box)[0] == 1.0);
}

TEST_CASE("center spacings: permutation invariance and translation equivariance") {
    const auto box = build_box(2, 6);
    std::mt19937_64 rng(10);
    std::vector<std::size_t> sites(12);
    for (auto& s : sites) s = rng() % box.volume();
    const auto base = center_spacings(sites, 0.2, 0.05, box);

    auto perm = sites;
    std::reverse(perm.begin(), perm.end());
    auto pr = center_spacings(perm, 0.2, 0.05, box);
    std::reverse(pr.begin(), pr.end());
    CHECK(pr == base);

    std::vector<std::size_t> moved;
    for (auto s : sites) {
        auto c = box.coords_of(s);
        c[0] = (c[0] + 6 + 4) % 13 - 6;
        c[1] = (c[1] + 6 + 11) % 13 - 6;
        moved.push_back(box.index_of(c));
    }
    CHECK(center_spacings(moved, 0.2, 0.05, box) == base);

    // brute-force nearest neighbour in the max norm
    const double scale = std::sqrt(0.2 * 0.05);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        int best = 1 << 30;
        for (std::size_t j = 0; j < sites.size(); ++j)
            if (j != i) best = std::min(best, torus_distance(box.coords_of(sites[i]), box.coords_of(sites[j]), 13));
        CHECK(best <= 6);
        CHECK(base[i] == doctest::Approx(best * scale).epsilon(1e-14));
    }
}

TEST_CASE("oracle Poisson configuration has the requested intensity") {
    const auto box = build_box(1, 500);
    std::mt19937_64 rng(3);
    double points = 0.0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) points += double(poisson_center_spacings(rng, 0.2, 0.05, box).size());
    // each spacing belongs to one point; empty or single-point draws contribute nothing
    const double expected = 0.01 * 1001.0;
    CHECK(std::abs(points / reps - expected) < 0.5);
}

TEST_CASE("centers experiment is independent of the worker count") {
    ModelParams m;
    m.half_side = 60;
    m.disorder = DisorderSpec::uniform(-0.5, 0.5, 5.0);
    const auto a = centers_experiment(m, {}, {6, 1, 1});
    const auto b = centers_experiment(m, {}, {6, 1, 3});
    REQUIRE(a.centers.size() == b.centers.size());
    for (std::size_t i = 0; i < a.centers.size(); ++i) {
        CHECK(a.centers[i].center.site == b.centers[i].center.site);
        CHECK(a.centers[i].energy == b.centers[i].energy);
    }
}
