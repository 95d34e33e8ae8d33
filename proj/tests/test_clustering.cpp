#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmic/clustering.hpp"
#include "mmic/errors.hpp"
#include "mmic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace mmic;

namespace {

std::vector<Point> blobs(std::size_t per_blob, const std::vector<Point>& centres, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<Point> out;
    for (std::size_t i = 0; i < per_blob; ++i)
        for (const auto& c : centres) {
            Point p = c;
            for (auto& v : p) v += g(rng);
            out.push_back(p);
        }
    return out;
}

// labels agree up to renaming
bool same_partition(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    return canonical_labels(a) == canonical_labels(b);
}

SampleMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    SampleMatrix m{rows, cols, {}};
    for (std::size_t i = 0; i < rows * cols; ++i) m.values.push_back(g(rng));
    return m;
}

} // namespace

TEST_CASE("lsh sketch against identity hyperplanes") {
    const std::vector<Point> planes{{1.0, 0.0}, {0.0, 1.0}};
    CHECK(lsh_sketch(Point{1.0, -1.0}, planes) == std::vector<int>{1, -1});
    CHECK(lsh_sketch(Point{0.0, -2.0}, planes) == std::vector<int>{1, -1});
}

TEST_CASE("lsh sketch is invariant to positive scaling") {
    const auto planes = random_hyperplanes(64, 6, 3);
    const Point d{0.3, -1.2, 0.5, 2.0, -0.1, 0.7};
    Point scaled = d;
    for (auto& v : scaled) v *= 37.5;
    CHECK(lsh_sketch(d, planes) == lsh_sketch(scaled, planes));
    CHECK(lsh_sketch(d, 64, 3) == lsh_sketch(d, planes));
}

TEST_CASE("sign agreement rate approaches 1 - angle / pi") {
    const std::size_t planes = 10000;
    for (double angle : {0.3, 1.0, 2.0}) {
        Point a(5, 0.0), b(5, 0.0);
        a[0] = 1.0;
        b[0] = std::cos(angle);
        b[1] = std::sin(angle);
        const auto sa = lsh_sketch(a, planes, 42);
        const auto sb = lsh_sketch(b, planes, 42);
        double agree = 0.0;
        for (std::size_t i = 0; i < planes; ++i) agree += sa[i] == sb[i];
        CHECK(std::abs(agree / planes - (1.0 - angle / std::numbers::pi)) < 0.02);
    }
}

TEST_CASE("kmeans with k equal to n gives singletons and zero inertia") {
    const std::vector<Point> pts{{0.0}, {1.0}, {5.0}, {9.0}};
    const auto r = kmeans(pts, 4, 1);
    CHECK(r.inertia() == doctest::Approx(0.0));
    auto sorted = r.labels;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("kmeans separates two far blobs") {
    const auto pts = blobs(20, {{0.0, 0.0}, {10.0, 10.0}}, 0.5, 2);
    const auto r = kmeans(pts, 2, 7);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK((r.labels[i] == r.labels[i % 2]));
    CHECK(r.labels[0] != r.labels[1]);
}

TEST_CASE("kmeans inertia never increases across iterations") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto pts = blobs(30, {{0.0, 0.0}, {2.0, 1.0}, {1.0, 3.0}}, 1.0, seed);
        const auto r = kmeans(pts, 4, seed);
        for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
            CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-9);
    }
}

TEST_CASE("kmeans argument errors") {
    const std::vector<Point> pts{{0.0}, {1.0}};
    CHECK_THROWS_AS(kmeans(pts, 0, 1), ConfigError);
    CHECK_THROWS_AS(kmeans(pts, 3, 1), ContractError);
}

TEST_CASE("subspace distance of identical matrices is zero") {
    const auto a = random_matrix(30, 6, 1);
    CHECK(svd_subspace_distance(a, a, 3) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("subspace distance of orthogonal rank-one matrices is one") {
    SampleMatrix a{4, 3, {1, 0, 0, 2, 0, 0, -1, 0, 0, 3, 0, 0}};
    SampleMatrix b{3, 3, {0, 1, 0, 0, -2, 0, 0, 5, 0}};
    std::size_t q = 0;
    CHECK(svd_subspace_distance(a, b, 2, &q) == doctest::Approx(1.0));
    CHECK(q == 1);
}

TEST_CASE("subspace distance is symmetric and bounded") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto a = random_matrix(20, 5, seed);
        const auto b = random_matrix(25, 5, seed + 100);
        const double ab = svd_subspace_distance(a, b, 2);
        CHECK(ab == doctest::Approx(svd_subspace_distance(b, a, 2)).epsilon(1e-9));
        CHECK(ab >= -1e-12);
        CHECK(ab <= 1.0 + 1e-12);
    }
    CHECK_THROWS_AS(svd_subspace_distance(random_matrix(3, 4, 1), random_matrix(3, 5, 1), 1), ContractError);
}

TEST_CASE("hierarchical clustering threshold extremes") {
    const auto pts = blobs(5, {{0.0, 0.0}, {4.0, 0.0}}, 1.0, 3);
    const auto d = euclidean_distances(pts);
    const auto none = hierarchical_cluster(d, 1e-9);
    CHECK(std::set<std::size_t>(none.begin(), none.end()).size() == pts.size());
    const auto all = hierarchical_cluster(d, 1e9);
    CHECK(std::all_of(all.begin(), all.end(), [](auto l) { return l == 0; }));
}

TEST_CASE("hierarchical clustering recovers two blobs") {
    const auto pts = blobs(8, {{0.0, 0.0}, {20.0, 0.0}}, 0.5, 4);
    const auto labels = hierarchical_cluster(euclidean_distances(pts), 5.0);
    std::vector<std::size_t> truth(pts.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = i % 2;
    CHECK(same_partition(labels, truth));
}

TEST_CASE("hierarchical clustering rejects malformed matrices") {
    DistanceMatrix d{2, {0.0, 1.0, 2.0, 0.0}};
    CHECK_THROWS_AS(hierarchical_cluster(d, 1.0), ContractError);
    d.d = {1.0, 1.0, 1.0, 0.0};
    CHECK_THROWS_AS(hierarchical_cluster(d, 1.0), ContractError);
    d.d = {0.0, -1.0, -1.0, 0.0};
    CHECK_THROWS_AS(hierarchical_cluster(d, 1.0), ContractError);
}

TEST_CASE("silhouette of two tight pairs") {
    const std::vector<Point> pts{{0.0}, {0.1}, {10.0}, {10.1}};
    const std::vector<std::size_t> labels{0, 0, 1, 1};
    // per-point (b - a) / max(a, b), averaged
    const double expected = ((10.05 - 0.1) / 10.05 * 2 + (9.95 - 0.1) / 9.95 * 2) / 4;
    const auto s = silhouette(pts, labels);
    REQUIRE(s.has_value());
    CHECK(*s == doctest::Approx(expected));
    CHECK(*s == doctest::Approx(0.990).epsilon(1e-3));
}

TEST_CASE("silhouette is undefined for a single cluster") {
    const std::vector<Point> pts{{0.0}, {1.0}, {2.0}};
    const std::vector<std::size_t> one{0, 0, 0};
    CHECK_FALSE(silhouette(pts, one).has_value());
}

TEST_CASE("silhouette lies in [-1, 1] and averages near zero for random labels") {
    Rng rng(5);
    double total = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const auto pts = blobs(20, {{0.0, 0.0}}, 1.0, 1000 + t);
        std::vector<std::size_t> labels(pts.size());
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3;
        std::shuffle(labels.begin(), labels.end(), rng);
        const auto s = silhouette(pts, labels);
        REQUIRE(s.has_value());
        CHECK(*s >= -1.0);
        CHECK(*s <= 1.0);
        total += *s;
    }
    CHECK(std::abs(total / trials) < 0.1);
}

TEST_CASE("select_clustering finds three blobs") {
    const auto pts = blobs(6, {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}}, 0.5, 6);
    const std::vector<std::size_t> ks{2, 3, 4, 5, 6};
    const auto r = select_clustering(pts, ks, 11);
    CHECK(r.assignment.clusters == 3);
    CHECK(r.chosen_parameter == 3.0);
    // reported score is the silhouette of the reported labels and the maximum of the sweep
    CHECK(r.assignment.scv == doctest::Approx(*silhouette(pts, r.assignment.labels)));
    for (const auto& c : r.candidates)
        if (c.scv) CHECK(*c.scv <= r.assignment.scv + 1e-12);
}

TEST_CASE("single-value sweep returns that value") {
    const auto pts = blobs(6, {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}}, 0.5, 6);
    const std::vector<std::size_t> ks{4};
    const auto r = select_clustering(pts, ks, 2);
    CHECK(r.assignment.clusters == 4);
    CHECK(r.candidates.size() == 1);
}

TEST_CASE("threshold sweep over a distance matrix") {
    const auto pts = blobs(5, {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}}, 0.5, 8);
    const auto d = euclidean_distances(pts);
    const std::vector<double> thresholds{0.1, 3.0, 100.0};
    const auto r = select_clustering(d, thresholds);
    CHECK(r.assignment.clusters == 3);
    CHECK(r.chosen_parameter == 3.0);
    const std::vector<double> only_one{1000.0};
    const auto single = select_clustering(d, only_one);
    CHECK(single.fell_back_to_single);
    CHECK(single.assignment.clusters == 1);
}

TEST_CASE("parallel kernels match the serial path bitwise") {
    const auto pts = blobs(40, {{0.0, 0.0, 1.0}, {3.0, 1.0, 0.0}}, 1.0, 9);
    const auto ds = euclidean_distances(pts, Exec::serial);
    const auto dp = euclidean_distances(pts, Exec::parallel);
    CHECK(ds.d == dp.d);
    std::vector<std::size_t> labels(pts.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3;
    CHECK(*silhouette(ds, labels, Exec::serial) == *silhouette(ds, labels, Exec::parallel));
    std::vector<SampleMatrix> mats;
    for (std::uint64_t s = 0; s < 6; ++s) mats.push_back(random_matrix(15, 4, s));
    CHECK(subspace_distances(mats, 2, Exec::serial).d == subspace_distances(mats, 2, Exec::parallel).d);
}

TEST_CASE("canonical labels follow first occurrence") {
    const std::vector<std::size_t> l{2, 2, 0, 1, 0};
    CHECK(canonical_labels(l) == std::vector<std::size_t>{0, 0, 1, 2, 1});
}
