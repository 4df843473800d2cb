#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "dpat/cluster.hpp"
#include "dpat/errors.hpp"
#include "dpat/rng.hpp"
#include "oracles.hpp"

using namespace dpat;

namespace {

std::vector<double> random_points(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<double> pts(n * dim);
    for (double& v : pts) v = standard_normal(rng);
    return pts;
}

std::vector<std::uint32_t> random_labels(Rng& rng, std::size_t n, std::size_t k) {
    // every label used at least once
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<std::uint32_t>(i < k ? i : uniform_index(rng, k));
    }
    return labels;
}

}  // namespace

TEST_CASE("kmeans splits the 1-D fixture into the exhaustive optimum") {
    const std::vector<double> pts = {0.0, 1.0, 10.0, 11.0};
    KMeansParams params;
    params.k = 2;
    params.seed = 3;
    const KMeansModel m = kmeans_fit(pts, 4, 1, params);
    CHECK(m.labels[0] == m.labels[1]);
    CHECK(m.labels[2] == m.labels[3]);
    CHECK(m.labels[0] != m.labels[2]);
    const double lo = std::min(m.centroids[0], m.centroids[1]);
    const double hi = std::max(m.centroids[0], m.centroids[1]);
    CHECK(lo == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(hi == doctest::Approx(10.5).epsilon(1e-12));
    CHECK(m.inertia == doctest::Approx(1.0).epsilon(1e-12));

    // exhaustive oracle over all 2-partitions: no assignment beats inertia 1.0
    double best = 1e300;
    for (int mask = 1; mask < 15; ++mask) {
        std::vector<double> ca, cb;
        for (int i = 0; i < 4; ++i) (mask & (1 << i) ? ca : cb).push_back(pts[i]);
        if (ca.empty() || cb.empty()) continue;
        auto cost = [](const std::vector<double>& g) {
            double mean = 0.0;
            for (double v : g) mean += v;
            mean /= static_cast<double>(g.size());
            double acc = 0.0;
            for (double v : g) acc += (v - mean) * (v - mean);
            return acc;
        };
        best = std::min(best, cost(ca) + cost(cb));
    }
    CHECK(m.inertia == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("kmeans with k = n reaches zero inertia") {
    Rng rng(8);
    const std::size_t n = 6, dim = 3;
    const auto pts = random_points(rng, n, dim);
    KMeansParams params;
    params.k = n;
    params.seed = 5;
    const KMeansModel m = kmeans_fit(pts, n, dim, params);
    CHECK(m.inertia == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<bool> used(n, false);
    for (auto l : m.labels) used[l] = true;
    for (bool u : used) CHECK(u);
}

TEST_CASE("kmeans inertia trace is non-increasing") {
    Rng rng(9);
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const std::size_t n = 80, dim = 4;
        const auto pts = random_points(rng, n, dim);
        KMeansParams params;
        params.k = 5;
        params.seed = seed;
        const KMeansModel m = kmeans_fit(pts, n, dim, params);
        REQUIRE(!m.inertia_trace.empty());
        for (std::size_t i = 1; i < m.inertia_trace.size(); ++i) {
            CHECK(m.inertia_trace[i] <= m.inertia_trace[i - 1] + 1e-9);
        }
        CHECK(m.inertia <= m.inertia_trace.back() + 1e-9);
    }
}

TEST_CASE("kmeans best-of-restarts never loses to a subset of restarts") {
    Rng rng(10);
    const std::size_t n = 60, dim = 2;
    const auto pts = random_points(rng, n, dim);
    for (std::uint64_t seed : {77, 78, 79}) {
        KMeansParams multi;
        multi.k = 4;
        multi.seed = seed;
        multi.n_init = 8;
        const KMeansModel best = kmeans_fit(pts, n, dim, multi);
        // restart 0 alone is one of the eight candidates
        KMeansParams single = multi;
        single.n_init = 1;
        CHECK(best.inertia <= kmeans_fit(pts, n, dim, single).inertia + 1e-9);
        // determinism of the full fit
        const KMeansModel again = kmeans_fit(pts, n, dim, multi);
        CHECK(again.labels == best.labels);
        CHECK(again.inertia == best.inertia);
    }
}

TEST_CASE("duplicated points keep every cluster non-empty") {
    std::vector<double> pts(10, 4.2);  // 10 identical 1-D points
    KMeansParams params;
    params.k = 3;
    params.seed = 1;
    const KMeansModel m = kmeans_fit(pts, 10, 1, params);
    std::vector<std::size_t> counts(3, 0);
    for (auto l : m.labels) ++counts[l];
    for (auto c : counts) CHECK(c > 0);
    CHECK(m.inertia == doctest::Approx(0.0));
}

TEST_CASE("kmeans rejects n < k") {
    const std::vector<double> pts = {0.0, 1.0};
    KMeansParams params;
    params.k = 3;
    CHECK_THROWS_AS(kmeans_fit(pts, 2, 1, params), NumericError);
}

TEST_CASE("validity indices on the hand-derived 4-point fixture") {
    const std::vector<double> pts = {0.0, 1.0, 10.0, 11.0};
    const std::vector<std::uint32_t> labels = {0, 0, 1, 1};
    const ValidityMetrics m = validity_indices(pts, 4, 1, labels);
    REQUIRE(m.all_defined());
    const double expected_sil =
        ((1.0 - 1.0 / 10.5) + (1.0 - 1.0 / 9.5) + (1.0 - 1.0 / 9.5) + (1.0 - 1.0 / 10.5)) / 4.0;
    CHECK(*m.silhouette == doctest::Approx(expected_sil).epsilon(1e-9));
    CHECK(*m.silhouette == doctest::Approx(0.8997).epsilon(1e-4));
    CHECK(*m.calinski_harabasz == doctest::Approx(200.0).epsilon(1e-9));
    CHECK(*m.davies_bouldin == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("silhouette approaches 1 for far-apart tight blobs") {
    Rng rng(11);
    const std::size_t per = 30, dim = 2;
    std::vector<double> pts;
    std::vector<std::uint32_t> labels;
    for (int b = 0; b < 2; ++b) {
        for (std::size_t i = 0; i < per; ++i) {
            // blob radius ~1, separation 100
            pts.push_back(b * 100.0 + standard_normal(rng));
            pts.push_back(standard_normal(rng));
            labels.push_back(b);
        }
    }
    const ValidityMetrics m = validity_indices(pts, 2 * per, dim, labels);
    CHECK(*m.silhouette > 0.95);
}

TEST_CASE("random labels on structureless data give silhouette near zero") {
    Rng rng(12);
    const std::size_t n = 200, dim = 2;
    const auto pts = random_points(rng, n, dim);
    const auto labels = random_labels(rng, n, 3);
    const ValidityMetrics m = validity_indices(pts, n, dim, labels);
    CHECK(std::fabs(*m.silhouette) < 0.15);
}

TEST_CASE("indices are invariant under global scaling") {
    Rng rng(13);
    const std::size_t n = 40, dim = 3;
    const auto pts = random_points(rng, n, dim);
    const auto labels = random_labels(rng, n, 4);
    const ValidityMetrics a = validity_indices(pts, n, dim, labels);
    auto scaled = pts;
    for (double& v : scaled) v *= 7.25;
    const ValidityMetrics b = validity_indices(scaled, n, dim, labels);
    CHECK(*a.silhouette == doctest::Approx(*b.silhouette).epsilon(1e-9));
    CHECK(*a.calinski_harabasz == doctest::Approx(*b.calinski_harabasz).epsilon(1e-9));
    CHECK(*a.davies_bouldin == doctest::Approx(*b.davies_bouldin).epsilon(1e-9));
}

TEST_CASE("identical points leave CH and DB undefined") {
    const std::vector<double> pts(8, 1.0);
    const std::vector<std::uint32_t> labels = {0, 0, 1, 1, 0, 1, 0, 1};
    const ValidityMetrics m = validity_indices(pts, 8, 1, labels);
    CHECK_FALSE(m.calinski_harabasz.has_value());
    CHECK_FALSE(m.davies_bouldin.has_value());
    CHECK(*m.silhouette == doctest::Approx(0.0));
}

TEST_CASE("singleton clusters contribute zero silhouette") {
    const std::vector<double> pts = {0.0, 1.0, 50.0};
    const std::vector<std::uint32_t> labels = {0, 0, 1};
    const ValidityMetrics m = validity_indices(pts, 3, 1, labels);
    REQUIRE(m.silhouette.has_value());
    // points 0 and 1: a=1, b=(50-x); point 2: singleton -> 0
    const double s0 = 1.0 - 1.0 / 50.0;
    const double s1 = 1.0 - 1.0 / 49.0;
    CHECK(*m.silhouette == doctest::Approx((s0 + s1 + 0.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("validity indices match the naive oracles on random instances") {
    Rng rng(14);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 6 + uniform_index(rng, 7);  // 6..12
        const std::size_t dim = 1 + uniform_index(rng, 3);
        const std::size_t k = 2 + uniform_index(rng, 2);
        if (k >= n) continue;
        const auto pts = random_points(rng, n, dim);
        const auto labels = random_labels(rng, n, k);
        const ValidityMetrics m = validity_indices(pts, n, dim, labels);
        REQUIRE(m.all_defined());
        CHECK(*m.silhouette ==
              doctest::Approx(oracles::silhouette(pts, n, dim, labels, k)).epsilon(1e-9));
        CHECK(*m.calinski_harabasz ==
              doctest::Approx(oracles::calinski_harabasz(pts, n, dim, labels, k)).epsilon(1e-9));
        CHECK(*m.davies_bouldin ==
              doctest::Approx(oracles::davies_bouldin(pts, n, dim, labels, k)).epsilon(1e-9));
    }
}

TEST_CASE("composite score worked examples and monotonicity") {
    CHECK(composite_score(1.0, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(composite_score(0.0, 0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(composite_score(0.8, 0.5, 0.3) == doctest::Approx(0.69).epsilon(1e-12));

    CHECK_THROWS_AS(composite_score(1.2, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(composite_score(0.5, -0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(composite_score(0.5, 0.0, 1.01), std::invalid_argument);

    Rng rng(15);
    for (int rep = 0; rep < 50; ++rep) {
        const double s = uniform01(rng), c = uniform01(rng), d = uniform01(rng);
        const double base = composite_score(s, c, d);
        const double ds = uniform01(rng) * (1.0 - s);
        const double dc = uniform01(rng) * (1.0 - c);
        const double dd = uniform01(rng) * (1.0 - d);
        CHECK(composite_score(s + ds, c, d) >= base - 1e-15);
        CHECK(composite_score(s, c + dc, d) >= base - 1e-15);
        CHECK(composite_score(s, c, d + dd) <= base + 1e-15);
    }
}

TEST_CASE("embedding centroids are per-cluster means of raw vectors") {
    EmbeddingMatrix m;
    m.dim = 2;
    m.ids = {"a", "b", "c"};
    m.data = {1.0f, 2.0f, 3.0f, 4.0f, 10.0f, 20.0f};
    const std::vector<std::uint32_t> labels = {0, 0, 1};
    const auto c = embedding_centroids(m, labels, 2);
    CHECK(c[0] == doctest::Approx(2.0));
    CHECK(c[1] == doctest::Approx(3.0));
    CHECK(c[2] == doctest::Approx(10.0));
    CHECK(c[3] == doctest::Approx(20.0));
}
