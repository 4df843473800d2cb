#include "doctest.h"

#include <cmath>
#include <vector>

#include "dpat/errors.hpp"
#include "dpat/kernels.hpp"
#include "dpat/rng.hpp"
#include "oracles.hpp"

using namespace dpat;

namespace {

std::vector<float> random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> data(n * dim);
    for (float& v : data) v = static_cast<float>(standard_normal(rng));
    return data;
}

}  // namespace

TEST_CASE("knn on collinear 1-D points") {
    const std::vector<float> data = {0.0f, 1.0f, 10.0f};
    const auto r = kernels::knn_scan(data.data(), 3, 1, 1, Metric::euclidean, Exec::serial);
    CHECK(r.indices[0] == 1);  // 0 -> 1
    CHECK(r.indices[1] == 0);  // 1 -> 0
    CHECK(r.indices[2] == 1);  // 10 -> 1
}

TEST_CASE("knn lists duplicated points at distance zero") {
    const std::vector<float> data = {2.0f, 5.0f, 2.0f, 9.0f};
    const auto r = kernels::knn_scan(data.data(), 4, 1, 1, Metric::euclidean, Exec::parallel);
    CHECK(r.indices[0] == 2);
    CHECK(r.distances[0] == 0.0);
    CHECK(r.indices[2] == 0);
    CHECK(r.distances[2] == 0.0);
}

TEST_CASE("knn rejects k >= n") {
    const std::vector<float> data = {0.0f, 1.0f};
    CHECK_THROWS_AS(kernels::knn_scan(data.data(), 2, 1, 2, Metric::euclidean, Exec::serial),
                    dpat::Error);
}

TEST_CASE("knn matches the full-sort oracle and both exec paths agree") {
    for (std::uint64_t seed : {11, 12, 13}) {
        const std::size_t n = 50, dim = 8, k = 5;
        auto data = random_matrix(n, dim, seed);
        for (Metric metric : {Metric::euclidean, Metric::cosine}) {
            if (metric == Metric::cosine) {
                // cosine contract expects unit rows
                for (std::size_t i = 0; i < n; ++i) {
                    double norm = 0.0;
                    for (std::size_t d = 0; d < dim; ++d) {
                        norm += static_cast<double>(data[i * dim + d]) * data[i * dim + d];
                    }
                    norm = std::sqrt(norm);
                    for (std::size_t d = 0; d < dim; ++d) {
                        data[i * dim + d] = static_cast<float>(data[i * dim + d] / norm);
                    }
                }
            }
            const auto serial = kernels::knn_scan(data.data(), n, dim, k, metric, Exec::serial);
            const auto parallel =
                kernels::knn_scan(data.data(), n, dim, k, metric, Exec::parallel);
            CHECK(serial.indices == parallel.indices);
            CHECK(serial.distances == parallel.distances);

            std::vector<std::uint32_t> oidx;
            std::vector<double> odist;
            oracles::knn_full_sort(data, n, dim, k, metric == Metric::cosine, oidx, odist);
            CHECK(serial.indices == oidx);
            for (std::size_t i = 0; i < n * k; ++i) {
                CHECK(serial.distances[i] == doctest::Approx(odist[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("assign_nearest breaks ties toward the lower centroid index") {
    const std::vector<double> points = {5.0};
    const std::vector<double> centroids = {4.0, 6.0};  // equidistant
    std::uint32_t label = 99;
    double sq = -1.0;
    kernels::assign_nearest(points.data(), 1, 1, centroids.data(), 2, &label, &sq, Exec::serial);
    CHECK(label == 0);
    CHECK(sq == doctest::Approx(1.0));
}

TEST_CASE("assign_nearest serial and parallel agree bit-for-bit") {
    Rng rng(99);
    const std::size_t n = 500, dim = 6, k = 7;
    std::vector<double> points(n * dim), centroids(k * dim);
    for (double& v : points) v = standard_normal(rng);
    for (double& v : centroids) v = standard_normal(rng);
    std::vector<std::uint32_t> l1(n), l2(n);
    std::vector<double> d1(n), d2(n);
    kernels::assign_nearest(points.data(), n, dim, centroids.data(), k, l1.data(), d1.data(),
                            Exec::serial);
    kernels::assign_nearest(points.data(), n, dim, centroids.data(), k, l2.data(), d2.data(),
                            Exec::parallel);
    CHECK(l1 == l2);
    CHECK(d1 == d2);
}

TEST_CASE("silhouette_terms serial and parallel agree bit-for-bit") {
    Rng rng(7);
    const std::size_t n = 120, dim = 3, k = 4;
    std::vector<double> points(n * dim);
    for (double& v : points) v = standard_normal(rng);
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % k);
    std::vector<double> s1(n), s2(n);
    kernels::silhouette_terms(points.data(), n, dim, labels.data(), k, s1.data(), Exec::serial);
    kernels::silhouette_terms(points.data(), n, dim, labels.data(), k, s2.data(),
                              Exec::parallel);
    CHECK(s1 == s2);
}
