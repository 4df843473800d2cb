#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "dpat/cluster.hpp"
#include "dpat/kernels.hpp"
#include "dpat/rng.hpp"
#include "dpat/vector_store.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// Times the serial reference kernels against the OpenMP versions on synthetic
// inputs of increasing size. Outputs one row per kernel per size.

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        const auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: not enabled\n");
#endif
    std::printf("%-18s %8s %10s %12s %12s %8s\n", "kernel", "n", "dim", "serial_ms",
                "parallel_ms", "speedup");

    dpat::Rng rng(42);
    for (const std::size_t n : {500u, 2000u}) {
        const std::size_t dim = 64;
        std::vector<float> data(n * dim);
        for (float& v : data) v = static_cast<float>(dpat::standard_normal(rng));

        const std::size_t k = 15;
        const double ts = time_ms(
            [&] {
                dpat::kernels::knn_scan(data.data(), n, dim, k, dpat::Metric::euclidean,
                                        dpat::Exec::serial);
            },
            3);
        const double tp = time_ms(
            [&] {
                dpat::kernels::knn_scan(data.data(), n, dim, k, dpat::Metric::euclidean,
                                        dpat::Exec::parallel);
            },
            3);
        std::printf("%-18s %8zu %10zu %12.2f %12.2f %7.2fx\n", "knn_scan", n, dim, ts, tp,
                    ts / tp);
    }

    for (const std::size_t n : {2000u, 20000u}) {
        const std::size_t dim = 8;
        const std::size_t k = 10;
        std::vector<double> points(n * dim);
        for (double& v : points) v = dpat::standard_normal(rng);
        std::vector<double> centroids(k * dim);
        for (double& v : centroids) v = dpat::standard_normal(rng);
        std::vector<std::uint32_t> labels(n);
        std::vector<double> sqdist(n);

        const double ts = time_ms(
            [&] {
                dpat::kernels::assign_nearest(points.data(), n, dim, centroids.data(), k,
                                              labels.data(), sqdist.data(), dpat::Exec::serial);
            },
            5);
        const double tp = time_ms(
            [&] {
                dpat::kernels::assign_nearest(points.data(), n, dim, centroids.data(), k,
                                              labels.data(), sqdist.data(),
                                              dpat::Exec::parallel);
            },
            5);
        std::printf("%-18s %8zu %10zu %12.2f %12.2f %7.2fx\n", "assign_nearest", n, dim, ts, tp,
                    ts / tp);
    }

    for (const std::size_t n : {1000u, 4000u}) {
        const std::size_t dim = 4;
        const std::size_t k = 6;
        std::vector<double> points(n * dim);
        for (double& v : points) v = dpat::standard_normal(rng);
        std::vector<std::uint32_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % k);
        std::vector<double> s(n);

        const double ts = time_ms(
            [&] {
                dpat::kernels::silhouette_terms(points.data(), n, dim, labels.data(), k,
                                                s.data(), dpat::Exec::serial);
            },
            3);
        const double tp = time_ms(
            [&] {
                dpat::kernels::silhouette_terms(points.data(), n, dim, labels.data(), k,
                                                s.data(), dpat::Exec::parallel);
            },
            3);
        std::printf("%-18s %8zu %10zu %12.2f %12.2f %7.2fx\n", "silhouette_terms", n, dim, ts,
                    tp, ts / tp);
    }
    return 0;
}
