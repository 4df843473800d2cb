#include "dpat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpat/errors.hpp"

namespace dpat::kernels {

double row_distance(const float* a, const float* b, std::size_t dim, Metric metric) {
    if (metric == Metric::euclidean) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
            acc += diff * diff;
        }
        return std::sqrt(acc);
    }
    // Cosine distance on L2-normalized rows: 1 - <a, b>.
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        dot += static_cast<double>(a[d]) * static_cast<double>(b[d]);
    }
    return std::max(0.0, 1.0 - dot);
}

double sq_distance(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        acc += diff * diff;
    }
    return acc;
}

namespace {

// One kNN row: full scan, partial sort of the k best, ties by lower index.
void knn_row(const float* data, std::size_t n, std::size_t dim, std::size_t k,
             Metric metric, std::size_t i, std::uint32_t* idx_out, double* dist_out,
             std::vector<std::pair<double, std::uint32_t>>& scratch) {
    scratch.clear();
    scratch.reserve(n - 1);
    const float* row = data + i * dim;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        scratch.emplace_back(row_distance(row, data + j * dim, dim, metric),
                             static_cast<std::uint32_t>(j));
    }
    std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                      scratch.end());
    for (std::size_t c = 0; c < k; ++c) {
        idx_out[c] = scratch[c].second;
        dist_out[c] = scratch[c].first;
    }
}

void assign_one(const double* points, std::size_t dim, const double* centroids,
                std::size_t k, std::size_t i, std::uint32_t* labels, double* sqdist) {
    const double* p = points + i * dim;
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_c = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_distance(p, centroids + c * dim, dim);
        if (d < best) {
            best = d;
            best_c = static_cast<std::uint32_t>(c);
        }
    }
    labels[i] = best_c;
    if (sqdist) sqdist[i] = best;
}

// Mean distance from point i to every cluster; a = own cluster (self excluded),
// b = min over the rest.
double silhouette_one(const double* points, std::size_t n, std::size_t dim,
                      const std::uint32_t* labels, std::size_t k,
                      const std::vector<std::size_t>& sizes, std::size_t i,
                      std::vector<double>& sums) {
    const std::uint32_t own = labels[i];
    if (sizes[own] <= 1) return 0.0;
    std::fill(sums.begin(), sums.end(), 0.0);
    const double* p = points + i * dim;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        sums[labels[j]] += std::sqrt(sq_distance(p, points + j * dim, dim));
    }
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        if (c == own || sizes[c] == 0) continue;
        b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double m = std::max(a, b);
    return m > 0.0 ? (b - a) / m : 0.0;
}

std::vector<std::size_t> cluster_sizes(const std::uint32_t* labels, std::size_t n,
                                       std::size_t k) {
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++sizes[labels[i]];
    return sizes;
}

}  // namespace

namespace ref {

KnnResult knn_scan(const float* data, std::size_t n, std::size_t dim, std::size_t k,
                   Metric metric) {
    if (k >= n) throw NumericError("knn: k must be smaller than the number of points");
    KnnResult out;
    out.n = n;
    out.k = k;
    out.indices.resize(n * k);
    out.distances.resize(n * k);
    std::vector<std::pair<double, std::uint32_t>> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        knn_row(data, n, dim, k, metric, i, out.indices.data() + i * k,
                out.distances.data() + i * k, scratch);
    }
    return out;
}

void assign_nearest(const double* points, std::size_t n, std::size_t dim,
                    const double* centroids, std::size_t k, std::uint32_t* labels,
                    double* sqdist) {
    for (std::size_t i = 0; i < n; ++i) {
        assign_one(points, dim, centroids, k, i, labels, sqdist);
    }
}

void silhouette_terms(const double* points, std::size_t n, std::size_t dim,
                      const std::uint32_t* labels, std::size_t k, double* s) {
    const auto sizes = cluster_sizes(labels, n, k);
    std::vector<double> sums(k);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = silhouette_one(points, n, dim, labels, k, sizes, i, sums);
    }
}

}  // namespace ref

KnnResult knn_scan(const float* data, std::size_t n, std::size_t dim, std::size_t k,
                   Metric metric, Exec exec) {
    if (exec == Exec::serial) return ref::knn_scan(data, n, dim, k, metric);
    if (k >= n) throw NumericError("knn: k must be smaller than the number of points");
    KnnResult out;
    out.n = n;
    out.k = k;
    out.indices.resize(n * k);
    out.distances.resize(n * k);
#pragma omp parallel
    {
        std::vector<std::pair<double, std::uint32_t>> scratch;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            knn_row(data, n, dim, k, metric, static_cast<std::size_t>(i),
                    out.indices.data() + static_cast<std::size_t>(i) * k,
                    out.distances.data() + static_cast<std::size_t>(i) * k, scratch);
        }
    }
    return out;
}

void assign_nearest(const double* points, std::size_t n, std::size_t dim,
                    const double* centroids, std::size_t k, std::uint32_t* labels,
                    double* sqdist, Exec exec) {
    if (exec == Exec::serial) {
        ref::assign_nearest(points, n, dim, centroids, k, labels, sqdist);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        assign_one(points, dim, centroids, k, static_cast<std::size_t>(i), labels, sqdist);
    }
}

void silhouette_terms(const double* points, std::size_t n, std::size_t dim,
                      const std::uint32_t* labels, std::size_t k, double* s, Exec exec) {
    if (exec == Exec::serial) {
        ref::silhouette_terms(points, n, dim, labels, k, s);
        return;
    }
    const auto sizes = cluster_sizes(labels, n, k);
#pragma omp parallel
    {
        std::vector<double> sums(k);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            s[i] = silhouette_one(points, n, dim, labels, k, sizes,
                                  static_cast<std::size_t>(i), sums);
        }
    }
}

}  // namespace dpat::kernels
