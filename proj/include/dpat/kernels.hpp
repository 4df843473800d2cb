#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dpat {

enum class Metric { euclidean, cosine };

// Execution policy for the data-parallel kernels. Both paths compute each
// output element with identical operation order, so results are bit-equal;
// tests assert that and the benchmark compares throughput.
enum class Exec { serial, parallel };

namespace kernels {

// Flattened n x k neighbor lists, distances non-decreasing within each row,
// ties broken by lower column index. A point never lists itself.
struct KnnResult {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> indices;  // n*k
    std::vector<double> distances;       // n*k
};

double row_distance(const float* a, const float* b, std::size_t dim, Metric metric);
double sq_distance(const double* a, const double* b, std::size_t dim);

KnnResult knn_scan(const float* data, std::size_t n, std::size_t dim, std::size_t k,
                   Metric metric, Exec exec);

// Nearest-centroid assignment under squared Euclidean distance; ties go to
// the lower centroid index. sqdist may be null.
void assign_nearest(const double* points, std::size_t n, std::size_t dim,
                    const double* centroids, std::size_t k, std::uint32_t* labels,
                    double* sqdist, Exec exec);

// Per-point silhouette values s(i) = (b-a)/max(a,b); singleton clusters get 0.
void silhouette_terms(const double* points, std::size_t n, std::size_t dim,
                      const std::uint32_t* labels, std::size_t k, double* s, Exec exec);

namespace ref {
// Serial reference implementations, kept verbatim for the equality tests and
// the benchmark baseline.
KnnResult knn_scan(const float* data, std::size_t n, std::size_t dim, std::size_t k,
                   Metric metric);
void assign_nearest(const double* points, std::size_t n, std::size_t dim,
                    const double* centroids, std::size_t k, std::uint32_t* labels,
                    double* sqdist);
void silhouette_terms(const double* points, std::size_t n, std::size_t dim,
                      const std::uint32_t* labels, std::size_t k, double* s);
}  // namespace ref

}  // namespace kernels
}  // namespace dpat
