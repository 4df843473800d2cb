#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dpat/kernels.hpp"
#include "dpat/vector_store.hpp"

namespace dpat {

struct KMeansParams {
    std::size_t k = 2;          // searched in [2, 10]
    std::size_t n_init = 10;    // restarts, best by inertia
    std::size_t max_iter = 300;
    double tol = 1e-6;          // relative inertia change
    std::uint64_t seed = 0;
};

struct KMeansModel {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<std::uint32_t> labels;
    std::vector<double> centroids;      // k x dim, row-major
    double inertia = 0.0;
    std::vector<double> inertia_trace;  // per Lloyd iteration of the winning restart
};

// Lloyd with k-means++ seeding; empty clusters are repaired by promoting the
// point farthest from its assigned centroid. Per-restart seeds derive from
// params.seed + restart index, so restarts can run in any order.
KMeansModel kmeans_fit(const std::vector<double>& coords, std::size_t n, std::size_t dim,
                       const KMeansParams& params, Exec exec = Exec::parallel);

// Per-cluster means of the member rows in original embedding space.
std::vector<double> embedding_centroids(const EmbeddingMatrix& matrix,
                                        const std::vector<std::uint32_t>& labels,
                                        std::size_t k);

struct ValidityMetrics {
    std::optional<double> silhouette;         // [-1, 1]
    std::optional<double> calinski_harabasz;  // >= 0; empty on zero dispersion
    std::optional<double> davies_bouldin;     // >= 0; empty on coincident centroids

    bool all_defined() const {
        return silhouette && calinski_harabasz && davies_bouldin;
    }
};

// Euclidean indices in the space where the clustering was performed.
ValidityMetrics validity_indices(const std::vector<double>& coords, std::size_t n,
                                 std::size_t dim, const std::vector<std::uint32_t>& labels,
                                 Exec exec = Exec::parallel);

// 0.5*silhouette_norm + 0.3*ch_norm + 0.2*(1 - db_norm); inputs must already
// be min-max normalized to [0,1].
double composite_score(double silhouette_norm, double ch_norm, double db_norm);

}  // namespace dpat
