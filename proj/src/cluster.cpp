#include "dpat/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpat/errors.hpp"
#include "dpat/rng.hpp"

namespace dpat {

namespace {

// k-means++: first center uniform, then D^2-weighted draws.
std::vector<double> kmeanspp_centers(const std::vector<double>& coords, std::size_t n,
                                     std::size_t dim, std::size_t k, Rng& rng) {
    std::vector<double> centers(k * dim);
    std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());

    std::size_t first = uniform_index(rng, n);
    std::copy_n(coords.data() + first * dim, dim, centers.data());

    for (std::size_t c = 1; c < k; ++c) {
        const double* prev = centers.data() + (c - 1) * dim;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = kernels::sq_distance(coords.data() + i * dim, prev, dim);
            min_sq[i] = std::min(min_sq[i], d);
            total += min_sq[i];
        }
        std::size_t chosen;
        if (total <= 0.0) {
            chosen = uniform_index(rng, n);  // all points coincide with a center
        } else {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_sq[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        }
        std::copy_n(coords.data() + chosen * dim, dim, centers.data() + c * dim);
    }
    return centers;
}

struct LloydResult {
    std::vector<std::uint32_t> labels;
    std::vector<double> centroids;
    double inertia = 0.0;
    std::vector<double> trace;
};

LloydResult lloyd(const std::vector<double>& coords, std::size_t n, std::size_t dim,
                  const KMeansParams& params, Rng& rng, Exec exec) {
    const std::size_t k = params.k;
    LloydResult r;
    r.centroids = kmeanspp_centers(coords, n, dim, k, rng);
    r.labels.resize(n);
    std::vector<double> sqdist(n);
    std::vector<std::size_t> counts(k);

    double prev_inertia = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
        kernels::assign_nearest(coords.data(), n, dim, r.centroids.data(), k,
                                r.labels.data(), sqdist.data(), exec);

        // repair empty clusters before accepting the assignment
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) ++counts[r.labels[i]];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t farthest = 0;
            double best = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[r.labels[i]] <= 1) continue;  // keep donors non-empty
                if (sqdist[i] > best) {
                    best = sqdist[i];
                    farthest = i;
                }
            }
            --counts[r.labels[farthest]];
            r.labels[farthest] = static_cast<std::uint32_t>(c);
            counts[c] = 1;
            std::copy_n(coords.data() + farthest * dim, dim, r.centroids.data() + c * dim);
            sqdist[farthest] = 0.0;
        }

        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += sqdist[i];
        r.trace.push_back(inertia);

        // update step
        std::fill(r.centroids.begin(), r.centroids.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* c = r.centroids.data() + r.labels[i] * dim;
            const double* p = coords.data() + i * dim;
            for (std::size_t d = 0; d < dim; ++d) c[d] += p[d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            const double inv = 1.0 / static_cast<double>(counts[c]);
            for (std::size_t d = 0; d < dim; ++d) r.centroids[c * dim + d] *= inv;
        }

        if (prev_inertia == 0.0 ||
            (std::isfinite(prev_inertia) &&
             (prev_inertia - inertia) / prev_inertia < params.tol)) {
            r.inertia = inertia;
            break;
        }
        prev_inertia = inertia;
        r.inertia = inertia;
    }

    // final assignment against the last centroid update
    kernels::assign_nearest(coords.data(), n, dim, r.centroids.data(), k, r.labels.data(),
                            sqdist.data(), exec);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += sqdist[i];
    r.inertia = inertia;
    return r;
}

}  // namespace

KMeansModel kmeans_fit(const std::vector<double>& coords, std::size_t n, std::size_t dim,
                       const KMeansParams& params, Exec exec) {
    if (params.k < 1) throw NumericError("kmeans: k must be >= 1");
    if (n < params.k) throw NumericError("kmeans: fewer points than clusters");
    if (coords.size() != n * dim) throw NumericError("kmeans: coords size mismatch");

    LloydResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart < std::max<std::size_t>(1, params.n_init); ++restart) {
        Rng rng(derive_seed(params.seed, restart));
        LloydResult r = lloyd(coords, n, dim, params, rng, exec);
        if (r.inertia < best.inertia) best = std::move(r);
    }

    KMeansModel model;
    model.k = params.k;
    model.dim = dim;
    model.labels = std::move(best.labels);
    model.centroids = std::move(best.centroids);
    model.inertia = best.inertia;
    model.inertia_trace = std::move(best.trace);
    return model;
}

std::vector<double> embedding_centroids(const EmbeddingMatrix& matrix,
                                        const std::vector<std::uint32_t>& labels,
                                        std::size_t k) {
    if (labels.size() != matrix.rows()) {
        throw NumericError("embedding_centroids: label count != matrix rows");
    }
    std::vector<double> centroids(k * matrix.dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= k) throw NumericError("embedding_centroids: label out of range");
        ++counts[labels[i]];
        double* c = centroids.data() + labels[i] * matrix.dim;
        const float* row = matrix.row(i);
        for (std::size_t d = 0; d < matrix.dim; ++d) c[d] += static_cast<double>(row[d]);
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) throw NumericError("embedding_centroids: empty cluster");
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (std::size_t d = 0; d < matrix.dim; ++d) centroids[c * matrix.dim + d] *= inv;
    }
    return centroids;
}

ValidityMetrics validity_indices(const std::vector<double>& coords, std::size_t n,
                                 std::size_t dim, const std::vector<std::uint32_t>& labels,
                                 Exec exec) {
    if (labels.size() != n) throw NumericError("validity_indices: label count != n");
    std::size_t k = 0;
    for (std::uint32_t l : labels) k = std::max<std::size_t>(k, l + 1);
    if (k < 2) throw NumericError("validity_indices: need at least 2 clusters");
    std::vector<std::size_t> counts(k, 0);
    for (std::uint32_t l : labels) ++counts[l];
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) throw NumericError("validity_indices: cluster " +
                                               std::to_string(c) + " is empty");
    }

    ValidityMetrics m;

    // silhouette
    std::vector<double> s(n);
    kernels::silhouette_terms(coords.data(), n, dim, labels.data(), k, s.data(), exec);
    double s_sum = 0.0;
    for (double v : s) s_sum += v;
    m.silhouette = s_sum / static_cast<double>(n);

    // centroids and dispersion sums
    std::vector<double> centroids(k * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* c = centroids.data() + labels[i] * dim;
        const double* p = coords.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) c[d] += p[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t d = 0; d < dim; ++d) {
            centroids[c * dim + d] /= static_cast<double>(counts[c]);
        }
    }
    std::vector<double> grand(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) grand[d] += coords[i * dim + d];
    }
    for (std::size_t d = 0; d < dim; ++d) grand[d] /= static_cast<double>(n);

    double within = 0.0;
    std::vector<double> mean_dist(k, 0.0);  // S_c: mean member distance to centroid
    for (std::size_t i = 0; i < n; ++i) {
        const double sq = kernels::sq_distance(coords.data() + i * dim,
                                               centroids.data() + labels[i] * dim, dim);
        within += sq;
        mean_dist[labels[i]] += std::sqrt(sq);
    }
    for (std::size_t c = 0; c < k; ++c) mean_dist[c] /= static_cast<double>(counts[c]);

    double between = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        between += static_cast<double>(counts[c]) *
                   kernels::sq_distance(centroids.data() + c * dim, grand.data(), dim);
    }

    if (within > 0.0 && n > k) {
        m.calinski_harabasz = (between / static_cast<double>(k - 1)) /
                              (within / static_cast<double>(n - k));
    } else if (within == 0.0 && between > 0.0 && n > k) {
        // perfectly tight distinct clusters: infinite separation ratio
        m.calinski_harabasz = std::numeric_limits<double>::infinity();
    }

    double db_sum = 0.0;
    bool db_ok = true;
    for (std::size_t c = 0; c < k && db_ok; ++c) {
        double worst = 0.0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            const double sep = std::sqrt(kernels::sq_distance(
                centroids.data() + c * dim, centroids.data() + o * dim, dim));
            if (sep == 0.0) {
                db_ok = false;
                break;
            }
            worst = std::max(worst, (mean_dist[c] + mean_dist[o]) / sep);
        }
        db_sum += worst;
    }
    if (db_ok) m.davies_bouldin = db_sum / static_cast<double>(k);

    return m;
}

double composite_score(double silhouette_norm, double ch_norm, double db_norm) {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string("composite_score: ") + name +
                                        " outside [0,1]");
        }
    };
    check(silhouette_norm, "silhouette_norm");
    check(ch_norm, "ch_norm");
    check(db_norm, "db_norm");
    return 0.5 * silhouette_norm + 0.3 * ch_norm + 0.2 * (1.0 - db_norm);
}

}  // namespace dpat
