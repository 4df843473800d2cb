#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpat/jsonio.hpp"
#include "dpat/kernels.hpp"
#include "dpat/vector_store.hpp"

namespace dpat {

struct UmapParams {
    std::size_t n_neighbors = 15;       // searched in [5, 50]
    double min_dist = 0.1;              // searched in [0.01, 0.5]; spread fixed at 1.0
    std::size_t n_components = 2;       // searched in [2, 30]
    Metric metric = Metric::euclidean;  // cosine path runs on L2-normalized rows
    std::uint64_t seed = 0;
    std::size_t n_epochs = 200;
    std::size_t negative_sample_rate = 5;
    double learning_rate = 1.0;
    bool parallel_layout = false;  // opt-in; relaxes bit-reproducibility

    Json to_json() const;
};

using KnnGraph = kernels::KnnResult;

// Per-point smooth-kNN calibration: rho is the distance to the nearest
// positive-distance neighbor, sigma solves sum_j exp(-max(0,d-rho)/sigma) =
// log2(k) by binary search. degenerate[i] marks points whose neighbors all
// sit at distance zero; their weights are fixed at 1.
struct SmoothKnn {
    std::vector<double> rho;
    std::vector<double> sigma;
    std::vector<bool> degenerate;
};

struct FuzzyEdge {
    std::uint32_t head;
    std::uint32_t tail;
    double weight;  // in (0, 1]
};

// Symmetric weighted graph, both edge directions listed, sorted by (head,
// tail). No self-edges.
struct FuzzyGraph {
    std::size_t n = 0;
    std::vector<FuzzyEdge> edges;
};

struct ReducedCoords {
    std::size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<double> data;  // row-major, finite

    std::size_t rows() const { return ids.size(); }
    const double* row(std::size_t i) const { return data.data() + i * dim; }
};

KnnGraph knn_graph(const EmbeddingMatrix& matrix, std::size_t k, Metric metric,
                   Exec exec = Exec::parallel);

SmoothKnn smooth_knn(const KnnGraph& knn, Exec exec = Exec::parallel);
FuzzyGraph fuzzy_graph(const KnnGraph& knn, Exec exec = Exec::parallel);

// Least-squares fit of psi(d) = 1/(1 + a d^(2b)) against the min_dist-shifted
// exponential target over 300 points on [0, 3]; grid start plus damped
// Gauss-Newton. Errors out when the refinement fails to reach the optimum.
struct AbCurve {
    double a = 0.0;
    double b = 0.0;
    double rmse = 0.0;
};
AbCurve fit_ab_curve(double min_dist);

struct UmapResult {
    ReducedCoords coords;
    AbCurve curve;
    UmapParams params;

    Json metadata() const;  // full params and applied defaults
};

// Random normal init (scale 1e-2), per-edge SGD on the fuzzy cross-entropy
// with negative sampling; learning rate decays linearly to zero. Deterministic
// for a fixed seed unless parallel_layout is set.
UmapResult umap_fit(const EmbeddingMatrix& matrix, const UmapParams& params,
                    Exec exec = Exec::parallel);

// Rank-penalty trustworthiness of an output layout against the input metric.
double trustworthiness(const EmbeddingMatrix& input, Metric metric,
                       const ReducedCoords& output, std::size_t k);

// JSON-lines {id, coords:[...]} plus a sidecar-ready metadata record.
std::string serialize_reduced(const ReducedCoords& coords);
ReducedCoords parse_reduced(const std::string& text, const std::string& source_name);

}  // namespace dpat
