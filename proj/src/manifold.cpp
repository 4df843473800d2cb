#include "dpat/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "dpat/errors.hpp"
#include "dpat/rng.hpp"

namespace dpat {

Json UmapParams::to_json() const {
    Json j;
    j["n_neighbors"] = n_neighbors;
    j["min_dist"] = min_dist;
    j["n_components"] = n_components;
    j["metric"] = metric == Metric::euclidean ? "euclidean" : "cosine";
    j["seed"] = seed;
    j["n_epochs"] = n_epochs;
    j["negative_sample_rate"] = negative_sample_rate;
    j["learning_rate"] = learning_rate;
    j["spread"] = 1.0;
    j["init"] = "random_normal_1e-2";
    j["parallel_layout"] = parallel_layout;
    return j;
}

KnnGraph knn_graph(const EmbeddingMatrix& matrix, std::size_t k, Metric metric, Exec exec) {
    if (k < 1) throw NumericError("knn_graph: k must be >= 1");
    if (k >= matrix.rows()) throw NumericError("knn_graph: k must be < number of points");
    if (metric == Metric::cosine) {
        const EmbeddingMatrix unit = l2_normalize(matrix);
        return kernels::knn_scan(unit.data.data(), unit.rows(), unit.dim, k, metric, exec);
    }
    return kernels::knn_scan(matrix.data.data(), matrix.rows(), matrix.dim, k, metric, exec);
}

namespace {

constexpr int kSigmaIters = 64;
constexpr double kSigmaTol = 1e-5;

void calibrate_point(const KnnGraph& knn, std::size_t i, double target, SmoothKnn& out) {
    const double* dists = knn.distances.data() + i * knn.k;
    double rho = -1.0;
    for (std::size_t c = 0; c < knn.k; ++c) {
        if (dists[c] > 0.0) {
            rho = dists[c];
            break;
        }
    }
    if (rho < 0.0) {
        out.rho[i] = 0.0;
        out.sigma[i] = 0.0;
        out.degenerate[i] = true;
        return;
    }
    out.rho[i] = rho;
    out.degenerate[i] = false;

    auto weight_sum = [&](double sigma) {
        double sum = 0.0;
        for (std::size_t c = 0; c < knn.k; ++c) {
            const double gap = std::max(0.0, dists[c] - rho);
            sum += std::exp(-gap / sigma);
        }
        return sum;
    };

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    for (int it = 0; it < kSigmaIters; ++it) {
        const double sum = weight_sum(mid);
        if (std::fabs(sum - target) < kSigmaTol) break;
        if (sum > target) {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
        }
    }
    out.sigma[i] = std::max(mid, 1e-12);
}

}  // namespace

SmoothKnn smooth_knn(const KnnGraph& knn, Exec exec) {
    const std::size_t n = knn.n;
    SmoothKnn out;
    out.rho.resize(n);
    out.sigma.resize(n);
    out.degenerate.assign(n, false);
    const double target = std::log2(static_cast<double>(knn.k));
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            calibrate_point(knn, static_cast<std::size_t>(i), target, out);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) calibrate_point(knn, i, target, out);
    }
    return out;
}

FuzzyGraph fuzzy_graph(const KnnGraph& knn, Exec exec) {
    const std::size_t n = knn.n;
    const SmoothKnn cal = smooth_knn(knn, exec);

    // directed membership weights
    std::unordered_map<std::uint64_t, double> directed;
    directed.reserve(n * knn.k * 2);
    auto key = [n](std::uint32_t a, std::uint32_t b) {
        return static_cast<std::uint64_t>(a) * n + b;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < knn.k; ++c) {
            const std::uint32_t j = knn.indices[i * knn.k + c];
            double w = 1.0;
            if (!cal.degenerate[i]) {
                const double gap = std::max(0.0, knn.distances[i * knn.k + c] - cal.rho[i]);
                w = std::exp(-gap / cal.sigma[i]);
            }
            directed[key(static_cast<std::uint32_t>(i), j)] = w;
        }
    }

    // probabilistic union: w + w' - w*w'
    FuzzyGraph g;
    g.n = n;
    g.edges.reserve(directed.size());
    for (const auto& [k64, w] : directed) {
        const std::uint32_t i = static_cast<std::uint32_t>(k64 / n);
        const std::uint32_t j = static_cast<std::uint32_t>(k64 % n);
        const auto back = directed.find(key(j, i));
        if (i > j && back != directed.end()) continue;  // pair handled from the (i<j) side
        const double wb = back == directed.end() ? 0.0 : back->second;
        const double u = w + wb - w * wb;
        if (u <= 0.0) continue;
        g.edges.push_back({i, j, u});
        g.edges.push_back({j, i, u});
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const FuzzyEdge& a, const FuzzyEdge& b) {
        return a.head != b.head ? a.head < b.head : a.tail < b.tail;
    });
    return g;
}

namespace {

double psi(double d, double a, double b) { return 1.0 / (1.0 + a * std::pow(d, 2.0 * b)); }

}  // namespace

AbCurve fit_ab_curve(double min_dist) {
    if (!(min_dist > 0.0 && min_dist < 1.0)) {
        throw NumericError("fit_ab_curve: min_dist must be in (0, 1)");
    }
    constexpr int kPoints = 300;
    std::vector<double> xs(kPoints), target(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        const double d = 3.0 * static_cast<double>(i) / (kPoints - 1);
        xs[i] = d;
        target[i] = d <= min_dist ? 1.0 : std::exp(-(d - min_dist));
    }

    auto sse = [&](double a, double b) {
        double acc = 0.0;
        for (int i = 0; i < kPoints; ++i) {
            const double r = psi(xs[i], a, b) - target[i];
            acc += r * r;
        }
        return acc;
    };

    // coarse grid, then damped Gauss-Newton refinement
    double best_a = 1.0, best_b = 1.0, best = sse(1.0, 1.0);
    for (int ia = 0; ia <= 40; ++ia) {
        const double a = 0.05 * std::pow(200.0, ia / 40.0);  // 0.05 .. 10
        for (int ib = 0; ib <= 40; ++ib) {
            const double b = 0.3 + 2.7 * ib / 40.0;  // 0.3 .. 3.0
            const double s = sse(a, b);
            if (s < best) {
                best = s;
                best_a = a;
                best_b = b;
            }
        }
    }

    double a = best_a, b = best_b, lambda = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        double jtj00 = 0.0, jtj01 = 0.0, jtj11 = 0.0, jtr0 = 0.0, jtr1 = 0.0;
        for (int i = 0; i < kPoints; ++i) {
            const double d = xs[i];
            const double t = d > 0.0 ? std::pow(d, 2.0 * b) : 0.0;
            const double denom = 1.0 + a * t;
            const double r = 1.0 / denom - target[i];
            const double da = -t / (denom * denom);
            const double db = d > 0.0 ? -2.0 * a * t * std::log(d) / (denom * denom) : 0.0;
            jtj00 += da * da;
            jtj01 += da * db;
            jtj11 += db * db;
            jtr0 += da * r;
            jtr1 += db * r;
        }
        const double m00 = jtj00 + lambda, m11 = jtj11 + lambda;
        const double det = m00 * m11 - jtj01 * jtj01;
        if (det == 0.0) break;
        const double step_a = (-jtr0 * m11 + jtr1 * jtj01) / det;
        const double step_b = (-jtr1 * m00 + jtr0 * jtj01) / det;
        const double na = a + step_a, nb = b + step_b;
        if (na > 0.0 && nb > 0.0 && sse(na, nb) < sse(a, b)) {
            a = na;
            b = nb;
            lambda = std::max(lambda * 0.5, 1e-12);
            if (std::fabs(step_a) < 1e-12 && std::fabs(step_b) < 1e-12) break;
        } else {
            lambda *= 4.0;
            if (lambda > 1e12) break;
        }
    }

    AbCurve out;
    out.a = a;
    out.b = b;
    out.rmse = std::sqrt(sse(a, b) / kPoints);
    // The exact least-squares optimum of this family against the shifted
    // exponential sits between 0.013 and 0.032 RMSE over min_dist in (0,1),
    // so anything above 0.05 means the refinement diverged.
    if (!(out.rmse < 0.05)) {
        throw NumericError("fit_ab_curve: no convergence, RMSE " + std::to_string(out.rmse));
    }
    return out;
}

namespace {

inline float clip4(float v) { return v > 4.0f ? 4.0f : (v < -4.0f ? -4.0f : v); }

void sgd_positive(float* head, float* tail, std::size_t dim, float a, float b, float alpha,
                  bool move_other) {
    float d2 = 0.0f;
    for (std::size_t d = 0; d < dim; ++d) {
        const float diff = head[d] - tail[d];
        d2 += diff * diff;
    }
    if (d2 <= 0.0f) return;
    const float pw = std::pow(d2, b);  // d^{2b}
    const float coeff = -2.0f * a * b * pw / (d2 * (1.0f + a * pw));
    for (std::size_t d = 0; d < dim; ++d) {
        const float g = clip4(coeff * (head[d] - tail[d]));
        head[d] += alpha * g;
        if (move_other) tail[d] -= alpha * g;
    }
}

void sgd_negative(float* head, const float* other, std::size_t dim, float a, float b,
                  float alpha) {
    float d2 = 0.0f;
    for (std::size_t d = 0; d < dim; ++d) {
        const float diff = head[d] - other[d];
        d2 += diff * diff;
    }
    if (d2 > 0.0f) {
        const float pw = std::pow(d2, b);
        const float coeff = 2.0f * b / ((0.001f + d2) * (1.0f + a * pw));
        for (std::size_t d = 0; d < dim; ++d) {
            head[d] += alpha * clip4(coeff * (head[d] - other[d]));
        }
    } else {
        for (std::size_t d = 0; d < dim; ++d) head[d] += alpha * 4.0f;
    }
}

void optimize_layout(std::vector<float>& layout, std::size_t n, std::size_t dim,
                     const FuzzyGraph& graph, const UmapParams& params, const AbCurve& curve,
                     Rng& rng) {
    const std::size_t m = graph.edges.size();
    if (m == 0) return;
    double max_w = 0.0;
    for (const auto& e : graph.edges) max_w = std::max(max_w, e.weight);
    std::vector<double> epochs_per_sample(m), next_sample(m);
    for (std::size_t e = 0; e < m; ++e) {
        epochs_per_sample[e] = max_w / graph.edges[e].weight;
        next_sample[e] = epochs_per_sample[e];
    }

    const float a = static_cast<float>(curve.a);
    const float b = static_cast<float>(curve.b);
    const float lr = static_cast<float>(params.learning_rate);
    const std::size_t n_epochs = params.n_epochs;

    for (std::size_t epoch = 0; epoch < n_epochs; ++epoch) {
        const float alpha =
            lr * (1.0f - static_cast<float>(epoch) / static_cast<float>(n_epochs));
        for (std::size_t e = 0; e < m; ++e) {
            if (next_sample[e] > static_cast<double>(epoch)) continue;
            next_sample[e] += epochs_per_sample[e];
            const auto& edge = graph.edges[e];
            float* head = layout.data() + edge.head * dim;
            float* tail = layout.data() + edge.tail * dim;
            sgd_positive(head, tail, dim, a, b, alpha, /*move_other=*/true);
            for (std::size_t s = 0; s < params.negative_sample_rate; ++s) {
                const std::size_t r = uniform_index(rng, n);
                if (r == edge.head) continue;
                sgd_negative(head, layout.data() + r * dim, dim, a, b, alpha);
            }
        }
    }
}

// Same update rules, edges processed concurrently without ordering guarantees.
void optimize_layout_parallel(std::vector<float>& layout, std::size_t n, std::size_t dim,
                              const FuzzyGraph& graph, const UmapParams& params,
                              const AbCurve& curve, std::uint64_t seed) {
    const std::size_t m = graph.edges.size();
    if (m == 0) return;
    double max_w = 0.0;
    for (const auto& e : graph.edges) max_w = std::max(max_w, e.weight);
    std::vector<double> epochs_per_sample(m), next_sample(m);
    for (std::size_t e = 0; e < m; ++e) {
        epochs_per_sample[e] = max_w / graph.edges[e].weight;
        next_sample[e] = epochs_per_sample[e];
    }
    const float a = static_cast<float>(curve.a);
    const float b = static_cast<float>(curve.b);
    const float lr = static_cast<float>(params.learning_rate);

    for (std::size_t epoch = 0; epoch < params.n_epochs; ++epoch) {
        const float alpha =
            lr * (1.0f - static_cast<float>(epoch) / static_cast<float>(params.n_epochs));
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(m); ++e) {
            if (next_sample[e] > static_cast<double>(epoch)) continue;
            next_sample[e] += epochs_per_sample[e];
            const auto& edge = graph.edges[e];
            Rng rng(derive_seed(seed, epoch * m + static_cast<std::size_t>(e)));
            float* head = layout.data() + edge.head * dim;
            float* tail = layout.data() + edge.tail * dim;
            sgd_positive(head, tail, dim, a, b, alpha, true);
            for (std::size_t s = 0; s < params.negative_sample_rate; ++s) {
                const std::size_t r = uniform_index(rng, n);
                if (r == edge.head) continue;
                sgd_negative(head, layout.data() + r * dim, dim, a, b, alpha);
            }
        }
    }
}

void validate_params(const UmapParams& p, std::size_t n) {
    if (p.n_neighbors < 2) throw NumericError("umap: n_neighbors must be >= 2");
    if (p.n_neighbors >= n) throw NumericError("umap: n_neighbors must be < number of points");
    if (!(p.min_dist > 0.0 && p.min_dist < 1.0)) {
        throw NumericError("umap: min_dist must be in (0, 1)");
    }
    if (p.n_components < 1) throw NumericError("umap: n_components must be >= 1");
    if (p.n_epochs < 1) throw NumericError("umap: n_epochs must be >= 1");
    if (p.negative_sample_rate < 1) throw NumericError("umap: negative_sample_rate must be >= 1");
    if (!(p.learning_rate > 0.0)) throw NumericError("umap: learning_rate must be > 0");
}

}  // namespace

UmapResult umap_fit(const EmbeddingMatrix& matrix, const UmapParams& params, Exec exec) {
    const std::size_t n = matrix.rows();
    validate_params(params, n);

    const KnnGraph knn = knn_graph(matrix, params.n_neighbors, params.metric, exec);
    const FuzzyGraph graph = fuzzy_graph(knn, exec);
    const AbCurve curve = fit_ab_curve(params.min_dist);

    const std::size_t dim = params.n_components;
    std::vector<float> layout(n * dim);
    Rng rng(derive_seed(params.seed, 0x756d6170ULL));  // layout stream
    for (std::size_t i = 0; i < layout.size(); ++i) {
        layout[i] = static_cast<float>(standard_normal(rng) * 1e-2);
    }

    if (params.parallel_layout) {
        optimize_layout_parallel(layout, n, dim, graph, params, curve,
                                 derive_seed(params.seed, 0x6e656761ULL));
    } else {
        optimize_layout(layout, n, dim, graph, params, curve, rng);
    }

    UmapResult out;
    out.curve = curve;
    out.params = params;
    out.coords.dim = dim;
    out.coords.ids = matrix.ids;
    out.coords.data.resize(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const double v = static_cast<double>(layout[i]);
        if (!std::isfinite(v)) throw NumericError("umap: non-finite coordinate in layout");
        out.coords.data[i] = v;
    }
    return out;
}

Json UmapResult::metadata() const {
    Json j;
    j["params"] = params.to_json();
    j["curve_a"] = curve.a;
    j["curve_b"] = curve.b;
    j["curve_rmse"] = curve.rmse;
    j["deterministic"] = !params.parallel_layout;
    return j;
}

double trustworthiness(const EmbeddingMatrix& input, Metric metric,
                       const ReducedCoords& output, std::size_t k) {
    const std::size_t n = input.rows();
    if (output.rows() != n) throw NumericError("trustworthiness: row count mismatch");
    if (k < 1 || 2 * n <= 3 * k + 1) throw NumericError("trustworthiness: k too large");

    const EmbeddingMatrix* in = &input;
    EmbeddingMatrix unit;
    if (metric == Metric::cosine) {
        unit = l2_normalize(input);
        in = &unit;
    }

    // input-space ranks per row (1-based, ties by lower index)
    std::vector<std::uint32_t> rank(n * n, 0);
    std::vector<std::pair<double, std::uint32_t>> order;
    for (std::size_t i = 0; i < n; ++i) {
        order.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            order.emplace_back(kernels::row_distance(in->row(i), in->row(j), in->dim, metric),
                               static_cast<std::uint32_t>(j));
        }
        std::sort(order.begin(), order.end());
        for (std::size_t r = 0; r < order.size(); ++r) {
            rank[i * n + order[r].second] = static_cast<std::uint32_t>(r + 1);
        }
    }

    // output-space k nearest neighbors per row
    double penalty = 0.0;
    std::vector<std::pair<double, std::uint32_t>> out_order;
    for (std::size_t i = 0; i < n; ++i) {
        out_order.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            out_order.emplace_back(kernels::sq_distance(output.row(i), output.row(j), output.dim),
                                   static_cast<std::uint32_t>(j));
        }
        std::partial_sort(out_order.begin(), out_order.begin() + static_cast<std::ptrdiff_t>(k),
                          out_order.end());
        for (std::size_t c = 0; c < k; ++c) {
            const std::uint32_t j = out_order[c].second;
            const std::uint32_t r = rank[i * n + j];
            if (r > k) penalty += static_cast<double>(r - k);
        }
    }
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    return 1.0 - 2.0 / (nn * kk * (2.0 * nn - 3.0 * kk - 1.0)) * penalty;
}

std::string serialize_reduced(const ReducedCoords& coords) {
    std::string out;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        Json rec;
        rec["id"] = coords.ids[i];
        Json arr = Json::array();
        for (std::size_t d = 0; d < coords.dim; ++d) arr.push_back(coords.data[i * coords.dim + d]);
        rec["coords"] = std::move(arr);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

ReducedCoords parse_reduced(const std::string& text, const std::string& source_name) {
    ReducedCoords out;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        const Json rec = parse_json(line, source_name + ":" + std::to_string(line_no));
        const auto& arr = rec.at("coords");
        if (out.dim == 0) out.dim = arr.size();
        if (arr.size() != out.dim) {
            throw DataError(source_name + ": inconsistent coordinate dimension");
        }
        out.ids.push_back(rec.at("id").get<std::string>());
        for (const auto& v : arr) out.data.push_back(v.get<double>());
    }
    return out;
}

}  // namespace dpat
