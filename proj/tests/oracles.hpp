#pragma once

// Independent brute-force oracles for the statistical kernels. These are
// deliberately written against the textbook definitions with different code
// structure than the library (counting instead of sorting, permutations
// instead of combinations, closed forms instead of continued fractions) so a
// shared bug is unlikely.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace oracles {

// rank by counting: 1 + #smaller + (#equal - 1)/2
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t smaller = 0, equal = 0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++smaller;
            else if (v[j] == v[i]) ++equal;
        }
        out[i] = 1.0 + static_cast<double>(smaller) + (static_cast<double>(equal) - 1.0) / 2.0;
    }
    return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    const double cov = n * sxy - sx * sy;
    const double vx = n * sxx - sx * sx;
    const double vy = n * syy - sy * sy;
    return cov / std::sqrt(vx * vy);
}

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

// Two-sided Student-t tail probability by the Abramowitz & Stegun finite
// sums (26.7.3/26.7.4), exact for integer df.
inline double t_two_sided_p(double t, int df) {
    const double theta = std::atan(std::fabs(t) / std::sqrt(static_cast<double>(df)));
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    if (df == 1) return 1.0 - 2.0 * theta / M_PI;
    if (df % 2 == 1) {
        // A = 2/pi * (theta + sin*sum), sum over cos^(2i) with odd coefficients
        double term = c;
        double sum = term;
        for (int i = 2; i <= df - 2; i += 2) {
            term *= c * c * static_cast<double>(i) / static_cast<double>(i + 1);
            sum += term;
        }
        return 1.0 - 2.0 / M_PI * (theta + s * sum);
    }
    double term = 1.0;
    double sum = term;
    for (int i = 1; i <= df - 3; i += 2) {
        term *= c * c * static_cast<double>(i) / static_cast<double>(i + 1);
        sum += term;
    }
    return 1.0 - s * sum;
}

inline double spearman_p(double rho, std::size_t n) {
    if (std::fabs(rho) >= 1.0) return 0.0;
    const double t = rho * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - rho * rho));
    return t_two_sided_p(t, static_cast<int>(n) - 2);
}

// textbook BH step-up with the strict `<` convention: reject the i smallest
// p-values where i is the largest sorted position with p_(i) * m / i < alpha
inline std::vector<bool> bh_reject(const std::vector<double>& p, double alpha) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::size_t cutoff = 0;  // number of rejections
    for (std::size_t i = m; i >= 1; --i) {
        if (p[order[i - 1]] * static_cast<double>(m) / static_cast<double>(i) < alpha) {
            cutoff = i;
            break;
        }
    }
    std::vector<bool> reject(m, false);
    for (std::size_t i = 0; i < cutoff; ++i) reject[order[i]] = true;
    return reject;
}

// U by pair counting
inline double mwu_u(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0.0;
    for (double x : a) {
        for (double y : b) {
            if (x > y) u += 1.0;
            else if (x == y) u += 0.5;
        }
    }
    return u;
}

// exact two-sided p by permuting group labels (multiset permutations)
inline double mwu_exact_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<int> labels(a.size(), 0);
    labels.resize(pooled.size(), 1);
    std::sort(labels.begin(), labels.end());

    const double mu = static_cast<double>(a.size()) * static_cast<double>(b.size()) / 2.0;
    const double obs = std::fabs(mwu_u(a, b) - mu);
    std::size_t total = 0, extreme = 0;
    do {
        std::vector<double> ga, gb;
        for (std::size_t i = 0; i < pooled.size(); ++i) {
            (labels[i] == 0 ? ga : gb).push_back(pooled[i]);
        }
        ++total;
        if (std::fabs(mwu_u(ga, gb) - mu) >= obs - 1e-12) ++extreme;
    } while (std::next_permutation(labels.begin(), labels.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

inline double kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, double> ma, mb;
    double agree = 0.0;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma[a[i]] += 1.0;
        mb[b[i]] += 1.0;
        if (a[i] == b[i]) agree += 1.0;
    }
    double pe = 0.0;
    for (const auto& [cat, ca] : ma) {
        const auto it = mb.find(cat);
        if (it != mb.end()) pe += (ca / n) * (it->second / n);
    }
    return (agree / n - pe) / (1.0 - pe);
}

inline double variance_n1(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / (static_cast<double>(v.size()) - 1.0);
}

inline double cronbach(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size(), k = rows[0].size();
    double item_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = rows[i][j];
        item_sum += variance_n1(col);
    }
    std::vector<double> totals(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) totals[i] += rows[i][j];
    }
    const double kk = static_cast<double>(k);
    return kk / (kk - 1.0) * (1.0 - item_sum / variance_n1(totals));
}

// --- clustering index oracles on a full distance matrix -------------------

inline std::vector<std::vector<double>> dist_matrix(const std::vector<double>& pts,
                                                    std::size_t n, std::size_t dim) {
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double diff = pts[i * dim + c] - pts[j * dim + c];
                acc += diff * diff;
            }
            d[i][j] = std::sqrt(acc);
        }
    }
    return d;
}

inline double silhouette(const std::vector<double>& pts, std::size_t n, std::size_t dim,
                         const std::vector<std::uint32_t>& labels, std::size_t k) {
    const auto d = dist_matrix(pts, n, dim);
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) continue;  // singleton contributes 0
        std::vector<double> mean_to(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) mean_to[labels[j]] += d[i][j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            const double denom = static_cast<double>(c == labels[i] ? sizes[c] - 1 : sizes[c]);
            if (denom > 0) mean_to[c] /= denom;
        }
        const double a = mean_to[labels[i]];
        double b = 1e300;
        for (std::size_t c = 0; c < k; ++c) {
            if (c != labels[i] && sizes[c] > 0) b = std::min(b, mean_to[c]);
        }
        if (std::max(a, b) > 0) total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

inline std::vector<std::vector<double>> centroids_of(const std::vector<double>& pts,
                                                     std::size_t n, std::size_t dim,
                                                     const std::vector<std::uint32_t>& labels,
                                                     std::size_t k) {
    std::vector<std::vector<double>> c(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++sizes[labels[i]];
        for (std::size_t e = 0; e < dim; ++e) c[labels[i]][e] += pts[i * dim + e];
    }
    for (std::size_t g = 0; g < k; ++g) {
        for (std::size_t e = 0; e < dim; ++e) c[g][e] /= static_cast<double>(sizes[g]);
    }
    return c;
}

inline double calinski_harabasz(const std::vector<double>& pts, std::size_t n, std::size_t dim,
                                const std::vector<std::uint32_t>& labels, std::size_t k) {
    const auto cent = centroids_of(pts, n, dim, labels, k);
    std::vector<double> grand(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = 0; e < dim; ++e) grand[e] += pts[i * dim + e];
    }
    for (std::size_t e = 0; e < dim; ++e) grand[e] /= static_cast<double>(n);
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    double between = 0.0, within = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        double acc = 0.0;
        for (std::size_t e = 0; e < dim; ++e) {
            acc += (cent[g][e] - grand[e]) * (cent[g][e] - grand[e]);
        }
        between += static_cast<double>(sizes[g]) * acc;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = 0; e < dim; ++e) {
            within += (pts[i * dim + e] - cent[labels[i]][e]) * (pts[i * dim + e] - cent[labels[i]][e]);
        }
    }
    return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

inline double davies_bouldin(const std::vector<double>& pts, std::size_t n, std::size_t dim,
                             const std::vector<std::uint32_t>& labels, std::size_t k) {
    const auto cent = centroids_of(pts, n, dim, labels, k);
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    std::vector<double> scatter(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t e = 0; e < dim; ++e) {
            acc += (pts[i * dim + e] - cent[labels[i]][e]) * (pts[i * dim + e] - cent[labels[i]][e]);
        }
        scatter[labels[i]] += std::sqrt(acc);
    }
    for (std::size_t g = 0; g < k; ++g) scatter[g] /= static_cast<double>(sizes[g]);
    double total = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        double worst = 0.0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == g) continue;
            double sep = 0.0;
            for (std::size_t e = 0; e < dim; ++e) {
                sep += (cent[g][e] - cent[o][e]) * (cent[g][e] - cent[o][e]);
            }
            worst = std::max(worst, (scatter[g] + scatter[o]) / std::sqrt(sep));
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

// full-sort exact kNN, ties by lower index
inline void knn_full_sort(const std::vector<float>& data, std::size_t n, std::size_t dim,
                          std::size_t k, bool cosine, std::vector<std::uint32_t>& idx,
                          std::vector<double>& dist) {
    idx.assign(n * k, 0);
    dist.assign(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::uint32_t>> all;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double v;
            if (cosine) {
                double dot = 0.0;
                for (std::size_t e = 0; e < dim; ++e) {
                    dot += static_cast<double>(data[i * dim + e]) *
                           static_cast<double>(data[j * dim + e]);
                }
                v = std::max(0.0, 1.0 - dot);
            } else {
                double acc = 0.0;
                for (std::size_t e = 0; e < dim; ++e) {
                    const double diff = static_cast<double>(data[i * dim + e]) -
                                        static_cast<double>(data[j * dim + e]);
                    acc += diff * diff;
                }
                v = std::sqrt(acc);
            }
            all.emplace_back(v, static_cast<std::uint32_t>(j));
        }
        std::sort(all.begin(), all.end());
        for (std::size_t c = 0; c < k; ++c) {
            idx[i * k + c] = all[c].second;
            dist[i * k + c] = all[c].first;
        }
    }
}

}  // namespace oracles
