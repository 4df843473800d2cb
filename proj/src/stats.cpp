#include "dpat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpat/errors.hpp"

namespace dpat {

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

namespace {

// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_two_sided_p(double t, int df) {
    if (df < 1) throw NumericError("student_t_two_sided_p: df must be >= 1");
    const double x = static_cast<double>(df) / (static_cast<double>(df) + t * t);
    return reg_inc_beta(static_cast<double>(df) / 2.0, 0.5, x);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw NumericError("spearman: length mismatch");
    const std::size_t n = x.size();
    if (n < 4) throw NumericError("spearman: need n >= 4");

    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double num = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rx[i] - mx;
        const double b = ry[i] - my;
        num += a * b;
        dx += a * a;
        dy += b * b;
    }
    if (dx == 0.0 || dy == 0.0) return {std::nullopt, std::nullopt};

    double rho = num / std::sqrt(dx * dy);
    rho = std::clamp(rho, -1.0, 1.0);

    SpearmanResult out;
    out.rho = rho;
    if (std::fabs(rho) == 1.0) {
        out.p_raw = 0.0;
    } else {
        const double df = static_cast<double>(n - 2);
        const double t = rho * std::sqrt(df / (1.0 - rho * rho));
        out.p_raw = student_t_two_sided_p(t, static_cast<int>(n) - 2);
    }
    return out;
}

FdrResult bh_fdr(const std::vector<double>& p_values, double alpha) {
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw NumericError("bh_fdr: p-value outside [0,1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    FdrResult out;
    out.p_adj.resize(m);
    out.reject.resize(m);
    double running_min = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double scaled =
            p_values[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
        running_min = std::min(running_min, scaled);
        out.p_adj[order[r]] = std::min(1.0, running_min);
    }
    for (std::size_t i = 0; i < m; ++i) out.reject[i] = out.p_adj[i] < alpha;
    return out;
}

std::map<std::string, SrlGroup> median_split(const std::map<std::string, double>& totals) {
    if (totals.size() < 2) throw NumericError("median_split: need at least 2 students");
    std::vector<double> values;
    values.reserve(totals.size());
    for (const auto& [id, v] : totals) values.push_back(v);
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median = (n % 2 == 1) ? values[n / 2]
                                       : (values[n / 2 - 1] + values[n / 2]) / 2.0;
    std::map<std::string, SrlGroup> out;
    for (const auto& [id, v] : totals) {
        out[id] = v > median ? SrlGroup::high : SrlGroup::low;
    }
    return out;
}

namespace {

double u_statistic(const std::vector<double>& pooled_ranks, std::size_t n_a,
                   const std::vector<std::size_t>& a_positions) {
    double rank_sum = 0.0;
    for (std::size_t pos : a_positions) rank_sum += pooled_ranks[pos];
    return rank_sum - static_cast<double>(n_a) * static_cast<double>(n_a + 1) / 2.0;
}

MannWhitneyResult mwu_exact(const std::vector<double>& pooled_ranks, std::size_t n_a,
                            double u_obs) {
    const std::size_t n = pooled_ranks.size();
    const std::size_t n_b = n - n_a;
    const double mu = static_cast<double>(n_a) * static_cast<double>(n_b) / 2.0;
    const double obs_dev = std::fabs(u_obs - mu);

    // Walk every size-n_a subset of pooled positions.
    std::vector<std::size_t> comb(n_a);
    std::iota(comb.begin(), comb.end(), 0);
    std::size_t total = 0, extreme = 0;
    while (true) {
        const double u = u_statistic(pooled_ranks, n_a, comb);
        ++total;
        if (std::fabs(u - mu) >= obs_dev - 1e-12) ++extreme;

        // next combination
        std::size_t i = n_a;
        while (i > 0) {
            --i;
            if (comb[i] != i + n - n_a) break;
            if (i == 0) {
                MannWhitneyResult out;
                out.u = u_obs;
                out.exact = true;
                out.p = static_cast<double>(extreme) / static_cast<double>(total);
                return out;
            }
        }
        ++comb[i];
        for (std::size_t j = i + 1; j < n_a; ++j) comb[j] = comb[j - 1] + 1;
    }
}

MannWhitneyResult mwu_normal(const std::vector<double>& pooled, std::size_t n_a, double u_obs) {
    const std::size_t n = pooled.size();
    const std::size_t n_b = n - n_a;
    const double na = static_cast<double>(n_a);
    const double nb = static_cast<double>(n_b);
    const double nn = static_cast<double>(n);
    const double mu = na * nb / 2.0;

    // Tie correction: sum over tie groups of t^3 - t on the pooled sample.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double var =
        na * nb / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));

    MannWhitneyResult out;
    out.u = u_obs;
    out.exact = false;
    if (var <= 0.0) {
        out.p = 1.0;  // every observation tied
        return out;
    }
    const double dev = u_obs - mu;
    // continuity correction of 0.5 toward the mean
    double cc = 0.0;
    if (dev > 0.0) cc = -0.5;
    else if (dev < 0.0) cc = 0.5;
    const double z = (dev + cc) / std::sqrt(var);
    out.p = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::fabs(z))));
    return out;
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                 MwuMethod method) {
    if (a.empty() || b.empty()) throw NumericError("mann_whitney_u: empty group");
    const std::size_t n_a = a.size();
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = average_ranks(pooled);

    std::vector<std::size_t> a_positions(n_a);
    std::iota(a_positions.begin(), a_positions.end(), 0);
    const double u_obs = u_statistic(ranks, n_a, a_positions);

    const bool use_exact = method == MwuMethod::exact ||
                           (method == MwuMethod::automatic && pooled.size() <= 10);
    if (use_exact) return mwu_exact(ranks, n_a, u_obs);
    if (method == MwuMethod::normal_approx && pooled.size() < 8) {
        throw NumericError("mann_whitney_u: normal approximation needs n >= 8");
    }
    return mwu_normal(pooled, n_a, u_obs);
}

std::optional<double> cohen_kappa(const std::vector<std::string>& labels_a,
                                  const std::vector<std::string>& labels_b) {
    if (labels_a.size() != labels_b.size()) throw NumericError("cohen_kappa: length mismatch");
    const std::size_t n = labels_a.size();
    if (n < 2) throw NumericError("cohen_kappa: need at least 2 items");

    std::vector<std::string> cats;
    auto cat_index = [&](const std::string& s) {
        for (std::size_t i = 0; i < cats.size(); ++i) {
            if (cats[i] == s) return i;
        }
        cats.push_back(s);
        return cats.size() - 1;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        pairs.emplace_back(cat_index(labels_a[i]), cat_index(labels_b[i]));
    }
    const std::size_t k = cats.size();
    std::vector<double> marg_a(k, 0.0), marg_b(k, 0.0);
    double agree = 0.0;
    for (const auto& [ca, cb] : pairs) {
        marg_a[ca] += 1.0;
        marg_b[cb] += 1.0;
        if (ca == cb) agree += 1.0;
    }
    const double nn = static_cast<double>(n);
    const double p_o = agree / nn;
    double p_e = 0.0;
    for (std::size_t c = 0; c < k; ++c) p_e += (marg_a[c] / nn) * (marg_b[c] / nn);
    if (p_e >= 1.0) return std::nullopt;
    return (p_o - p_e) / (1.0 - p_e);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw NumericError("quantile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    if (lo == hi) return values[lo];
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

Descriptives describe(const std::vector<double>& values) {
    if (values.size() < 2) throw NumericError("describe: need at least 2 values");
    Descriptives d;
    d.n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(d.n);
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    d.mean = mean;
    d.sd = std::sqrt(acc / static_cast<double>(d.n - 1));
    d.min = *std::min_element(values.begin(), values.end());
    d.max = *std::max_element(values.begin(), values.end());
    d.q1 = quantile(values, 0.25);
    d.median = quantile(values, 0.5);
    d.q3 = quantile(values, 0.75);
    return d;
}

}  // namespace dpat
