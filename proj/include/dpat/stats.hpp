#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dpat {

// Average ranks (1-based); tied values share the mean of their rank block.
std::vector<double> average_ranks(const std::vector<double>& values);

struct SpearmanResult {
    std::optional<double> rho;    // empty when x or y is constant
    std::optional<double> p_raw;  // two-sided, t approximation with n-2 df
};

// Requires n >= 4 with pairwise deletion already applied by the caller.
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

struct FdrResult {
    std::vector<double> p_adj;  // input order
    std::vector<bool> reject;   // strict p_adj < alpha
};

// Benjamini-Hochberg step-down minimum: p_adj(i) = min_{j>=i} (m/j) p_(j),
// capped at 1, mapped back to input order.
FdrResult bh_fdr(const std::vector<double>& p_values, double alpha = 0.05);

enum class SrlGroup { low, high };

// Sample median (midpoint of the two middle order statistics for even n);
// totals strictly above go high, ties at the median go low.
std::map<std::string, SrlGroup> median_split(const std::map<std::string, double>& totals);

enum class MwuMethod { automatic, exact, normal_approx };

struct MannWhitneyResult {
    double u = 0.0;   // U statistic for the first sample
    double p = 1.0;   // two-sided
    bool exact = false;
};

// Average ranks for ties. Exact path enumerates every size-n_a assignment of
// the pooled sample and counts |U - n_a n_b/2| at least as extreme; used when
// n_a+n_b <= 10 under `automatic`. The approximation path applies the
// tie-corrected normal distribution with a 0.5 continuity correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                 MwuMethod method = MwuMethod::automatic);

// Empty when both raters are constant and identical (p_e = 1).
std::optional<double> cohen_kappa(const std::vector<std::string>& labels_a,
                                  const std::vector<std::string>& labels_b);

struct Descriptives {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // n-1 denominator
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

Descriptives describe(const std::vector<double>& values);  // needs n >= 2

// Linear-interpolation quantile on sorted-copy order statistics, q in [0,1].
double quantile(std::vector<double> values, double q);

// Two-sided p for |T| >= t under Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, int df);
double normal_cdf(double z);

}  // namespace dpat
