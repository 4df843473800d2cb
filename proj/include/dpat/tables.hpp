#pragma once

#include <map>
#include <string>
#include <vector>

#include "dpat/oslq.hpp"
#include "dpat/profiles.hpp"
#include "dpat/stats.hpp"

namespace dpat {

enum class FdrFamily { per_table, per_column };

struct CorrelationCell {
    std::string pattern_id;
    std::string srl_variable;  // subscale name or "SRL_total"
    bool ok = false;           // false: insufficient paired data, outside FDR family
    std::size_t n = 0;
    double rho = 0.0;
    double p_raw = 1.0;
    double p_adj = 1.0;
    bool significant = false;  // strict p_adj < alpha
};

struct CorrelationTable {
    std::vector<std::string> variables;  // column order
    std::vector<CorrelationCell> cells;  // row-major: pattern-major, variable-minor
    double alpha = 0.05;
    FdrFamily family = FdrFamily::per_table;
    std::size_t family_size = 0;  // cells actually corrected (per_table mode)
};

// One Spearman cell per pattern x SRL variable with pairwise deletion; FDR
// over the configured family. Profiles must be at student granularity.
CorrelationTable build_correlation_table(const std::vector<AlignmentProfile>& profiles,
                                         const std::vector<QuestionnaireRecord>& records,
                                         const PatternCatalog& catalog, double alpha,
                                         FdrFamily family = FdrFamily::per_table);

struct GroupStats {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // 0 when n < 2
    double median = 0.0;
};

struct GroupComparisonRow {
    std::string pattern_id;
    bool ok = false;  // false: a group is empty after missing-data removal
    GroupStats high;
    GroupStats low;
    double u = 0.0;  // U statistic of the high group
    double p_raw = 1.0;
    double p_adj = 1.0;
    bool significant = false;
};

struct GroupTable {
    std::vector<GroupComparisonRow> rows;
    double alpha = 0.05;
    std::size_t family_size = 0;
    std::size_t n_high_units = 0;
    std::size_t n_low_units = 0;
};

// Mann-Whitney per pattern between the groups of a student-level median
// split; units inherit their student's group, units missing a pattern score
// drop out of that row only. FDR runs over every computed row.
GroupTable build_group_table(const std::vector<AlignmentProfile>& profiles,
                             const std::map<std::string, SrlGroup>& split,
                             const PatternCatalog& catalog, double alpha);

enum class Verdict { proactive, inefficiency_alert, neutral };
std::string to_string(Verdict v);

struct ClassificationVerdict {
    std::string pattern_id;
    Verdict verdict = Verdict::neutral;
    DhasrlCategory category = DhasrlCategory::unassigned;
    std::vector<CorrelationCell> evidence;  // the significant cells
};

// Exclusively positive significant cells -> proactive, exclusively negative
// -> inefficiency alert, anything else (including none) -> neutral.
std::vector<ClassificationVerdict> classify_patterns(
    const CorrelationTable& table, const std::map<std::string, DhasrlCategory>& category_map);

struct StudentAlert {
    std::string pattern_id;
    double score = 0.0;
    double threshold = 0.0;
};

// Students whose score on an inefficiency-alert pattern exceeds the cohort's
// percentile threshold for that pattern.
std::map<std::string, std::vector<StudentAlert>> student_alerts(
    const std::vector<AlignmentProfile>& profiles,
    const std::vector<ClassificationVerdict>& verdicts, double percentile = 75.0);

// Table 2 / Table 3 cell syntax.
std::string format_corr_cell(double rho, bool significant);   // "0.293*"
std::string format_mean_sd(double mean, double sd);           // "0.520(0.09)"

Json correlation_table_to_json(const CorrelationTable& t);
CorrelationTable correlation_table_from_json(const Json& j);
Json group_table_to_json(const GroupTable& t);
GroupTable group_table_from_json(const Json& j);
std::string correlation_table_csv(const CorrelationTable& t);
std::string group_table_csv(const GroupTable& t);

}  // namespace dpat
