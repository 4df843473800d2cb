#include "dpat/tables.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dpat/errors.hpp"

namespace dpat {

namespace {

std::vector<std::string> srl_variables(const std::vector<QuestionnaireRecord>& records) {
    std::vector<std::string> vars;
    if (!records.empty()) {
        for (const auto& [name, v] : records.front().subscales) vars.push_back(name);
    }
    vars.push_back("SRL_total");
    return vars;
}

double srl_value(const QuestionnaireRecord& rec, const std::string& var) {
    if (var == "SRL_total") return rec.total;
    return rec.subscales.at(var);
}

}  // namespace

CorrelationTable build_correlation_table(const std::vector<AlignmentProfile>& profiles,
                                         const std::vector<QuestionnaireRecord>& records,
                                         const PatternCatalog& catalog, double alpha,
                                         FdrFamily family) {
    CorrelationTable table;
    table.alpha = alpha;
    table.family = family;
    table.variables = srl_variables(records);

    std::unordered_map<std::string, const QuestionnaireRecord*> by_student;
    for (const auto& rec : records) by_student.emplace(rec.student_id, &rec);

    for (const Pattern& pattern : catalog.patterns) {
        for (const std::string& var : table.variables) {
            CorrelationCell cell;
            cell.pattern_id = pattern.pattern_id;
            cell.srl_variable = var;

            std::vector<double> x, y;  // pairwise deletion
            for (const AlignmentProfile& prof : profiles) {
                const auto score = prof.scores.find(pattern.pattern_id);
                if (score == prof.scores.end()) continue;
                const auto rec = by_student.find(prof.student_id);
                if (rec == by_student.end()) continue;
                x.push_back(score->second);
                y.push_back(srl_value(*rec->second, var));
            }
            cell.n = x.size();
            if (x.size() >= 4) {
                const SpearmanResult r = spearman(x, y);
                if (r.rho) {
                    cell.ok = true;
                    cell.rho = *r.rho;
                    cell.p_raw = *r.p_raw;
                }
            }
            table.cells.push_back(std::move(cell));
        }
    }

    // FDR over the configured family of ok cells
    auto correct = [&](const std::vector<std::size_t>& member_idx) {
        if (member_idx.empty()) return;
        std::vector<double> ps;
        ps.reserve(member_idx.size());
        for (std::size_t i : member_idx) ps.push_back(table.cells[i].p_raw);
        const FdrResult fdr = bh_fdr(ps, alpha);
        for (std::size_t j = 0; j < member_idx.size(); ++j) {
            table.cells[member_idx[j]].p_adj = fdr.p_adj[j];
            table.cells[member_idx[j]].significant = fdr.reject[j];
        }
    };

    if (family == FdrFamily::per_table) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < table.cells.size(); ++i) {
            if (table.cells[i].ok) members.push_back(i);
        }
        table.family_size = members.size();
        correct(members);
    } else {
        for (const std::string& var : table.variables) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < table.cells.size(); ++i) {
                if (table.cells[i].ok && table.cells[i].srl_variable == var) members.push_back(i);
            }
            table.family_size = std::max(table.family_size, members.size());
            correct(members);
        }
    }
    return table;
}

GroupTable build_group_table(const std::vector<AlignmentProfile>& profiles,
                             const std::map<std::string, SrlGroup>& split,
                             const PatternCatalog& catalog, double alpha) {
    GroupTable table;
    table.alpha = alpha;
    for (const auto& prof : profiles) {
        const auto it = split.find(prof.student_id);
        if (it == split.end()) continue;  // student has no questionnaire
        if (it->second == SrlGroup::high) ++table.n_high_units;
        else ++table.n_low_units;
    }

    auto group_stats = [](const std::vector<double>& v) {
        GroupStats g;
        g.n = v.size();
        if (v.empty()) return g;
        double mean = 0.0;
        for (double x : v) mean += x;
        g.mean = mean / static_cast<double>(v.size());
        if (v.size() >= 2) {
            double acc = 0.0;
            for (double x : v) acc += (x - g.mean) * (x - g.mean);
            g.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
        }
        g.median = quantile(v, 0.5);
        return g;
    };

    for (const Pattern& pattern : catalog.patterns) {
        GroupComparisonRow row;
        row.pattern_id = pattern.pattern_id;
        std::vector<double> high, low;
        for (const AlignmentProfile& prof : profiles) {
            const auto score = prof.scores.find(pattern.pattern_id);
            if (score == prof.scores.end()) continue;
            const auto grp = split.find(prof.student_id);
            if (grp == split.end()) continue;
            (grp->second == SrlGroup::high ? high : low).push_back(score->second);
        }
        if (!high.empty() && !low.empty()) {
            row.ok = true;
            row.high = group_stats(high);
            row.low = group_stats(low);
            const MannWhitneyResult r = mann_whitney_u(high, low);
            row.u = r.u;
            row.p_raw = r.p;
        }
        table.rows.push_back(std::move(row));
    }

    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i].ok) members.push_back(i);
    }
    table.family_size = members.size();
    if (!members.empty()) {
        std::vector<double> ps;
        ps.reserve(members.size());
        for (std::size_t i : members) ps.push_back(table.rows[i].p_raw);
        const FdrResult fdr = bh_fdr(ps, alpha);
        for (std::size_t j = 0; j < members.size(); ++j) {
            table.rows[members[j]].p_adj = fdr.p_adj[j];
            table.rows[members[j]].significant = fdr.reject[j];
        }
    }
    return table;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::proactive: return "proactive";
        case Verdict::inefficiency_alert: return "inefficiency_alert";
        case Verdict::neutral: return "neutral";
    }
    return "neutral";
}

std::vector<ClassificationVerdict> classify_patterns(
    const CorrelationTable& table, const std::map<std::string, DhasrlCategory>& category_map) {
    // preserve table's pattern order
    std::vector<std::string> order;
    for (const CorrelationCell& c : table.cells) {
        if (order.empty() || order.back() != c.pattern_id) {
            if (std::find(order.begin(), order.end(), c.pattern_id) == order.end()) {
                order.push_back(c.pattern_id);
            }
        }
    }
    std::vector<ClassificationVerdict> out;
    for (const std::string& pattern_id : order) {
        ClassificationVerdict v;
        v.pattern_id = pattern_id;
        std::size_t pos = 0, neg = 0;
        for (const CorrelationCell& c : table.cells) {
            if (c.pattern_id != pattern_id || !c.ok || !c.significant) continue;
            v.evidence.push_back(c);
            if (c.rho > 0.0) ++pos;
            else ++neg;
        }
        if (pos >= 1 && neg == 0) v.verdict = Verdict::proactive;
        else if (neg >= 1 && pos == 0) v.verdict = Verdict::inefficiency_alert;
        else v.verdict = Verdict::neutral;
        const auto it = category_map.find(pattern_id);
        if (it != category_map.end()) v.category = it->second;
        out.push_back(std::move(v));
    }
    return out;
}

std::map<std::string, std::vector<StudentAlert>> student_alerts(
    const std::vector<AlignmentProfile>& profiles,
    const std::vector<ClassificationVerdict>& verdicts, double percentile) {
    if (profiles.size() < 4) throw DataError("student_alerts: need at least 4 profiles");
    std::map<std::string, std::vector<StudentAlert>> out;
    for (const ClassificationVerdict& v : verdicts) {
        if (v.verdict != Verdict::inefficiency_alert) continue;
        std::vector<double> cohort;
        for (const AlignmentProfile& prof : profiles) {
            const auto it = prof.scores.find(v.pattern_id);
            if (it != prof.scores.end()) cohort.push_back(it->second);
        }
        if (cohort.empty()) continue;
        const double threshold = quantile(cohort, percentile / 100.0);
        for (const AlignmentProfile& prof : profiles) {
            const auto it = prof.scores.find(v.pattern_id);
            if (it == prof.scores.end()) continue;
            if (it->second > threshold) {
                out[prof.unit_id].push_back({v.pattern_id, it->second, threshold});
            }
        }
    }
    return out;
}

std::string format_corr_cell(double rho, bool significant) {
    return format_fixed(rho, 3) + (significant ? "*" : "");
}

std::string format_mean_sd(double mean, double sd) {
    return format_fixed(mean, 3) + "(" + format_fixed(sd, 2) + ")";
}

Json correlation_table_to_json(const CorrelationTable& t) {
    Json j;
    j["alpha"] = t.alpha;
    j["fdr_family"] = t.family == FdrFamily::per_table ? "per_table" : "per_column";
    j["family_size"] = t.family_size;
    j["variables"] = t.variables;
    Json cells = Json::array();
    for (const CorrelationCell& c : t.cells) {
        Json cj;
        cj["pattern_id"] = c.pattern_id;
        cj["srl_variable"] = c.srl_variable;
        cj["status"] = c.ok ? "ok" : "insufficient";
        cj["n"] = c.n;
        if (c.ok) {
            cj["rho"] = c.rho;
            cj["p_raw"] = c.p_raw;
            cj["p_adj"] = c.p_adj;
            cj["significant"] = c.significant;
        }
        cells.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells);
    return j;
}

CorrelationTable correlation_table_from_json(const Json& j) {
    CorrelationTable t;
    t.alpha = j.at("alpha").get<double>();
    t.family = j.at("fdr_family").get<std::string>() == "per_column" ? FdrFamily::per_column
                                                                     : FdrFamily::per_table;
    t.family_size = j.at("family_size").get<std::size_t>();
    t.variables = j.at("variables").get<std::vector<std::string>>();
    for (const auto& cj : j.at("cells")) {
        CorrelationCell c;
        c.pattern_id = cj.at("pattern_id").get<std::string>();
        c.srl_variable = cj.at("srl_variable").get<std::string>();
        c.ok = cj.at("status").get<std::string>() == "ok";
        c.n = cj.at("n").get<std::size_t>();
        if (c.ok) {
            c.rho = cj.at("rho").get<double>();
            c.p_raw = cj.at("p_raw").get<double>();
            c.p_adj = cj.at("p_adj").get<double>();
            c.significant = cj.at("significant").get<bool>();
        }
        t.cells.push_back(std::move(c));
    }
    return t;
}

Json group_table_to_json(const GroupTable& t) {
    Json j;
    j["alpha"] = t.alpha;
    j["family_size"] = t.family_size;
    j["n_high_units"] = t.n_high_units;
    j["n_low_units"] = t.n_low_units;
    Json rows = Json::array();
    for (const GroupComparisonRow& r : t.rows) {
        Json rj;
        rj["pattern_id"] = r.pattern_id;
        rj["status"] = r.ok ? "ok" : "insufficient";
        if (r.ok) {
            rj["high"] = Json{{"n", r.high.n}, {"mean", r.high.mean}, {"sd", r.high.sd},
                              {"median", r.high.median}};
            rj["low"] = Json{{"n", r.low.n}, {"mean", r.low.mean}, {"sd", r.low.sd},
                             {"median", r.low.median}};
            rj["u"] = r.u;
            rj["p_raw"] = r.p_raw;
            rj["p_adj"] = r.p_adj;
            rj["significant"] = r.significant;
        }
        rows.push_back(std::move(rj));
    }
    j["rows"] = std::move(rows);
    return j;
}

GroupTable group_table_from_json(const Json& j) {
    GroupTable t;
    t.alpha = j.at("alpha").get<double>();
    t.family_size = j.at("family_size").get<std::size_t>();
    t.n_high_units = j.at("n_high_units").get<std::size_t>();
    t.n_low_units = j.at("n_low_units").get<std::size_t>();
    auto stats_from = [](const Json& g) {
        GroupStats s;
        s.n = g.at("n").get<std::size_t>();
        s.mean = g.at("mean").get<double>();
        s.sd = g.at("sd").get<double>();
        s.median = g.at("median").get<double>();
        return s;
    };
    for (const auto& rj : j.at("rows")) {
        GroupComparisonRow r;
        r.pattern_id = rj.at("pattern_id").get<std::string>();
        r.ok = rj.at("status").get<std::string>() == "ok";
        if (r.ok) {
            r.high = stats_from(rj.at("high"));
            r.low = stats_from(rj.at("low"));
            r.u = rj.at("u").get<double>();
            r.p_raw = rj.at("p_raw").get<double>();
            r.p_adj = rj.at("p_adj").get<double>();
            r.significant = rj.at("significant").get<bool>();
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

std::string correlation_table_csv(const CorrelationTable& t) {
    std::string out = "pattern_id";
    for (const std::string& v : t.variables) out += "," + csv_escape(v);
    out += "\n";
    std::string current;
    for (const CorrelationCell& c : t.cells) {
        if (c.pattern_id != current) {
            if (!current.empty()) out += "\n";
            out += csv_escape(c.pattern_id);
            current = c.pattern_id;
        }
        out += ",";
        out += c.ok ? format_corr_cell(c.rho, c.significant) : "insufficient";
    }
    if (!current.empty()) out += "\n";
    return out;
}

std::string group_table_csv(const GroupTable& t) {
    std::string out =
        "pattern_id,status,high_mean_sd,high_median,low_mean_sd,low_median,U,p_raw,p_adj,"
        "significant\n";
    for (const GroupComparisonRow& r : t.rows) {
        out += csv_escape(r.pattern_id);
        if (!r.ok) {
            out += ",insufficient,,,,,,,,\n";
            continue;
        }
        out += ",ok," + format_mean_sd(r.high.mean, r.high.sd) + "," +
               format_fixed(r.high.median, 3) + "," + format_mean_sd(r.low.mean, r.low.sd) +
               "," + format_fixed(r.low.median, 3) + "," + format_fixed(r.u, 3) + "," +
               format_fixed(r.p_raw, 3) + "," + format_fixed(r.p_adj, 3) + "," +
               (r.significant ? "yes" : "no") + "\n";
    }
    return out;
}

}  // namespace dpat
