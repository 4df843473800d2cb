#include "dpat/oslq.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "dpat/errors.hpp"

namespace dpat {

std::vector<std::string> OslqScheme::item_columns() const {
    std::vector<std::string> out;
    for (const auto& [name, items] : groups) {
        out.insert(out.end(), items.begin(), items.end());
    }
    return out;
}

std::vector<std::string> OslqScheme::subscale_names() const {
    std::vector<std::string> out;
    out.reserve(groups.size());
    for (const auto& [name, items] : groups) out.push_back(name);
    return out;
}

OslqScheme default_oslq_scheme() {
    OslqScheme s;
    s.min_response = 1.0;
    s.max_response = 5.0;
    const char* names[] = {"GS", "ES", "TS", "TM", "HS", "SE"};
    int item = 1;
    for (const char* name : names) {
        std::vector<std::string> cols;
        for (int j = 0; j < 4; ++j) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "item%02d", item++);
            cols.emplace_back(buf);
        }
        s.groups.emplace_back(name, std::move(cols));
    }
    return s;
}

OslqScheme parse_oslq_scheme(const Json& j) {
    if (!j.is_object()) throw ConfigError("oslq scheme must be a JSON object");
    OslqScheme s;
    bool have_min = false, have_max = false;
    std::unordered_set<std::string> seen_items;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "min_response") {
            if (!it.value().is_number()) throw ConfigError("min_response must be numeric");
            s.min_response = it.value().get<double>();
            have_min = true;
        } else if (key == "max_response") {
            if (!it.value().is_number()) throw ConfigError("max_response must be numeric");
            s.max_response = it.value().get<double>();
            have_max = true;
        } else {
            if (!it.value().is_array()) {
                throw ConfigError("subscale '" + key + "' must map to a list of item columns");
            }
            std::vector<std::string> cols;
            for (const auto& v : it.value()) {
                if (!v.is_string()) throw ConfigError("item column names must be strings");
                const std::string col = v.get<std::string>();
                if (!seen_items.insert(col).second) {
                    throw ConfigError("item column '" + col + "' assigned to more than one subscale");
                }
                cols.push_back(col);
            }
            if (cols.empty()) throw ConfigError("subscale '" + key + "' has no items");
            s.groups.emplace_back(key, std::move(cols));
        }
    }
    if (!have_min || !have_max) throw ConfigError("oslq scheme needs min_response and max_response");
    if (s.min_response >= s.max_response) throw ConfigError("min_response must be < max_response");
    if (s.groups.empty()) throw ConfigError("oslq scheme has no subscales");
    return s;
}

Json scheme_to_json(const OslqScheme& scheme) {
    Json j;
    for (const auto& [name, items] : scheme.groups) j[name] = items;
    j["min_response"] = scheme.min_response;
    j["max_response"] = scheme.max_response;
    return j;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"': in_quotes = true; row_started = true; break;
            case ',':
                row.push_back(field);
                field.clear();
                row_started = true;
                break;
            case '\r': break;
            case '\n':
                if (row_started || !field.empty()) {
                    row.push_back(field);
                    rows.push_back(row);
                }
                row.clear();
                field.clear();
                row_started = false;
                break;
            default: field.push_back(c); row_started = true; break;
        }
    }
    if (row_started || !field.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

namespace {

bool is_blank(const std::string& s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

double parse_number(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
        if (used != s.size()) throw std::invalid_argument("trailing");
        if (!std::isfinite(v)) throw std::invalid_argument("nonfinite");
        return v;
    } catch (const std::exception&) {
        throw DataError(where + ": non-numeric cell '" + s + "'");
    }
}

}  // namespace

OslqData parse_oslq(const std::string& csv_text, const OslqScheme& scheme,
                    const std::string& source_name) {
    const auto rows = parse_csv(csv_text);
    if (rows.empty()) throw DataError(source_name + ": empty questionnaire file");

    const auto expected_items = scheme.item_columns();
    const auto& header = rows[0];
    if (header.empty() || header[0] != "student_id") {
        throw DataError(source_name + ": first header column must be 'student_id'");
    }
    if (header.size() != expected_items.size() + 1) {
        throw DataError(source_name + ": header has " + std::to_string(header.size() - 1) +
                        " item columns, scheme expects " + std::to_string(expected_items.size()));
    }
    for (std::size_t c = 0; c < expected_items.size(); ++c) {
        if (header[c + 1] != expected_items[c]) {
            throw DataError(source_name + ": header column '" + header[c + 1] +
                            "' does not match scheme item '" + expected_items[c] + "'");
        }
    }

    OslqData out;
    std::unordered_set<std::string> seen_students;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = source_name + ":" + std::to_string(r + 1);
        if (row.size() != header.size()) {
            throw DataError(where + ": expected " + std::to_string(header.size()) +
                            " cells, got " + std::to_string(row.size()));
        }
        const std::string& student = row[0];
        if (student.empty()) throw DataError(where + ": empty student_id");
        if (!seen_students.insert(student).second) {
            throw DataError(where + ": duplicate student_id '" + student + "'");
        }

        bool missing = false;
        QuestionnaireRecord rec;
        rec.student_id = student;
        rec.items.reserve(expected_items.size());
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (is_blank(row[c])) {
                missing = true;
                break;
            }
            const double v = parse_number(row[c], where);
            if (v < scheme.min_response || v > scheme.max_response) {
                throw DataError(where + ": response " + row[c] + " outside bounds [" +
                                std::to_string(scheme.min_response) + ", " +
                                std::to_string(scheme.max_response) + "]");
            }
            rec.items.push_back(v);
        }
        if (missing) {
            out.rejected.push_back({student, "missing item response"});
            continue;
        }

        std::size_t offset = 0;
        rec.total = 0.0;
        for (const auto& [name, items] : scheme.groups) {
            double sum = 0.0;
            for (std::size_t j = 0; j < items.size(); ++j) sum += rec.items[offset + j];
            offset += items.size();
            rec.subscales[name] = sum;
            rec.total += sum;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

OslqData load_oslq(const std::filesystem::path& path, const OslqScheme& scheme) {
    return parse_oslq(read_text_file(path), scheme, path.filename().string());
}

std::optional<double> cronbach_alpha(const std::vector<std::vector<double>>& items_by_student) {
    const std::size_t n = items_by_student.size();
    if (n < 2) throw NumericError("cronbach_alpha: need at least 2 students");
    const std::size_t k = items_by_student[0].size();
    if (k < 2) throw NumericError("cronbach_alpha: need at least 2 items");
    for (const auto& row : items_by_student) {
        if (row.size() != k) throw NumericError("cronbach_alpha: ragged response matrix");
        for (double v : row) {
            if (!std::isfinite(v)) throw NumericError("cronbach_alpha: non-finite response");
        }
    }

    auto sample_variance = [n](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(n);
        double acc = 0.0;
        for (double x : v) acc += (x - mean) * (x - mean);
        return acc / static_cast<double>(n - 1);
    };

    double item_var_sum = 0.0;
    std::vector<double> column(n), totals(n, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = items_by_student[i][j];
            totals[i] += column[i];
        }
        item_var_sum += sample_variance(column);
    }
    const double total_var = sample_variance(totals);
    if (total_var == 0.0) return std::nullopt;
    const double kf = static_cast<double>(k);
    return kf / (kf - 1.0) * (1.0 - item_var_sum / total_var);
}

}  // namespace dpat
