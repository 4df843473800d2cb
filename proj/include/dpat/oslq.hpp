#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpat/jsonio.hpp"

namespace dpat {

// Subscale layout for the questionnaire. The instrument's item-to-subscale
// mapping is not derivable from the data, so it always arrives as config;
// default_oslq_scheme() ships a uniform placeholder that users must confirm
// against their instrument.
struct OslqScheme {
    double min_response = 1.0;
    double max_response = 5.0;
    // Ordered subscale name -> item column names; groups partition the items.
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;

    std::vector<std::string> item_columns() const;   // concatenated group order
    std::vector<std::string> subscale_names() const;
};

OslqScheme default_oslq_scheme();
OslqScheme parse_oslq_scheme(const Json& j);
Json scheme_to_json(const OslqScheme& scheme);

struct QuestionnaireRecord {
    std::string student_id;
    std::vector<double> items;  // scheme item order
    std::map<std::string, double> subscales;
    double total = 0.0;
};

struct RejectedRecord {
    std::string student_id;
    std::string reason;
};

// Records with missing items are rejected rather than fatal (non-completers
// are excluded from statistics); malformed cells and out-of-bounds responses
// are hard errors.
struct OslqData {
    std::vector<QuestionnaireRecord> records;
    std::vector<RejectedRecord> rejected;
};

OslqData load_oslq(const std::filesystem::path& path, const OslqScheme& scheme);
OslqData parse_oslq(const std::string& csv_text, const OslqScheme& scheme,
                    const std::string& source_name);

// Cronbach's alpha over a students x items response matrix, sample-variance
// (n-1) convention for both item and total variances. Zero total variance
// leaves alpha undefined.
std::optional<double> cronbach_alpha(const std::vector<std::vector<double>>& items_by_student);

// Minimal CSV reader: quoted fields, embedded commas/quotes, CRLF tolerant.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace dpat
