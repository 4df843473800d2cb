#include "doctest.h"

#include <string>

#include "dpat/errors.hpp"
#include "dpat/oslq.hpp"
#include "dpat/rng.hpp"
#include "oracles.hpp"

using namespace dpat;

namespace {

std::string uniform_csv(const OslqScheme& scheme, int n_students, double value) {
    std::string csv = "student_id";
    for (const auto& col : scheme.item_columns()) csv += "," + col;
    csv += "\n";
    for (int s = 0; s < n_students; ++s) {
        csv += "st" + std::to_string(s);
        for (std::size_t j = 0; j < scheme.item_columns().size(); ++j) {
            csv += "," + std::to_string(static_cast<int>(value));
        }
        csv += "\n";
    }
    return csv;
}

}  // namespace

TEST_CASE("default scheme has 24 items in six groups of four") {
    const OslqScheme s = default_oslq_scheme();
    CHECK(s.groups.size() == 6);
    CHECK(s.item_columns().size() == 24);
    CHECK(s.subscale_names() == std::vector<std::string>{"GS", "ES", "TS", "TM", "HS", "SE"});
}

TEST_CASE("uniform responses give subscale 12 and total 72") {
    const OslqScheme scheme = default_oslq_scheme();
    const OslqData d = parse_oslq(uniform_csv(scheme, 1, 3.0), scheme, "t");
    REQUIRE(d.records.size() == 1);
    for (const auto& [name, v] : d.records[0].subscales) CHECK(v == doctest::Approx(12.0));
    CHECK(d.records[0].total == doctest::Approx(72.0));
}

TEST_CASE("blank item rejects the record with the student id") {
    const OslqScheme scheme = default_oslq_scheme();
    std::string csv = uniform_csv(scheme, 2, 4.0);
    // blank out one cell of the second student
    const auto pos = csv.rfind(",4");
    csv = csv.substr(0, pos + 1) + csv.substr(pos + 2);
    const OslqData d = parse_oslq(csv, scheme, "t");
    CHECK(d.records.size() == 1);
    REQUIRE(d.rejected.size() == 1);
    CHECK(d.rejected[0].student_id == "st1");
    CHECK(d.rejected[0].reason.find("missing") != std::string::npos);
}

TEST_CASE("hard errors: bad header, bad cells, out-of-bounds, duplicates") {
    const OslqScheme scheme = default_oslq_scheme();
    std::string good = uniform_csv(scheme, 1, 2.0);

    std::string bad_header = good;
    bad_header.replace(bad_header.find("item02"), 6, "itemXX");
    CHECK_THROWS_AS(parse_oslq(bad_header, scheme, "t"), DataError);

    std::string bad_cell = good;
    bad_cell.replace(bad_cell.rfind(",2"), 2, ",x");
    CHECK_THROWS_AS(parse_oslq(bad_cell, scheme, "t"), DataError);

    std::string out_of_bounds = good;
    out_of_bounds.replace(out_of_bounds.rfind(",2"), 2, ",9");
    CHECK_THROWS_AS(parse_oslq(out_of_bounds, scheme, "t"), DataError);

    std::string duplicate = good + good.substr(good.find('\n') + 1);
    CHECK_THROWS_AS(parse_oslq(duplicate, scheme, "t"), DataError);

    std::string not_student_first = good;
    not_student_first.replace(0, 10, "student_ID");
    CHECK_THROWS_AS(parse_oslq(not_student_first, scheme, "t"), DataError);
}

TEST_CASE("totals match an independent column-sum oracle on random files") {
    const OslqScheme scheme = default_oslq_scheme();
    Rng rng(31);
    for (int rep = 0; rep < 5; ++rep) {
        std::string csv = "student_id";
        for (const auto& col : scheme.item_columns()) csv += "," + col;
        csv += "\n";
        std::vector<std::vector<double>> expected;
        const int n = 8;
        for (int s = 0; s < n; ++s) {
            csv += "st" + std::to_string(s);
            std::vector<double> row;
            for (std::size_t j = 0; j < 24; ++j) {
                const double v = static_cast<double>(uniform_int(rng, 1, 5));
                row.push_back(v);
                csv += "," + std::to_string(static_cast<int>(v));
            }
            expected.push_back(row);
            csv += "\n";
        }
        const OslqData d = parse_oslq(csv, scheme, "t");
        REQUIRE(d.records.size() == static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) {
            double oracle_total = 0.0;  // spreadsheet-style row sum
            for (double v : expected[s]) oracle_total += v;
            CHECK(d.records[s].total == doctest::Approx(oracle_total).epsilon(1e-12));
            double sub_sum = 0.0;
            for (const auto& [name, v] : d.records[s].subscales) sub_sum += v;
            CHECK(std::fabs(d.records[s].total - sub_sum) < 1e-9);
        }
    }
}

TEST_CASE("scheme JSON round-trips and rejects bad shapes") {
    const OslqScheme scheme = default_oslq_scheme();
    const OslqScheme back = parse_oslq_scheme(scheme_to_json(scheme));
    CHECK(back.groups == scheme.groups);
    CHECK(back.min_response == scheme.min_response);

    CHECK_THROWS_AS(parse_oslq_scheme(Json{{"min_response", 1}, {"max_response", 5}}),
                    ConfigError);
    CHECK_THROWS_AS(parse_oslq_scheme(Json{{"GS", Json::array({"a"})}, {"min_response", 5},
                                           {"max_response", 1}}),
                    ConfigError);
    // item assigned twice
    Json dup;
    dup["GS"] = {"a", "b"};
    dup["ES"] = {"b"};
    dup["min_response"] = 1;
    dup["max_response"] = 5;
    CHECK_THROWS_AS(parse_oslq_scheme(dup), ConfigError);
}

TEST_CASE("cronbach alpha is 1 for identical non-constant columns") {
    const std::vector<std::vector<double>> rows = {{1, 1, 1}, {2, 2, 2}, {5, 5, 5}};
    const auto a = cronbach_alpha(rows);
    REQUIRE(a.has_value());
    CHECK(*a == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cronbach alpha hand case: shifted pairs give exactly 1") {
    const std::vector<std::vector<double>> rows = {{1, 2}, {2, 3}, {3, 4}};
    const auto a = cronbach_alpha(rows);
    REQUIRE(a.has_value());
    CHECK(*a == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cronbach alpha near zero for independent random columns") {
    Rng rng(53);
    std::vector<std::vector<double>> rows(500, std::vector<double>(6));
    for (auto& r : rows) {
        for (double& v : r) v = standard_normal(rng);
    }
    const auto a = cronbach_alpha(rows);
    REQUIRE(a.has_value());
    CHECK(std::fabs(*a) < 0.2);
}

TEST_CASE("cronbach alpha is invariant under a global constant shift") {
    Rng rng(54);
    std::vector<std::vector<double>> rows(20, std::vector<double>(5));
    for (auto& r : rows) {
        for (double& v : r) v = static_cast<double>(uniform_int(rng, 1, 5));
    }
    auto shifted = rows;
    for (auto& r : shifted) {
        for (double& v : r) v += 17.5;
    }
    CHECK(*cronbach_alpha(rows) == doctest::Approx(*cronbach_alpha(shifted)).epsilon(1e-12));
}

TEST_CASE("cronbach alpha undefined on zero total variance") {
    const std::vector<std::vector<double>> rows = {{1, 2}, {2, 1}, {1, 2}};
    CHECK_FALSE(cronbach_alpha(rows).has_value());
}

TEST_CASE("cronbach alpha matches the oracle on random instances") {
    Rng rng(55);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 3 + uniform_index(rng, 9);
        const std::size_t k = 2 + uniform_index(rng, 8);
        std::vector<std::vector<double>> rows(n, std::vector<double>(k));
        for (auto& r : rows) {
            for (double& v : r) v = static_cast<double>(uniform_int(rng, 1, 7));
        }
        const auto a = cronbach_alpha(rows);
        if (!a) continue;  // zero-variance draw
        CHECK(*a == doctest::Approx(oracles::cronbach(rows)).epsilon(1e-9));
    }
}

TEST_CASE("csv parser handles quoting") {
    const auto rows = parse_csv("a,\"b,c\",\"d\"\"e\"\r\n1,2,3\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "d\"e"});
    CHECK(rows[1] == std::vector<std::string>{"1", "2", "3"});
}
