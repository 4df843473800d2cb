#include "doctest.h"

#include <string>

#include "dpat/corpus.hpp"
#include "dpat/errors.hpp"
#include "dpat/rng.hpp"

using namespace dpat;

namespace {

std::string line(const std::string& id, const std::string& student, const std::string& log,
                 const std::string& phase, const std::string& role,
                 const std::string& text = "hello there") {
    return R"({"id":")" + id + R"(","student_id":")" + student + R"(","log_id":")" + log +
           R"(","phase":")" + phase + R"(","role":")" + role + R"(","text":")" + text + "\"}\n";
}

}  // namespace

TEST_CASE("one utterance per (phase, role) combination") {
    const std::string text = line("u1", "s1", "l1", "pre", "student") +
                             line("u2", "s1", "l1", "post", "student") +
                             line("u3", "s1", "l1", "pre", "ai") +
                             line("u4", "s1", "l1", "post", "ai");
    const Corpus c = parse_corpus(text, "t");
    REQUIRE(c.utterances.size() == 4);
    const auto streams = segment_streams(c);
    for (int s = 0; s < 4; ++s) CHECK(streams[s].size() == 1);
    CHECK(c.students() == std::vector<std::string>{"s1"});
}

TEST_CASE("empty file gives an empty corpus") {
    const Corpus c = parse_corpus("", "t");
    CHECK(c.utterances.empty());
    CHECK(c.students().empty());
    CHECK(segment_streams(c)[0].empty());
}

TEST_CASE("duplicate id names the offending line") {
    std::string text;
    for (int i = 1; i <= 6; ++i) {
        text += line("u" + std::to_string(i), "s1", "l1", "pre", "student");
    }
    text += line("u3", "s1", "l1", "post", "ai");  // line 7
    try {
        parse_corpus(text, "corpus.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("corpus.jsonl:7") != std::string::npos);
        CHECK(msg.find("u3") != std::string::npos);
    }
}

TEST_CASE("malformed rows are rejected with diagnostics") {
    CHECK_THROWS_AS(parse_corpus("{not json\n", "t"), DataError);
    CHECK_THROWS_AS(parse_corpus(line("u1", "s1", "l1", "mid", "student"), "t"), DataError);
    CHECK_THROWS_AS(parse_corpus(line("u1", "s1", "l1", "pre", "robot"), "t"), DataError);
    CHECK_THROWS_AS(parse_corpus(line("u1", "s1", "l1", "pre", "student", "  "), "t"), DataError);
    CHECK_THROWS_AS(
        parse_corpus(R"({"id":"u1","student_id":"s1","log_id":"l1","phase":"pre"})" "\n", "t"),
        DataError);
    CHECK_THROWS_AS(
        parse_corpus(R"({"id":"u1","student_id":"s1","log_id":"l1","phase":"pre",)"
                     R"("role":"ai","text":"x","extra":1})" "\n", "t"),
        DataError);
    // week must be a positive integer when present
    CHECK_THROWS_AS(
        parse_corpus(R"({"id":"u1","student_id":"s1","log_id":"l1","week":0,"phase":"pre",)"
                     R"("role":"ai","text":"x"})" "\n", "t"),
        DataError);
}

TEST_CASE("text normalization trims and collapses whitespace without case folding") {
    CHECK(normalize_text("  Hello   World \t\n") == "Hello World");
    CHECK(normalize_text("ABC") == "ABC");
    CHECK(normalize_text(" \t ") == "");
    const Corpus c =
        parse_corpus(line("u1", "s1", "l1", "pre", "student", "  What   IS \\n a t-test? "), "t");
    CHECK(c.utterances[0].text == "What IS \\n a t-test?");
}

TEST_CASE("segmentation is an order-preserving partition") {
    Rng rng(5);
    Corpus c;
    for (int i = 0; i < 200; ++i) {
        Utterance u;
        u.id = "u" + std::to_string(i);
        u.student_id = "s" + std::to_string(uniform_index(rng, 13));
        u.log_id = "l" + std::to_string(uniform_index(rng, 29));
        u.phase = uniform01(rng) < 0.5 ? Phase::pre : Phase::post;
        u.role = uniform01(rng) < 0.5 ? Role::student : Role::ai;
        u.text = "t" + std::to_string(i);
        c.utterances.push_back(u);
    }
    const auto streams = segment_streams(c);
    std::size_t total = 0;
    for (int s = 0; s < 4; ++s) {
        total += streams[s].size();
        for (std::size_t j = 0; j < streams[s].size(); ++j) {
            const auto& u = c.utterances[streams[s][j]];
            CHECK(static_cast<int>(stream_of(u.phase, u.role)) == s);
            if (j > 0) CHECK(streams[s][j - 1] < streams[s][j]);  // order preserved
        }
    }
    CHECK(total == c.utterances.size());
}

TEST_CASE("all utterances in one stream leaves the others empty") {
    std::string text;
    for (int i = 0; i < 5; ++i) {
        text += line("u" + std::to_string(i), "s1", "l1", "post", "ai");
    }
    const auto streams = segment_streams(parse_corpus(text, "t"));
    CHECK(streams[static_cast<int>(StreamKey::PostR)].size() == 5);
    CHECK(streams[static_cast<int>(StreamKey::PreQ)].empty());
    CHECK(streams[static_cast<int>(StreamKey::PostQ)].empty());
    CHECK(streams[static_cast<int>(StreamKey::PreR)].empty());
}

TEST_CASE("save and load round-trips the corpus") {
    std::string text = line("u1", "s1", "l1", "pre", "student", "What is variance?") +
                       line("u2", "s2", "l2", "post", "ai", "The mean of squares.");
    Corpus a = parse_corpus(text, "t");
    a.utterances[0].week = 3;
    const Corpus b = parse_corpus(serialize_corpus(a), "t2");
    REQUIRE(a.utterances.size() == b.utterances.size());
    for (std::size_t i = 0; i < a.utterances.size(); ++i) {
        CHECK(a.utterances[i].id == b.utterances[i].id);
        CHECK(a.utterances[i].student_id == b.utterances[i].student_id);
        CHECK(a.utterances[i].log_id == b.utterances[i].log_id);
        CHECK(a.utterances[i].week == b.utterances[i].week);
        CHECK(a.utterances[i].phase == b.utterances[i].phase);
        CHECK(a.utterances[i].role == b.utterances[i].role);
        CHECK(a.utterances[i].text == b.utterances[i].text);
    }
}

TEST_CASE("stream key naming round-trips") {
    for (StreamKey k : kAllStreams) CHECK(stream_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(stream_from_string("PreX"), DataError);
}
