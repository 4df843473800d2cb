#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpat/corpus.hpp"
#include "dpat/jsonio.hpp"
#include "dpat/vector_store.hpp"

namespace dpat {

enum class DhasrlCategory {
    proactive_planning,
    strategic_integration,
    metacognitive_management,
    reactive_remediation,
    overload_help_seeking,
    unassigned,
};

std::string to_string(DhasrlCategory c);
DhasrlCategory dhasrl_from_string(const std::string& s);

struct Representative {
    std::string utterance_id;
    std::string text;
    double score = 0.0;
};

struct Pattern {
    std::string pattern_id;  // e.g. "PreQ_cluster0"
    StreamKey stream = StreamKey::PreQ;
    std::vector<double> embedding_centroid;  // original embedding space
    std::string label;                       // human-supplied, optional
    DhasrlCategory category = DhasrlCategory::unassigned;
    std::vector<Representative> representatives;
};

struct PatternCatalog {
    std::size_t dim = 0;
    std::vector<Pattern> patterns;  // stream order, then cluster index
    Json provenance;                // fitted params per stream

    const Pattern* find(const std::string& pattern_id) const;
    std::vector<const Pattern*> for_stream(StreamKey s) const;

    Json to_json() const;
    static PatternCatalog from_json(const Json& j);
};

// Clamped cosine: max(0, cos(u, c)). Zero vectors are an error.
double alignment_score(const float* utterance_vec, const double* centroid, std::size_t dim);

enum class Unit { student, log };
std::string to_string(Unit u);

struct AlignmentProfile {
    std::string unit_id;
    std::string student_id;  // equals unit_id when the unit is student
    std::map<std::string, double> scores;        // present iff support > 0
    std::map<std::string, std::size_t> support;  // utterances aggregated per pattern
};

// Mean alignment of each unit's utterances in the pattern's stream against
// that pattern's centroid; a unit with no utterances in the stream has the
// score missing. stream_matrices rows must align with segment_streams order.
std::vector<AlignmentProfile> student_profiles(
    const Corpus& corpus, const std::array<std::vector<std::size_t>, 4>& streams,
    const std::array<EmbeddingMatrix, 4>& stream_matrices, const PatternCatalog& catalog,
    Unit unit);

// One row per unit, one column per pattern, empty cell = missing. Scores are
// written losslessly so downstream stages recompute identical statistics.
std::string profiles_csv(const std::vector<AlignmentProfile>& profiles,
                         const PatternCatalog& catalog);
std::string support_csv(const std::vector<AlignmentProfile>& profiles,
                        const PatternCatalog& catalog);
std::vector<AlignmentProfile> parse_profiles_csv(const std::string& text,
                                                 const std::string& source_name);

}  // namespace dpat
