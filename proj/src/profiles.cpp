#include "dpat/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dpat/errors.hpp"
#include "dpat/oslq.hpp"

namespace dpat {

std::string to_string(DhasrlCategory c) {
    switch (c) {
        case DhasrlCategory::proactive_planning: return "proactive_planning";
        case DhasrlCategory::strategic_integration: return "strategic_integration";
        case DhasrlCategory::metacognitive_management: return "metacognitive_management";
        case DhasrlCategory::reactive_remediation: return "reactive_remediation";
        case DhasrlCategory::overload_help_seeking: return "overload_help_seeking";
        case DhasrlCategory::unassigned: return "unassigned";
    }
    return "unassigned";
}

DhasrlCategory dhasrl_from_string(const std::string& s) {
    for (DhasrlCategory c :
         {DhasrlCategory::proactive_planning, DhasrlCategory::strategic_integration,
          DhasrlCategory::metacognitive_management, DhasrlCategory::reactive_remediation,
          DhasrlCategory::overload_help_seeking, DhasrlCategory::unassigned}) {
        if (to_string(c) == s) return c;
    }
    throw ConfigError("unknown DHASRL category '" + s + "'");
}

std::string to_string(Unit u) { return u == Unit::student ? "student" : "log"; }

const Pattern* PatternCatalog::find(const std::string& pattern_id) const {
    for (const Pattern& p : patterns) {
        if (p.pattern_id == pattern_id) return &p;
    }
    return nullptr;
}

std::vector<const Pattern*> PatternCatalog::for_stream(StreamKey s) const {
    std::vector<const Pattern*> out;
    for (const Pattern& p : patterns) {
        if (p.stream == s) out.push_back(&p);
    }
    return out;
}

Json PatternCatalog::to_json() const {
    Json j;
    j["dim"] = dim;
    Json arr = Json::array();
    for (const Pattern& p : patterns) {
        Json pj;
        pj["pattern_id"] = p.pattern_id;
        pj["stream"] = to_string(p.stream);
        pj["label"] = p.label;
        pj["dhasrl_category"] = to_string(p.category);
        pj["embedding_centroid"] = p.embedding_centroid;
        Json reps = Json::array();
        for (const Representative& r : p.representatives) {
            reps.push_back(Json{{"id", r.utterance_id}, {"text", r.text}, {"score", r.score}});
        }
        pj["representatives"] = std::move(reps);
        arr.push_back(std::move(pj));
    }
    j["patterns"] = std::move(arr);
    j["provenance"] = provenance;
    return j;
}

PatternCatalog PatternCatalog::from_json(const Json& j) {
    PatternCatalog cat;
    cat.dim = j.at("dim").get<std::size_t>();
    for (const auto& pj : j.at("patterns")) {
        Pattern p;
        p.pattern_id = pj.at("pattern_id").get<std::string>();
        p.stream = stream_from_string(pj.at("stream").get<std::string>());
        p.label = pj.value("label", std::string{});
        p.category = dhasrl_from_string(pj.at("dhasrl_category").get<std::string>());
        p.embedding_centroid = pj.at("embedding_centroid").get<std::vector<double>>();
        if (p.embedding_centroid.size() != cat.dim) {
            throw DataError("pattern catalog: centroid dim mismatch for " + p.pattern_id);
        }
        if (pj.contains("representatives")) {
            for (const auto& rj : pj.at("representatives")) {
                p.representatives.push_back({rj.at("id").get<std::string>(),
                                             rj.at("text").get<std::string>(),
                                             rj.at("score").get<double>()});
            }
        }
        cat.patterns.push_back(std::move(p));
    }
    if (j.contains("provenance")) cat.provenance = j.at("provenance");
    // pattern ids must be unique
    for (std::size_t i = 0; i < cat.patterns.size(); ++i) {
        for (std::size_t k = i + 1; k < cat.patterns.size(); ++k) {
            if (cat.patterns[i].pattern_id == cat.patterns[k].pattern_id) {
                throw DataError("pattern catalog: duplicate pattern id " +
                                cat.patterns[i].pattern_id);
            }
        }
    }
    return cat;
}

double alignment_score(const float* utterance_vec, const double* centroid, std::size_t dim) {
    double dot = 0.0, nu = 0.0, nc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double u = static_cast<double>(utterance_vec[d]);
        dot += u * centroid[d];
        nu += u * u;
        nc += centroid[d] * centroid[d];
    }
    if (nu == 0.0 || nc == 0.0) throw NumericError("alignment_score: zero vector");
    const double cosine = dot / (std::sqrt(nu) * std::sqrt(nc));
    return std::max(0.0, cosine);
}

std::vector<AlignmentProfile> student_profiles(
    const Corpus& corpus, const std::array<std::vector<std::size_t>, 4>& streams,
    const std::array<EmbeddingMatrix, 4>& stream_matrices, const PatternCatalog& catalog,
    Unit unit) {
    // unit key -> accumulator per pattern
    struct Accum {
        double sum = 0.0;
        std::size_t count = 0;
    };
    std::vector<AlignmentProfile> profiles;
    std::unordered_map<std::string, std::size_t> unit_index;
    std::unordered_map<std::string, std::unordered_map<std::string, Accum>> acc;

    auto unit_key = [&](const Utterance& u) {
        return unit == Unit::student ? u.student_id : u.log_id;
    };
    // register units in corpus order
    for (const auto& u : corpus.utterances) {
        const std::string key = unit_key(u);
        const auto [it, inserted] = unit_index.emplace(key, profiles.size());
        if (inserted) {
            AlignmentProfile p;
            p.unit_id = key;
            p.student_id = u.student_id;
            profiles.push_back(std::move(p));
        } else if (profiles[it->second].student_id != u.student_id) {
            throw DataError("student_profiles: log '" + key + "' spans multiple students");
        }
    }

    for (int s = 0; s < 4; ++s) {
        const auto stream_patterns = catalog.for_stream(kAllStreams[s]);
        if (stream_patterns.empty()) continue;
        const EmbeddingMatrix& matrix = stream_matrices[s];
        const auto& members = streams[s];
        if (matrix.rows() != members.size()) {
            throw DataError("student_profiles: matrix rows do not match stream size for " +
                            to_string(kAllStreams[s]));
        }
        if (matrix.rows() > 0 && matrix.dim != catalog.dim) {
            throw DataError("student_profiles: matrix dim does not match catalog dim");
        }
        for (std::size_t r = 0; r < members.size(); ++r) {
            const Utterance& u = corpus.utterances[members[r]];
            if (matrix.ids[r] != u.id) {
                throw DataError("student_profiles: row id mismatch at " + u.id);
            }
            auto& per_unit = acc[unit_key(u)];
            for (const Pattern* p : stream_patterns) {
                const double score =
                    alignment_score(matrix.row(r), p->embedding_centroid.data(), matrix.dim);
                Accum& a = per_unit[p->pattern_id];
                a.sum += score;
                a.count += 1;
            }
        }
    }

    for (AlignmentProfile& p : profiles) {
        const auto it = acc.find(p.unit_id);
        if (it == acc.end()) continue;
        for (const auto& [pattern_id, a] : it->second) {
            p.support[pattern_id] = a.count;
            if (a.count > 0) p.scores[pattern_id] = a.sum / static_cast<double>(a.count);
        }
    }
    return profiles;
}

namespace {

std::string table_csv(const std::vector<AlignmentProfile>& profiles,
                      const PatternCatalog& catalog, bool support) {
    std::string out = "unit_id,student_id";
    for (const Pattern& p : catalog.patterns) out += "," + csv_escape(p.pattern_id);
    out += "\n";
    for (const AlignmentProfile& prof : profiles) {
        out += csv_escape(prof.unit_id) + "," + csv_escape(prof.student_id);
        for (const Pattern& p : catalog.patterns) {
            out += ",";
            if (support) {
                const auto it = prof.support.find(p.pattern_id);
                if (it != prof.support.end()) out += std::to_string(it->second);
            } else {
                const auto it = prof.scores.find(p.pattern_id);
                if (it != prof.scores.end()) out += format_double_shortest(it->second);
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace

std::string profiles_csv(const std::vector<AlignmentProfile>& profiles,
                         const PatternCatalog& catalog) {
    return table_csv(profiles, catalog, false);
}

std::string support_csv(const std::vector<AlignmentProfile>& profiles,
                        const PatternCatalog& catalog) {
    return table_csv(profiles, catalog, true);
}

std::vector<AlignmentProfile> parse_profiles_csv(const std::string& text,
                                                 const std::string& source_name) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw DataError(source_name + ": empty profiles file");
    const auto& header = rows[0];
    if (header.size() < 2 || header[0] != "unit_id" || header[1] != "student_id") {
        throw DataError(source_name + ": profiles header must start unit_id,student_id");
    }
    std::vector<AlignmentProfile> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw DataError(source_name + ":" + std::to_string(r + 1) + ": ragged row");
        }
        AlignmentProfile p;
        p.unit_id = row[0];
        p.student_id = row[1];
        for (std::size_t c = 2; c < row.size(); ++c) {
            if (row[c].empty()) continue;
            p.scores[header[c]] = std::stod(row[c]);
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace dpat
