#include "dpat/corpus.hpp"

#include <cctype>
#include <unordered_set>

#include "dpat/errors.hpp"
#include "dpat/jsonio.hpp"

namespace dpat {

StreamKey stream_of(Phase phase, Role role) {
    if (role == Role::student) return phase == Phase::pre ? StreamKey::PreQ : StreamKey::PostQ;
    return phase == Phase::pre ? StreamKey::PreR : StreamKey::PostR;
}

std::string to_string(StreamKey s) {
    switch (s) {
        case StreamKey::PreQ: return "PreQ";
        case StreamKey::PostQ: return "PostQ";
        case StreamKey::PreR: return "PreR";
        case StreamKey::PostR: return "PostR";
    }
    return "?";
}

StreamKey stream_from_string(const std::string& s) {
    for (StreamKey k : kAllStreams) {
        if (to_string(k) == s) return k;
    }
    throw DataError("unknown stream key: " + s);
}

std::vector<std::string> Corpus::students() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& u : utterances) {
        if (seen.insert(u.student_id).second) out.push_back(u.student_id);
    }
    return out;
}

std::vector<std::string> Corpus::log_ids() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& u : utterances) {
        if (seen.insert(u.log_id).second) out.push_back(u.log_id);
    }
    return out;
}

std::string normalize_text(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool in_space = true;  // leading whitespace dropped
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            out.push_back(static_cast<char>(c));
            in_space = false;
        }
    }
    return out;
}

namespace {

const char* kRequiredKeys[] = {"id", "student_id", "log_id", "phase", "role", "text"};

std::string line_tag(const std::string& source, std::size_t line_no) {
    return source + ":" + std::to_string(line_no);
}

Utterance parse_utterance(const Json& rec, const std::string& where) {
    if (!rec.is_object()) throw DataError(where + ": record is not a JSON object");
    for (const char* key : kRequiredKeys) {
        if (!rec.contains(key)) throw DataError(where + ": missing key '" + std::string(key) + "'");
    }
    for (auto it = rec.begin(); it != rec.end(); ++it) {
        const std::string& k = it.key();
        bool known = k == "week";
        for (const char* key : kRequiredKeys) known = known || k == key;
        if (!known) throw DataError(where + ": unknown key '" + k + "'");
    }

    Utterance u;
    auto str_field = [&](const char* key) {
        const Json& v = rec.at(key);
        if (!v.is_string()) throw DataError(where + ": '" + key + "' must be a string");
        return v.get<std::string>();
    };
    u.id = str_field("id");
    u.student_id = str_field("student_id");
    u.log_id = str_field("log_id");
    if (u.id.empty()) throw DataError(where + ": empty id");
    if (u.student_id.empty()) throw DataError(where + ": empty student_id");
    if (u.log_id.empty()) throw DataError(where + ": empty log_id");

    if (rec.contains("week")) {
        const Json& w = rec.at("week");
        if (!w.is_number_integer()) throw DataError(where + ": 'week' must be an integer");
        const int week = w.get<int>();
        if (week < 1) throw DataError(where + ": 'week' must be >= 1");
        u.week = week;
    }

    const std::string phase = str_field("phase");
    if (phase == "pre") u.phase = Phase::pre;
    else if (phase == "post") u.phase = Phase::post;
    else throw DataError(where + ": unknown phase '" + phase + "'");

    const std::string role = str_field("role");
    if (role == "student") u.role = Role::student;
    else if (role == "ai") u.role = Role::ai;
    else throw DataError(where + ": unknown role '" + role + "'");

    u.text = normalize_text(str_field("text"));
    if (u.text.empty()) throw DataError(where + ": text is empty after trimming");
    return u;
}

}  // namespace

Corpus parse_corpus(const std::string& text, const std::string& source_name) {
    Corpus corpus;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (normalize_text(line).empty()) continue;

        const std::string where = line_tag(source_name, line_no);
        Json rec;
        try {
            rec = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(where + ": malformed JSON line: " + e.what());
        }
        Utterance u = parse_utterance(rec, where);
        if (!ids.insert(u.id).second) {
            throw DataError(where + ": duplicate utterance id '" + u.id + "'");
        }
        corpus.utterances.push_back(std::move(u));
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
    return parse_corpus(read_text_file(path), path.filename().string());
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& u : corpus.utterances) {
        Json rec;
        rec["id"] = u.id;
        rec["student_id"] = u.student_id;
        rec["log_id"] = u.log_id;
        if (u.week) rec["week"] = *u.week;
        rec["phase"] = u.phase == Phase::pre ? "pre" : "post";
        rec["role"] = u.role == Role::student ? "student" : "ai";
        rec["text"] = u.text;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    write_text_file_atomic(path, serialize_corpus(corpus));
}

std::array<std::vector<std::size_t>, 4> segment_streams(const Corpus& corpus) {
    std::array<std::vector<std::size_t>, 4> streams;
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
        const auto& u = corpus.utterances[i];
        streams[static_cast<int>(stream_of(u.phase, u.role))].push_back(i);
    }
    return streams;
}

}  // namespace dpat
