#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dpat {

enum class Phase { pre, post };
enum class Role { student, ai };

// The four analysis streams: student questions and AI responses, each split
// by pre/post-class phase.
enum class StreamKey : int { PreQ = 0, PostQ = 1, PreR = 2, PostR = 3 };
inline constexpr std::array<StreamKey, 4> kAllStreams = {StreamKey::PreQ, StreamKey::PostQ,
                                                         StreamKey::PreR, StreamKey::PostR};

StreamKey stream_of(Phase phase, Role role);
std::string to_string(StreamKey s);
StreamKey stream_from_string(const std::string& s);

struct Utterance {
    std::string id;
    std::string student_id;
    std::string log_id;
    std::optional<int> week;
    Phase phase = Phase::pre;
    Role role = Role::student;
    std::string text;  // whitespace-normalized, non-empty
};

struct Corpus {
    std::vector<Utterance> utterances;  // input order preserved

    std::vector<std::string> students() const;  // distinct, first-seen order
    std::vector<std::string> log_ids() const;   // distinct, first-seen order
};

// Trim plus collapse of internal whitespace runs; no case folding.
std::string normalize_text(const std::string& raw);

// JSON-lines, one utterance per line. Errors carry the 1-based line number.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(const std::string& text, const std::string& source_name);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Partition by (phase, role); within-stream order follows corpus order.
std::array<std::vector<std::size_t>, 4> segment_streams(const Corpus& corpus);

}  // namespace dpat
