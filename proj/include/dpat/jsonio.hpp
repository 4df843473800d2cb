#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dpat {

// Key order is preserved on dump, so serialized artifacts are byte-stable.
using Json = nlohmann::ordered_json;

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path);

// Writes via a .partial sibling and renames into place, so a failed stage
// never leaves a truncated artifact under the final name.
void write_text_file_atomic(const fs::path& path, const std::string& content);
void write_binary_file_atomic(const fs::path& path, const std::vector<unsigned char>& bytes);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const fs::path& path);

Json parse_json(const std::string& text, const std::string& what);
Json load_json_file(const fs::path& path);

// "0.293" / "-0.288"; fixed three decimals, used by the report tables.
std::string format_fixed(double v, int decimals);
// Shortest representation that parses back to the same double.
std::string format_double_shortest(double v);
// Paper-style magnitude with the leading zero stripped: 0.596 -> ".596".
std::string format_bare(double v, int decimals);

std::string csv_escape(const std::string& field);

}  // namespace dpat
