#include "dpat/vector_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "dpat/errors.hpp"
#include "dpat/jsonio.hpp"

namespace dpat {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u16le(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void validate_matrix(const EmbeddingMatrix& m) {
    if (m.dim == 0) throw DataError("embedding matrix: dim must be positive");
    if (m.data.size() != m.ids.size() * m.dim) {
        throw DataError("embedding matrix: payload size does not match rows*dim");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : m.ids) {
        if (!seen.insert(id).second) throw DataError("embedding matrix: duplicate row id '" + id + "'");
    }
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        if (!std::isfinite(m.data[i])) {
            throw DataError("embedding matrix: non-finite value in row '" +
                            m.ids[i / m.dim] + "'");
        }
    }
}

std::vector<unsigned char> encode_vector_store(const EmbeddingMatrix& m) {
    validate_matrix(m);
    std::vector<unsigned char> out;
    out.reserve(16 + m.ids.size() * 12 + m.data.size() * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32le(out, static_cast<std::uint32_t>(m.ids.size()));
    put_u32le(out, static_cast<std::uint32_t>(m.dim));
    for (const auto& id : m.ids) {
        if (id.size() > 0xffff) throw DataError("vector store: id longer than 65535 bytes");
        put_u16le(out, static_cast<std::uint16_t>(id.size()));
        out.insert(out.end(), id.begin(), id.end());
    }
    const std::size_t payload_at = out.size();
    out.resize(payload_at + m.data.size() * 4);
    // f32 little-endian; memcpy is exact on this target
    std::memcpy(out.data() + payload_at, m.data.data(), m.data.size() * 4);
    return out;
}

EmbeddingMatrix decode_vector_store(const unsigned char* bytes, std::size_t size,
                                    const std::string& source_name) {
    if (size < 12 || std::memcmp(bytes, kMagic, 4) != 0) {
        throw DataError(source_name + ": not a vector store (bad magic)");
    }
    EmbeddingMatrix m;
    const std::uint32_t rows = get_u32le(bytes + 4);
    m.dim = get_u32le(bytes + 8);
    if (m.dim == 0) throw DataError(source_name + ": vector store header has dim 0");
    std::size_t pos = 12;
    m.ids.reserve(rows);
    for (std::uint32_t i = 0; i < rows; ++i) {
        if (pos + 2 > size) throw DataError(source_name + ": truncated id table");
        const std::uint16_t len = get_u16le(bytes + pos);
        pos += 2;
        if (pos + len > size) throw DataError(source_name + ": truncated id table");
        m.ids.emplace_back(reinterpret_cast<const char*>(bytes + pos), len);
        pos += len;
    }
    const std::size_t expected = static_cast<std::size_t>(rows) * m.dim * 4;
    if (size - pos != expected) {
        throw DataError(source_name + ": payload length inconsistent with header (" +
                        std::to_string(size - pos) + " bytes, expected " +
                        std::to_string(expected) + ")");
    }
    m.data.resize(static_cast<std::size_t>(rows) * m.dim);
    std::memcpy(m.data.data(), bytes + pos, expected);
    validate_matrix(m);
    return m;
}

void write_vector_store(const EmbeddingMatrix& m, const std::filesystem::path& path) {
    write_binary_file_atomic(path, encode_vector_store(m));
}

EmbeddingMatrix read_vector_store(const std::filesystem::path& path) {
    const std::string bytes = read_text_file(path);
    return decode_vector_store(reinterpret_cast<const unsigned char*>(bytes.data()),
                               bytes.size(), path.filename().string());
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
    EmbeddingMatrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const float* src = m.row(i);
        double norm_sq = 0.0;
        for (std::size_t d = 0; d < m.dim; ++d) {
            norm_sq += static_cast<double>(src[d]) * static_cast<double>(src[d]);
        }
        if (norm_sq == 0.0) {
            throw NumericError("l2_normalize: all-zero vector for utterance '" + m.ids[i] + "'");
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        float* dst = out.row(i);
        for (std::size_t d = 0; d < m.dim; ++d) {
            dst[d] = static_cast<float>(static_cast<double>(src[d]) * inv);
        }
    }
    return out;
}

}  // namespace dpat
