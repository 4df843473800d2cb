#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace dpat {

// Dense per-utterance vectors, row order aligned with a stream's utterance
// order. Entries are finite 32-bit floats.
struct EmbeddingMatrix {
    std::size_t dim = 0;
    std::vector<std::string> ids;  // row order, unique
    std::vector<float> data;       // row-major, ids.size() * dim

    std::size_t rows() const { return ids.size(); }
    const float* row(std::size_t i) const { return data.data() + i * dim; }
    float* row(std::size_t i) { return data.data() + i * dim; }
};

void validate_matrix(const EmbeddingMatrix& m);

// Binary store: magic "EMB1", u32le row count, u32le dim, id table of
// u16le-length-prefixed UTF-8 ids in row order, then row-major f32le payload.
// Write-then-read round-trips bit-exactly.
void write_vector_store(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_vector_store(const std::filesystem::path& path);

std::vector<unsigned char> encode_vector_store(const EmbeddingMatrix& m);
EmbeddingMatrix decode_vector_store(const unsigned char* bytes, std::size_t size,
                                    const std::string& source_name);

// Every row scaled to unit Euclidean norm; an all-zero row is an error that
// names the offending utterance id.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

}  // namespace dpat
