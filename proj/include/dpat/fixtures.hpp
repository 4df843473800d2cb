#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "dpat/corpus.hpp"
#include "dpat/oslq.hpp"
#include "dpat/vector_store.hpp"

namespace dpat {

// Synthetic dataset generator for demos and end-to-end tests: a corpus with
// planted semantic groups per stream, a matching vector store (group
// direction plus Gaussian noise) and a questionnaire file. One utterance
// group per stream is optionally linked to the first subscale so the
// correlation stage has a known signal to find.
struct FixtureSpec {
    std::size_t n_students = 24;
    std::size_t logs_per_student = 2;
    std::size_t utterances_per_log_per_stream = 2;
    std::size_t dim = 32;
    std::array<std::size_t, 4> groups_per_stream = {3, 3, 2, 3};
    double noise_sigma = 0.08;
    double srl_link_strength = 0.0;  // 0 disables the planted correlation
    std::uint64_t seed = 7;
};

struct FixtureData {
    Corpus corpus;
    EmbeddingMatrix vectors;  // all utterances
    std::string oslq_csv;
    OslqScheme scheme;
};

FixtureData make_fixture(const FixtureSpec& spec);

// Writes corpus.jsonl, vectors.emb, oslq.csv, oslq_scheme.json under dir.
void write_fixture(const FixtureData& data, const std::filesystem::path& dir);

// Standalone planted-cluster embedding matrix: c groups of roughly equal
// size, unit-direction centers, Gaussian noise. Labels returned by group.
struct PlantedMatrix {
    EmbeddingMatrix matrix;
    std::vector<std::uint32_t> labels;
};
PlantedMatrix planted_matrix(std::size_t n, std::size_t dim, std::size_t c, double center_scale,
                             double noise_sigma, std::uint64_t seed);

}  // namespace dpat
