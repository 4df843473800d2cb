#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "dpat/fixtures.hpp"

// Emits a synthetic corpus + vector store + questionnaire so the pipeline can
// be exercised without credentials or real dialogue data.
int main(int argc, char** argv) {
    CLI::App app{"dpat-fixture - synthetic dataset generator"};
    std::string out_dir = "fixture";
    std::size_t students = 24;
    std::size_t logs = 2;
    std::size_t per_stream = 2;
    std::size_t dim = 32;
    double link = 0.8;
    std::uint64_t seed = 7;
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--students", students, "number of students");
    app.add_option("--logs", logs, "logs per student");
    app.add_option("--per-stream", per_stream, "utterances per log per stream");
    app.add_option("--dim", dim, "embedding dimension");
    app.add_option("--link", link, "strength of the planted SRL link in [0,1]");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        dpat::FixtureSpec spec;
        spec.n_students = students;
        spec.logs_per_student = logs;
        spec.utterances_per_log_per_stream = per_stream;
        spec.dim = dim;
        spec.srl_link_strength = link;
        spec.seed = seed;
        const dpat::FixtureData data = dpat::make_fixture(spec);
        dpat::write_fixture(data, out_dir);
        std::printf("fixture written to %s (%zu utterances, %zu students)\n", out_dir.c_str(),
                    data.corpus.utterances.size(), students);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
