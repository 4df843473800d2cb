#include "dpat/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dpat/errors.hpp"
#include "dpat/rng.hpp"

namespace dpat {

PlantedMatrix planted_matrix(std::size_t n, std::size_t dim, std::size_t c, double center_scale,
                             double noise_sigma, std::uint64_t seed) {
    if (c > dim) throw NumericError("planted_matrix: need c <= dim for axis centers");
    PlantedMatrix out;
    out.matrix.dim = dim;
    out.matrix.ids.reserve(n);
    out.matrix.data.reserve(n * dim);
    out.labels.reserve(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t g = static_cast<std::uint32_t>(i % c);
        char buf[24];
        std::snprintf(buf, sizeof(buf), "u%05zu", i);
        out.matrix.ids.emplace_back(buf);
        out.labels.push_back(g);
        for (std::size_t d = 0; d < dim; ++d) {
            double v = standard_normal(rng) * noise_sigma;
            if (d == g) v += center_scale;  // axis-aligned group centers
            out.matrix.data.push_back(static_cast<float>(v));
        }
    }
    return out;
}

FixtureData make_fixture(const FixtureSpec& spec) {
    const std::size_t max_groups =
        *std::max_element(spec.groups_per_stream.begin(), spec.groups_per_stream.end());
    if (4 * max_groups > spec.dim) {
        throw NumericError("make_fixture: need dim >= 4 * max groups per stream");
    }

    FixtureData out;
    out.scheme = default_oslq_scheme();
    out.vectors.dim = spec.dim;
    Rng rng(spec.seed);

    // latent trait per student drives the first subscale and, when linked,
    // the group mix of the student's PreQ utterances
    std::vector<double> trait(spec.n_students);
    for (double& t : trait) t = uniform01(rng);

    const char* phase_of[4] = {"pre", "post", "pre", "post"};
    const char* role_of[4] = {"student", "student", "ai", "ai"};

    std::size_t utt_counter = 0;
    for (std::size_t s = 0; s < spec.n_students; ++s) {
        char sid[24];
        std::snprintf(sid, sizeof(sid), "s%04zu", s + 1);
        for (std::size_t l = 0; l < spec.logs_per_student; ++l) {
            char lid[32];
            std::snprintf(lid, sizeof(lid), "%s_log%zu", sid, l + 1);
            for (int st = 0; st < 4; ++st) {
                const std::size_t n_groups = spec.groups_per_stream[st];
                for (std::size_t uu = 0; uu < spec.utterances_per_log_per_stream; ++uu) {
                    std::size_t group;
                    if (st == 0 && spec.srl_link_strength > 0.0) {
                        // high-trait students lean toward group 0
                        const double p0 = 0.15 + 0.7 * spec.srl_link_strength * trait[s];
                        group = uniform01(rng) < p0 ? 0 : 1 + uniform_index(rng, n_groups - 1);
                    } else {
                        group = uniform_index(rng, n_groups);
                    }

                    Utterance u;
                    char uid[32];
                    std::snprintf(uid, sizeof(uid), "u%06zu", utt_counter++);
                    u.id = uid;
                    u.student_id = sid;
                    u.log_id = lid;
                    u.week = static_cast<int>(l % 4) + 1;
                    u.phase = st == 0 || st == 2 ? Phase::pre : Phase::post;
                    u.role = st <= 1 ? Role::student : Role::ai;
                    u.text = std::string(role_of[st]) + " " + phase_of[st] + " topic " +
                             std::to_string(group) + " item " + std::to_string(utt_counter);
                    out.corpus.utterances.push_back(std::move(u));

                    out.vectors.ids.emplace_back(uid);
                    for (std::size_t d = 0; d < spec.dim; ++d) {
                        double v = standard_normal(rng) * spec.noise_sigma;
                        // shared positive base keeps cosines in friendly range
                        v += 0.15;
                        if (d == static_cast<std::size_t>(st) * max_groups + group) v += 4.0;
                        out.vectors.data.push_back(static_cast<float>(v));
                    }
                }
            }
        }
    }

    // questionnaire: first subscale follows the trait, the rest are noise
    const auto items = out.scheme.item_columns();
    std::string csv = "student_id";
    for (const auto& col : items) csv += "," + col;
    csv += "\n";
    const double lo = out.scheme.min_response, hi = out.scheme.max_response;
    std::size_t offset_first = out.scheme.groups.front().second.size();
    for (std::size_t s = 0; s < spec.n_students; ++s) {
        char sid[24];
        std::snprintf(sid, sizeof(sid), "s%04zu", s + 1);
        csv += sid;
        for (std::size_t j = 0; j < items.size(); ++j) {
            double v;
            if (j < offset_first) {
                const double noisy = trait[s] + standard_normal(rng) * 0.15;
                v = std::round(lo + std::clamp(noisy, 0.0, 1.0) * (hi - lo));
            } else {
                v = static_cast<double>(uniform_int(rng, static_cast<std::int64_t>(lo),
                                                    static_cast<std::int64_t>(hi)));
            }
            csv += "," + format_fixed(v, 0);
        }
        csv += "\n";
    }
    out.oslq_csv = std::move(csv);
    return out;
}

void write_fixture(const FixtureData& data, const std::filesystem::path& dir) {
    fs::create_directories(dir);
    save_corpus(data.corpus, dir / "corpus.jsonl");
    write_vector_store(data.vectors, dir / "vectors_source.emb");
    write_text_file_atomic(dir / "oslq.csv", data.oslq_csv);
    write_text_file_atomic(dir / "oslq_scheme.json", scheme_to_json(data.scheme).dump(2) + "\n");
}

}  // namespace dpat
