#include "dpat/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dpat/errors.hpp"
#include "dpat/rng.hpp"

namespace dpat {

std::string to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::embed: return "embed";
        case Stage::search: return "search";
        case Stage::fit: return "fit";
        case Stage::profile: return "profile";
        case Stage::stats: return "stats";
        case Stage::report: return "report";
    }
    return "?";
}

namespace {

Metric metric_from(const std::string& s) {
    if (s == "euclidean") return Metric::euclidean;
    if (s == "cosine") return Metric::cosine;
    throw ConfigError("unknown metric '" + s + "'");
}

std::string metric_name(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

Unit unit_from(const std::string& s) {
    if (s == "student") return Unit::student;
    if (s == "log") return Unit::log;
    throw ConfigError("unit must be 'student' or 'log'");
}

FixedStreamParams fixed_from_json(const Json& j) {
    FixedStreamParams p;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "n_neighbors") p.n_neighbors = it.value().get<std::size_t>();
        else if (key == "min_dist") p.min_dist = it.value().get<double>();
        else if (key == "n_components") p.n_components = it.value().get<std::size_t>();
        else if (key == "metric") p.metric = metric_from(it.value().get<std::string>());
        else if (key == "k") p.k = it.value().get<std::size_t>();
        else throw ConfigError("unknown fixed-params key '" + key + "'");
    }
    return p;
}

Json fixed_to_json(const FixedStreamParams& p) {
    return Json{{"n_neighbors", p.n_neighbors}, {"min_dist", p.min_dist},
                {"n_components", p.n_components}, {"metric", metric_name(p.metric)},
                {"k", p.k}};
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

// Owns out/.lock for the duration of a pipeline run.
class DirLock {
  public:
    explicit DirLock(const fs::path& out_dir) : path_(out_dir / ".lock") {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw IntegrityError("output directory is locked by another run: " + path_.string());
        }
        ::close(fd);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    fs::path path_;
};

struct StageContext {
    const RunConfig* config = nullptr;
    fs::path out;
    std::vector<fs::path> written;

    fs::path artifact(const std::string& name) const { return out / name; }

    std::string require_artifact_hash(const std::string& name) const {
        const fs::path p = artifact(name);
        if (!fs::exists(p)) {
            throw IntegrityError("missing upstream artifact '" + name +
                                 "' (run the earlier stages first)");
        }
        return sha256_file_hex(p);
    }

    void write_text(const std::string& name, const std::string& content) {
        write_text_file_atomic(artifact(name), content);
        written.push_back(artifact(name));
    }
    void write_binary(const std::string& name, const std::vector<unsigned char>& bytes) {
        write_binary_file_atomic(artifact(name), bytes);
        written.push_back(artifact(name));
    }
};

std::string hash_input_file(const fs::path& p) {
    if (!fs::exists(p)) throw DataError("input file not found: " + p.string());
    return sha256_file_hex(p);
}

// ---------------------------------------------------------------------------
// shared loaders over persisted artifacts

EmbeddingMatrix stream_matrix(const EmbeddingMatrix& store, const Corpus& corpus,
                              const std::vector<std::size_t>& members) {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(store.rows());
    for (std::size_t i = 0; i < store.rows(); ++i) index.emplace(store.ids[i], i);
    EmbeddingMatrix m;
    m.dim = store.dim;
    m.ids.reserve(members.size());
    m.data.reserve(members.size() * store.dim);
    for (std::size_t idx : members) {
        const auto& id = corpus.utterances[idx].id;
        const auto it = index.find(id);
        if (it == index.end()) {
            throw DataError("vector store has no row for utterance id '" + id + "'");
        }
        m.ids.push_back(id);
        const float* row = store.row(it->second);
        m.data.insert(m.data.end(), row, row + store.dim);
    }
    return m;
}

struct ChosenParams {
    UmapParams umap;
    std::size_t k = 0;
    std::uint64_t kmeans_seed = 0;
};

ChosenParams chosen_from_json(const Json& j, const RunConfig& cfg) {
    ChosenParams c;
    c.umap.n_neighbors = j.at("n_neighbors").get<std::size_t>();
    c.umap.min_dist = j.at("min_dist").get<double>();
    c.umap.n_components = j.at("n_components").get<std::size_t>();
    c.umap.metric = metric_from(j.at("metric").get<std::string>());
    c.umap.seed = j.at("umap_seed").get<std::uint64_t>();
    c.umap.n_epochs = cfg.space.n_epochs;
    c.umap.negative_sample_rate = cfg.space.negative_sample_rate;
    c.umap.learning_rate = cfg.space.learning_rate;
    c.umap.parallel_layout = cfg.parallel_layout;
    c.k = j.at("k").get<std::size_t>();
    c.kmeans_seed = j.at("kmeans_seed").get<std::uint64_t>();
    return c;
}

std::string render_report_md(const Json& stats, const CorrelationTable& corr,
                             const GroupTable& groups,
                             const std::vector<ClassificationVerdict>& verdicts,
                             const std::map<std::string, std::vector<StudentAlert>>& alerts,
                             const RunConfig& cfg);

// ---------------------------------------------------------------------------
// stage bodies

void stage_ingest(StageContext& ctx) {
    const RunConfig& cfg = *ctx.config;
    const Corpus corpus = load_corpus(cfg.corpus_path);
    const OslqData oslq = load_oslq(cfg.oslq_path, cfg.scheme);

    ctx.write_text("corpus_normalized.jsonl", serialize_corpus(corpus));

    Json oj;
    oj["scheme"] = scheme_to_json(cfg.scheme);
    Json recs = Json::array();
    for (const auto& r : oslq.records) {
        Json rj;
        rj["student_id"] = r.student_id;
        rj["items"] = r.items;
        Json subs;
        for (const auto& [name, v] : r.subscales) subs[name] = v;
        rj["subscales"] = std::move(subs);
        rj["total"] = r.total;
        recs.push_back(std::move(rj));
    }
    oj["records"] = std::move(recs);
    Json rej = Json::array();
    for (const auto& r : oslq.rejected) {
        rej.push_back(Json{{"student_id", r.student_id}, {"reason", r.reason}});
    }
    oj["rejected"] = std::move(rej);
    ctx.write_text("oslq_normalized.json", oj.dump(2) + "\n");
}

void stage_embed(StageContext& ctx) {
    const RunConfig& cfg = *ctx.config;
    const Corpus corpus =
        parse_corpus(read_text_file(ctx.artifact("corpus_normalized.jsonl")),
                     "corpus_normalized.jsonl");
    std::vector<const Utterance*> all;
    all.reserve(corpus.utterances.size());
    for (const auto& u : corpus.utterances) all.push_back(&u);
    const EmbeddingMatrix matrix = get_vectors(all, cfg.provider);
    ctx.write_binary("vectors.emb", encode_vector_store(matrix));
}

void stage_search(StageContext& ctx) {
    const RunConfig& cfg = *ctx.config;
    const Corpus corpus =
        parse_corpus(read_text_file(ctx.artifact("corpus_normalized.jsonl")),
                     "corpus_normalized.jsonl");
    const EmbeddingMatrix store = read_vector_store(ctx.artifact("vectors.emb"));
    const auto streams = segment_streams(corpus);

    Json out;
    out["master_seed"] = cfg.space.master_seed;
    Json streams_json;
    std::string csv =
        "stream,trial_id,phase,status,n_neighbors,min_dist,n_components,metric,k,"
        "silhouette,calinski_harabasz,davies_bouldin,sil_norm,ch_norm,db_norm,composite,note\n";

    for (int s = 0; s < 4; ++s) {
        const StreamKey key = kAllStreams[s];
        const std::string name = to_string(key);
        Json sj;
        const auto fixed = cfg.fixed_params.find(key);
        if (fixed != cfg.fixed_params.end()) {
            sj["mode"] = "fixed";
            Json chosen = fixed_to_json(fixed->second);
            chosen["umap_seed"] = derive_seed(cfg.space.master_seed, 0x500 + s);
            chosen["kmeans_seed"] = derive_seed(cfg.space.master_seed, 0x600 + s);
            sj["chosen"] = std::move(chosen);
        } else {
            if (streams[s].empty()) {
                throw DataError("search: stream " + name + " has no utterances");
            }
            const EmbeddingMatrix m = stream_matrix(store, corpus, streams[s]);
            SearchSpace space = cfg.space;
            space.master_seed = derive_seed(cfg.space.master_seed, s);
            SearchReport report =
                run_search(m, name, space, cfg.coarse_trials, cfg.fine_per_config, cfg.exec);
            const Trial& best = report.best();
            sj["mode"] = "search";
            Json chosen;
            chosen["n_neighbors"] = best.umap.n_neighbors;
            chosen["min_dist"] = best.umap.min_dist;
            chosen["n_components"] = best.umap.n_components;
            chosen["metric"] = metric_name(best.umap.metric);
            chosen["k"] = best.kmeans.k;
            chosen["umap_seed"] = best.umap.seed;
            chosen["kmeans_seed"] = best.kmeans.seed;
            sj["chosen"] = std::move(chosen);
            sj["report"] = report.to_json();

            const std::string stream_csv = report.trials_csv();
            const std::size_t first_line = stream_csv.find('\n') + 1;
            std::size_t pos = first_line;
            while (pos < stream_csv.size()) {
                const std::size_t nl = stream_csv.find('\n', pos);
                csv += name + "," + stream_csv.substr(pos, nl - pos) + "\n";
                pos = nl + 1;
            }
        }
        streams_json[name] = std::move(sj);
    }
    out["streams"] = std::move(streams_json);
    ctx.write_text("search_report.json", out.dump(2) + "\n");
    ctx.write_text("search_trials.csv", csv);
}

void stage_fit(StageContext& ctx) {
    const RunConfig& cfg = *ctx.config;
    const Corpus corpus =
        parse_corpus(read_text_file(ctx.artifact("corpus_normalized.jsonl")),
                     "corpus_normalized.jsonl");
    const EmbeddingMatrix store = read_vector_store(ctx.artifact("vectors.emb"));
    const Json search = load_json_file(ctx.artifact("search_report.json"));
    const auto streams = segment_streams(corpus);

    PatternCatalog catalog;
    catalog.dim = store.dim;
    Json provenance;

    for (int s = 0; s < 4; ++s) {
        const StreamKey key = kAllStreams[s];
        const std::string name = to_string(key);
        if (streams[s].empty()) continue;
        const EmbeddingMatrix m = stream_matrix(store, corpus, streams[s]);
        const ChosenParams chosen =
            chosen_from_json(search.at("streams").at(name).at("chosen"), cfg);
        if (m.rows() <= chosen.umap.n_neighbors) {
            throw DataError("fit: stream " + name + " has too few utterances for n_neighbors " +
                            std::to_string(chosen.umap.n_neighbors));
        }

        const UmapResult fit = umap_fit(m, chosen.umap, cfg.exec);
        KMeansParams kp;
        kp.k = chosen.k;
        kp.seed = chosen.kmeans_seed;
        kp.n_init = cfg.space.kmeans_n_init;
        kp.max_iter = cfg.space.kmeans_max_iter;
        kp.tol = cfg.space.kmeans_tol;
        const KMeansModel model = kmeans_fit(fit.coords.data, m.rows(), fit.coords.dim, kp,
                                             cfg.exec);
        const ValidityMetrics metrics =
            validity_indices(fit.coords.data, m.rows(), fit.coords.dim, model.labels, cfg.exec);
        const std::vector<double> centroids = embedding_centroids(m, model.labels, chosen.k);

        ctx.write_text("reduced_" + name + ".jsonl", serialize_reduced(fit.coords));
        Json meta = fit.metadata();
        meta["stream"] = name;
        meta["k"] = chosen.k;
        meta["inertia"] = model.inertia;
        ctx.write_text("reduced_" + name + ".meta.json", meta.dump(2) + "\n");

        for (std::size_t c = 0; c < chosen.k; ++c) {
            Pattern p;
            p.pattern_id = name + "_cluster" + std::to_string(c);
            p.stream = key;
            p.embedding_centroid.assign(centroids.begin() + c * store.dim,
                                        centroids.begin() + (c + 1) * store.dim);
            const auto cat = cfg.category_map.find(p.pattern_id);
            if (cat != cfg.category_map.end()) p.category = cat->second;

            // representative utterances: highest alignment first
            std::vector<std::pair<double, std::size_t>> scored;
            for (std::size_t r = 0; r < m.rows(); ++r) {
                if (model.labels[r] != c) continue;
                scored.emplace_back(
                    -alignment_score(m.row(r), p.embedding_centroid.data(), m.dim), r);
            }
            std::sort(scored.begin(), scored.end());
            const std::size_t n_rep = std::min(cfg.n_representatives, scored.size());
            for (std::size_t i = 0; i < n_rep; ++i) {
                const std::size_t row = scored[i].second;
                const Utterance& u = corpus.utterances[streams[s][row]];
                p.representatives.push_back({u.id, u.text, -scored[i].first});
            }
            catalog.patterns.push_back(std::move(p));
        }

        Json pj;
        pj["params"] = chosen.umap.to_json();
        pj["k"] = chosen.k;
        pj["kmeans_seed"] = chosen.kmeans_seed;
        pj["inertia"] = model.inertia;
        Json vm;
        if (metrics.silhouette) vm["silhouette"] = *metrics.silhouette;
        if (metrics.calinski_harabasz && std::isfinite(*metrics.calinski_harabasz)) {
            vm["calinski_harabasz"] = *metrics.calinski_harabasz;
        }
        if (metrics.davies_bouldin) vm["davies_bouldin"] = *metrics.davies_bouldin;
        pj["validity"] = std::move(vm);
        provenance[name] = std::move(pj);
    }
    catalog.provenance = std::move(provenance);
    ctx.write_text("pattern_catalog.json", catalog.to_json().dump(2) + "\n");
}

void stage_profile(StageContext& ctx) {
    const RunConfig& cfg = *ctx.config;
    const Corpus corpus =
        parse_corpus(read_text_file(ctx.artifact("corpus_normalized.jsonl")),
                     "corpus_normalized.jsonl");
    const EmbeddingMatrix store = read_vector_store(ctx.artifact("vectors.emb"));
    const PatternCatalog catalog =
        PatternCatalog::from_json(load_json_file(ctx.artifact("pattern_catalog.json")));
    const auto streams = segment_streams(corpus);

    std::array<EmbeddingMatrix, 4> mats;
    for (int s = 0; s < 4; ++s) mats[s] = stream_matrix(store, corpus, streams[s]);

    auto emit = [&](Unit unit) {
        const auto profiles = student_profiles(corpus, streams, mats, catalog, unit);
        ctx.write_text("profiles_" + to_string(unit) + ".csv", profiles_csv(profiles, catalog));
        ctx.write_text("support_" + to_string(unit) + ".csv", support_csv(profiles, catalog));
    };
    emit(cfg.correlation_unit);
    if (cfg.group_unit != cfg.correlation_unit) emit(cfg.group_unit);
}

std::vector<QuestionnaireRecord> records_from_artifact(const Json& oslq) {
    std::vector<QuestionnaireRecord> records;
    for (const auto& rj : oslq.at("records")) {
        QuestionnaireRecord r;
        r.student_id = rj.at("student_id").get<std::string>();
        r.items = rj.at("items").get<std::vector<double>>();
        for (auto it = rj.at("subscales").begin(); it != rj.at("subscales").end(); ++it) {
            r.subscales[it.key()] = it.value().get<double>();
        }
        r.total = rj.at("total").get<double>();
        records.push_back(std::move(r));
    }
    return records;
}

void stage_stats(StageContext& ctx) {
    const RunConfig& cfg = *ctx.config;
    const Json oslq = load_json_file(ctx.artifact("oslq_normalized.json"));
    const PatternCatalog catalog =
        PatternCatalog::from_json(load_json_file(ctx.artifact("pattern_catalog.json")));
    const auto records = records_from_artifact(oslq);
    const auto corr_profiles = parse_profiles_csv(
        read_text_file(ctx.artifact("profiles_" + to_string(cfg.correlation_unit) + ".csv")),
        "profiles");
    const auto group_profiles = parse_profiles_csv(
        read_text_file(ctx.artifact("profiles_" + to_string(cfg.group_unit) + ".csv")),
        "profiles");

    Json out;
    out["alpha"] = cfg.alpha;
    out["units"] = Json{{"correlation", to_string(cfg.correlation_unit)},
                        {"group", to_string(cfg.group_unit)}};

    // questionnaire reliability
    std::vector<std::vector<double>> item_matrix;
    for (const auto& r : records) item_matrix.push_back(r.items);
    Json oslq_out;
    oslq_out["n_records"] = records.size();
    oslq_out["n_rejected"] = oslq.at("rejected").size();
    if (item_matrix.size() >= 2) {
        const auto alpha = cronbach_alpha(item_matrix);
        if (alpha) oslq_out["cronbach_alpha"] = *alpha;
        else oslq_out["cronbach_alpha"] = nullptr;
    }
    out["oslq"] = std::move(oslq_out);

    // RQ1: descriptive distribution of alignment scores
    Json desc = Json::array();
    for (const Pattern& p : catalog.patterns) {
        std::vector<double> values;
        for (const auto& prof : corr_profiles) {
            const auto it = prof.scores.find(p.pattern_id);
            if (it != prof.scores.end()) values.push_back(it->second);
        }
        Json dj;
        dj["pattern_id"] = p.pattern_id;
        dj["n"] = values.size();
        if (values.size() >= 2) {
            const Descriptives d = describe(values);
            dj["status"] = "ok";
            dj["mean"] = d.mean;
            dj["sd"] = d.sd;
            dj["min"] = d.min;
            dj["q1"] = d.q1;
            dj["median"] = d.median;
            dj["q3"] = d.q3;
            dj["max"] = d.max;
        } else {
            dj["status"] = "insufficient";
        }
        desc.push_back(std::move(dj));
    }
    out["descriptives"] = std::move(desc);

    // RQ2: Spearman correlations with FDR
    const CorrelationTable corr =
        build_correlation_table(corr_profiles, records, catalog, cfg.alpha, cfg.fdr_family);
    out["correlations"] = correlation_table_to_json(corr);

    // RQ3: median split + Mann-Whitney
    std::map<std::string, double> totals;
    for (const auto& r : records) totals[r.student_id] = r.total;
    if (totals.size() < 2) throw DataError("stats: need at least 2 questionnaire records");
    const auto split = median_split(totals);
    std::vector<double> total_values;
    for (const auto& [id, v] : totals) total_values.push_back(v);
    Json split_json;
    split_json["median"] = quantile(total_values, 0.5);
    std::size_t n_high = 0;
    Json groups_json;
    for (const auto& [id, g] : split) {
        groups_json[id] = g == SrlGroup::high ? "high" : "low";
        if (g == SrlGroup::high) ++n_high;
    }
    split_json["n_high"] = n_high;
    split_json["n_low"] = split.size() - n_high;
    split_json["groups"] = std::move(groups_json);
    out["median_split"] = std::move(split_json);

    const GroupTable groups = build_group_table(group_profiles, split, catalog, cfg.alpha);
    out["groups"] = group_table_to_json(groups);

    ctx.write_text("stats_report.json", out.dump(2) + "\n");
}

void stage_report(StageContext& ctx) {
    const RunConfig& cfg = *ctx.config;
    const Json stats = load_json_file(ctx.artifact("stats_report.json"));
    const PatternCatalog catalog =
        PatternCatalog::from_json(load_json_file(ctx.artifact("pattern_catalog.json")));
    const auto corr_profiles = parse_profiles_csv(
        read_text_file(ctx.artifact("profiles_" + to_string(cfg.correlation_unit) + ".csv")),
        "profiles");

    const CorrelationTable corr = correlation_table_from_json(stats.at("correlations"));
    const GroupTable groups = group_table_from_json(stats.at("groups"));
    std::map<std::string, DhasrlCategory> category_map = cfg.category_map;
    for (const Pattern& p : catalog.patterns) {
        if (!category_map.count(p.pattern_id)) category_map[p.pattern_id] = p.category;
    }
    const auto verdicts = classify_patterns(corr, category_map);
    const auto alerts = student_alerts(corr_profiles, verdicts, cfg.alert_percentile);

    // machine-readable side files
    ctx.write_text("correlations.csv", correlation_table_csv(corr));
    ctx.write_text("groups.csv", group_table_csv(groups));

    std::string desc_csv = "pattern_id,status,n,mean,sd,min,q1,median,q3,max\n";
    for (const auto& dj : stats.at("descriptives")) {
        desc_csv += dj.at("pattern_id").get<std::string>();
        if (dj.at("status").get<std::string>() != "ok") {
            desc_csv += ",insufficient," + std::to_string(dj.at("n").get<std::size_t>()) +
                        ",,,,,,,\n";
            continue;
        }
        desc_csv += ",ok," + std::to_string(dj.at("n").get<std::size_t>());
        for (const char* key : {"mean", "sd", "min", "q1", "median", "q3", "max"}) {
            desc_csv += "," + format_fixed(dj.at(key).get<double>(), 3);
        }
        desc_csv += "\n";
    }
    ctx.write_text("descriptives.csv", desc_csv);

    Json cls = Json::array();
    for (const auto& v : verdicts) {
        Json vj;
        vj["pattern_id"] = v.pattern_id;
        vj["verdict"] = to_string(v.verdict);
        vj["dhasrl_category"] = to_string(v.category);
        Json ev = Json::array();
        for (const auto& c : v.evidence) {
            ev.push_back(Json{{"srl_variable", c.srl_variable},
                              {"rho", c.rho},
                              {"p_adj", c.p_adj}});
        }
        vj["evidence"] = std::move(ev);
        cls.push_back(std::move(vj));
    }
    ctx.write_text("classification.json", cls.dump(2) + "\n");

    Json alerts_json;
    alerts_json["percentile"] = cfg.alert_percentile;
    Json per_unit;
    for (const auto& [unit, list] : alerts) {
        Json arr = Json::array();
        for (const auto& a : list) {
            arr.push_back(Json{{"pattern_id", a.pattern_id},
                               {"score", a.score},
                               {"threshold", a.threshold}});
        }
        per_unit[unit] = std::move(arr);
    }
    alerts_json["alerts"] = std::move(per_unit);
    ctx.write_text("alerts.json", alerts_json.dump(2) + "\n");

    ctx.write_text("report.md", render_report_md(stats, corr, groups, verdicts, alerts, cfg));
}

// ---------------------------------------------------------------------------
// human-readable report

std::string render_report_md(const Json& stats, const CorrelationTable& corr,
                             const GroupTable& groups,
                             const std::vector<ClassificationVerdict>& verdicts,
                             const std::map<std::string, std::vector<StudentAlert>>& alerts,
                             const RunConfig& cfg) {
    std::string md = "# Dialogue pattern analysis\n\n";

    md += "## Questionnaire\n\n";
    const Json& oslq = stats.at("oslq");
    md += "- records: " + std::to_string(oslq.at("n_records").get<std::size_t>()) + "\n";
    md += "- rejected (missing items): " +
          std::to_string(oslq.at("n_rejected").get<std::size_t>()) + "\n";
    if (oslq.contains("cronbach_alpha") && !oslq.at("cronbach_alpha").is_null()) {
        md += "- Cronbach's alpha: " +
              format_fixed(oslq.at("cronbach_alpha").get<double>(), 3) + "\n";
    }
    md += "\n";

    md += "## Pattern distribution (unit: " +
          stats.at("units").at("correlation").get<std::string>() + ")\n\n";
    md += "| pattern | n | M | SD | min | Q1 | median | Q3 | max |\n";
    md += "|---|---|---|---|---|---|---|---|---|\n";
    struct Prominence {
        std::string id;
        double mean;
    };
    std::vector<Prominence> prominences;
    for (const auto& dj : stats.at("descriptives")) {
        md += "| " + dj.at("pattern_id").get<std::string>() + " | " +
              std::to_string(dj.at("n").get<std::size_t>()) + " | ";
        if (dj.at("status").get<std::string>() == "ok") {
            md += format_bare(dj.at("mean").get<double>(), 3) + " | " +
                  format_bare(dj.at("sd").get<double>(), 3) + " | " +
                  format_bare(dj.at("min").get<double>(), 3) + " | " +
                  format_bare(dj.at("q1").get<double>(), 3) + " | " +
                  format_bare(dj.at("median").get<double>(), 3) + " | " +
                  format_bare(dj.at("q3").get<double>(), 3) + " | " +
                  format_bare(dj.at("max").get<double>(), 3) + " |\n";
            prominences.push_back(
                {dj.at("pattern_id").get<std::string>(), dj.at("mean").get<double>()});
        } else {
            md += "insufficient | | | | | | |\n";
        }
    }
    if (!prominences.empty()) {
        const auto hi = std::max_element(prominences.begin(), prominences.end(),
                                         [](const auto& a, const auto& b) {
                                             return a.mean < b.mean;
                                         });
        const auto lo = std::min_element(prominences.begin(), prominences.end(),
                                         [](const auto& a, const auto& b) {
                                             return a.mean < b.mean;
                                         });
        md += "\nStrongest mean alignment: " + hi->id + ", M = " + format_bare(hi->mean, 3) +
              ". Weakest: " + lo->id + ", M = " + format_bare(lo->mean, 3) + ".\n";
    }
    md += "\n";

    md += "## Pattern x SRL correlations (Spearman, BH-FDR)\n\n";
    md += "alpha = " + format_fixed(corr.alpha, 2) + ", family: " +
          (corr.family == FdrFamily::per_table ? "per_table" : "per_column") + ", " +
          std::to_string(corr.family_size) + " cells corrected. `*` marks p_adj < alpha.\n\n";
    md += "| pattern |";
    for (const auto& v : corr.variables) md += " " + v + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < corr.variables.size(); ++i) md += "---|";
    md += "\n";
    std::string current;
    for (const CorrelationCell& c : corr.cells) {
        if (c.pattern_id != current) {
            if (!current.empty()) md += "\n";
            md += "| " + c.pattern_id + " |";
            current = c.pattern_id;
        }
        md += " ";
        md += c.ok ? format_corr_cell(c.rho, c.significant) : std::string("n/a");
        md += " |";
    }
    if (!current.empty()) md += "\n";
    md += "\n";

    md += "## High/low SRL group comparison (Mann-Whitney U, BH-FDR)\n\n";
    md += "high units: " + std::to_string(groups.n_high_units) +
          ", low units: " + std::to_string(groups.n_low_units) + "\n\n";
    md += "| pattern | high Mean(SD) | high median | low Mean(SD) | low median | U | p_adj |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const GroupComparisonRow& r : groups.rows) {
        md += "| " + r.pattern_id + " | ";
        if (!r.ok) {
            md += "insufficient | | | | | |\n";
            continue;
        }
        md += format_mean_sd(r.high.mean, r.high.sd) + " | " + format_fixed(r.high.median, 3) +
              " | " + format_mean_sd(r.low.mean, r.low.sd) + " | " +
              format_fixed(r.low.median, 3) + " | " + format_fixed(r.u, 3) + " | " +
              format_fixed(r.p_adj, 3) + (r.significant ? "*" : "") + " |\n";
    }
    md += "\n";

    md += "## Classification\n\n";
    md += "| pattern | verdict | category | significant cells |\n|---|---|---|---|\n";
    for (const auto& v : verdicts) {
        md += "| " + v.pattern_id + " | " + to_string(v.verdict) + " | " +
              to_string(v.category) + " | " + std::to_string(v.evidence.size()) + " |\n";
    }
    md += "\n";

    md += "## Alerts (percentile " + format_fixed(cfg.alert_percentile, 0) + ")\n\n";
    if (alerts.empty()) {
        md += "none\n";
    } else {
        md += "| unit | pattern | score | threshold |\n|---|---|---|---|\n";
        for (const auto& [unit, list] : alerts) {
            for (const auto& a : list) {
                md += "| " + unit + " | " + a.pattern_id + " | " + format_fixed(a.score, 3) +
                      " | " + format_fixed(a.threshold, 3) + " |\n";
            }
        }
    }
    return md;
}

// ---------------------------------------------------------------------------
// stage dispatch tables

void run_stage(StageContext& ctx, Stage stage) {
    try {
        switch (stage) {
            case Stage::ingest: stage_ingest(ctx); return;
            case Stage::embed: stage_embed(ctx); return;
            case Stage::search: stage_search(ctx); return;
            case Stage::fit: stage_fit(ctx); return;
            case Stage::profile: stage_profile(ctx); return;
            case Stage::stats: stage_stats(ctx); return;
            case Stage::report: stage_report(ctx); return;
        }
    } catch (const Error& e) {
        throw Error(e.exit_code(), "stage " + to_string(stage) + ": " + e.what());
    }
}

std::string stage_fingerprint(const StageContext& ctx, Stage stage) {
    const RunConfig& cfg = *ctx.config;
    Json f;
    f["stage"] = to_string(stage);
    switch (stage) {
        case Stage::ingest:
            f["corpus"] = hash_input_file(cfg.corpus_path);
            f["oslq"] = hash_input_file(cfg.oslq_path);
            f["scheme"] = scheme_to_json(cfg.scheme);
            break;
        case Stage::embed:
            f["corpus"] = ctx.require_artifact_hash("corpus_normalized.jsonl");
            f["provider"] = cfg.provider.to_json();
            if (cfg.provider.mode == ProviderMode::file &&
                fs::exists(cfg.provider.vector_file)) {
                f["source_store"] = sha256_file_hex(cfg.provider.vector_file);
            }
            break;
        case Stage::search: {
            f["corpus"] = ctx.require_artifact_hash("corpus_normalized.jsonl");
            f["vectors"] = ctx.require_artifact_hash("vectors.emb");
            f["space"] = cfg.space.to_json();
            f["coarse_trials"] = cfg.coarse_trials;
            f["fine_per_config"] = cfg.fine_per_config;
            Json fixed;
            for (const auto& [key, p] : cfg.fixed_params) fixed[to_string(key)] = fixed_to_json(p);
            f["fixed_params"] = std::move(fixed);
            f["parallel_layout"] = cfg.parallel_layout;
            break;
        }
        case Stage::fit: {
            f["corpus"] = ctx.require_artifact_hash("corpus_normalized.jsonl");
            f["vectors"] = ctx.require_artifact_hash("vectors.emb");
            f["search"] = ctx.require_artifact_hash("search_report.json");
            Json cats;
            for (const auto& [id, cat] : cfg.category_map) cats[id] = to_string(cat);
            f["categories"] = std::move(cats);
            f["n_representatives"] = cfg.n_representatives;
            f["parallel_layout"] = cfg.parallel_layout;
            break;
        }
        case Stage::profile:
            f["corpus"] = ctx.require_artifact_hash("corpus_normalized.jsonl");
            f["vectors"] = ctx.require_artifact_hash("vectors.emb");
            f["catalog"] = ctx.require_artifact_hash("pattern_catalog.json");
            f["correlation_unit"] = to_string(cfg.correlation_unit);
            f["group_unit"] = to_string(cfg.group_unit);
            break;
        case Stage::stats:
            f["oslq"] = ctx.require_artifact_hash("oslq_normalized.json");
            f["catalog"] = ctx.require_artifact_hash("pattern_catalog.json");
            f["profiles_corr"] = ctx.require_artifact_hash(
                "profiles_" + to_string(cfg.correlation_unit) + ".csv");
            f["profiles_group"] =
                ctx.require_artifact_hash("profiles_" + to_string(cfg.group_unit) + ".csv");
            f["alpha"] = cfg.alpha;
            f["fdr_family"] = cfg.fdr_family == FdrFamily::per_table ? "per_table" : "per_column";
            break;
        case Stage::report: {
            f["stats"] = ctx.require_artifact_hash("stats_report.json");
            f["catalog"] = ctx.require_artifact_hash("pattern_catalog.json");
            f["profiles_corr"] = ctx.require_artifact_hash(
                "profiles_" + to_string(cfg.correlation_unit) + ".csv");
            f["alert_percentile"] = cfg.alert_percentile;
            Json cats;
            for (const auto& [id, cat] : cfg.category_map) cats[id] = to_string(cat);
            f["categories"] = std::move(cats);
            break;
        }
    }
    return sha256_hex(f.dump());
}

std::vector<std::string> stage_outputs(const StageContext& ctx, Stage stage) {
    const RunConfig& cfg = *ctx.config;
    switch (stage) {
        case Stage::ingest: return {"corpus_normalized.jsonl", "oslq_normalized.json"};
        case Stage::embed: return {"vectors.emb"};
        case Stage::search: return {"search_report.json", "search_trials.csv"};
        case Stage::fit: {
            std::vector<std::string> out = {"pattern_catalog.json"};
            for (StreamKey key : kAllStreams) {
                out.push_back("reduced_" + to_string(key) + ".jsonl");
                out.push_back("reduced_" + to_string(key) + ".meta.json");
            }
            return out;
        }
        case Stage::profile: {
            std::vector<std::string> out = {
                "profiles_" + to_string(cfg.correlation_unit) + ".csv",
                "support_" + to_string(cfg.correlation_unit) + ".csv"};
            if (cfg.group_unit != cfg.correlation_unit) {
                out.push_back("profiles_" + to_string(cfg.group_unit) + ".csv");
                out.push_back("support_" + to_string(cfg.group_unit) + ".csv");
            }
            return out;
        }
        case Stage::stats: return {"stats_report.json"};
        case Stage::report:
            return {"correlations.csv", "groups.csv",         "descriptives.csv",
                    "classification.json", "alerts.json",     "report.md"};
    }
    return {};
}

}  // namespace

RunConfig RunConfig::from_json(const Json& j, const fs::path& config_dir) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig cfg;
    bool have_corpus = false, have_oslq = false;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        if (key == "corpus") {
            cfg.corpus_path = resolve(config_dir, v.get<std::string>());
            have_corpus = true;
        } else if (key == "oslq") {
            cfg.oslq_path = resolve(config_dir, v.get<std::string>());
            have_oslq = true;
        } else if (key == "out_dir") {
            cfg.out_dir = resolve(config_dir, v.get<std::string>());
        } else if (key == "oslq_scheme") {
            cfg.scheme = v.is_string()
                             ? parse_oslq_scheme(load_json_file(
                                   resolve(config_dir, v.get<std::string>())))
                             : parse_oslq_scheme(v);
        } else if (key == "provider") {
            cfg.provider = ProviderConfig::from_json(v);
            if (cfg.provider.mode == ProviderMode::file && !cfg.provider.vector_file.empty()) {
                cfg.provider.vector_file =
                    resolve(config_dir, cfg.provider.vector_file).string();
            }
        } else if (key == "search") {
            cfg.space = SearchSpace::from_json(v);
        } else if (key == "coarse_trials") {
            cfg.coarse_trials = v.get<std::size_t>();
        } else if (key == "fine_per_config") {
            cfg.fine_per_config = v.get<std::size_t>();
        } else if (key == "fixed_params") {
            for (auto fit = v.begin(); fit != v.end(); ++fit) {
                cfg.fixed_params[stream_from_string(fit.key())] = fixed_from_json(fit.value());
            }
        } else if (key == "alpha") {
            cfg.alpha = v.get<double>();
        } else if (key == "units") {
            for (auto uit = v.begin(); uit != v.end(); ++uit) {
                if (uit.key() == "correlation") {
                    cfg.correlation_unit = unit_from(uit.value().get<std::string>());
                } else if (uit.key() == "group") {
                    cfg.group_unit = unit_from(uit.value().get<std::string>());
                } else {
                    throw ConfigError("unknown units key '" + uit.key() + "'");
                }
            }
        } else if (key == "fdr_family") {
            const std::string fam = v.get<std::string>();
            if (fam == "per_table") cfg.fdr_family = FdrFamily::per_table;
            else if (fam == "per_column") cfg.fdr_family = FdrFamily::per_column;
            else throw ConfigError("fdr_family must be per_table or per_column");
        } else if (key == "dhasrl_categories") {
            const Json cats = v.is_string()
                                  ? load_json_file(resolve(config_dir, v.get<std::string>()))
                                  : v;
            for (auto cit = cats.begin(); cit != cats.end(); ++cit) {
                cfg.category_map[cit.key()] =
                    dhasrl_from_string(cit.value().get<std::string>());
            }
        } else if (key == "alert_percentile") {
            cfg.alert_percentile = v.get<double>();
        } else if (key == "n_representatives") {
            cfg.n_representatives = v.get<std::size_t>();
        } else if (key == "parallel_layout") {
            cfg.parallel_layout = v.get<bool>();
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    if (!have_corpus) throw ConfigError("config missing 'corpus'");
    if (!have_oslq) throw ConfigError("config missing 'oslq'");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
    if (!(cfg.alert_percentile >= 0.0 && cfg.alert_percentile <= 100.0)) {
        throw ConfigError("alert_percentile must be in [0,100]");
    }
    return cfg;
}

RunConfig RunConfig::load(const fs::path& config_path) {
    Json j;
    try {
        j = load_json_file(config_path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return from_json(j, config_path.parent_path());
}

PipelineResult run_pipeline(const RunConfig& config, std::optional<Stage> only) {
    fs::create_directories(config.out_dir);
    DirLock lock(config.out_dir);

    const fs::path manifest_path = config.out_dir / "manifest.json";
    Json manifest;
    if (fs::exists(manifest_path)) {
        manifest = load_json_file(manifest_path);
    } else {
        manifest["stages"] = Json::object();
    }

    PipelineResult result;
    result.out_dir = config.out_dir;

    for (Stage stage : kAllStages) {
        if (only && *only != stage) continue;

        StageContext ctx;
        ctx.config = &config;
        ctx.out = config.out_dir;

        const std::string name = to_string(stage);
        const std::string fingerprint = stage_fingerprint(ctx, stage);
        const std::vector<std::string> outputs = stage_outputs(ctx, stage);

        // skip when the fingerprint matches and every recorded output is
        // still present with the recorded hash
        bool skip = false;
        if (manifest["stages"].contains(name) &&
            manifest["stages"][name]["fingerprint"] == fingerprint) {
            skip = true;
            const Json& recorded = manifest["stages"][name]["outputs"];
            for (auto it = recorded.begin(); it != recorded.end(); ++it) {
                const fs::path p = ctx.artifact(it.key());
                if (!fs::exists(p) || it.value() != sha256_file_hex(p)) {
                    skip = false;
                    break;
                }
            }
        }
        if (skip) {
            result.outcomes.push_back({stage, true});
            continue;
        }

        try {
            run_stage(ctx, stage);
        } catch (...) {
            // quarantine everything this stage managed to write
            const fs::path qdir = config.out_dir / "quarantine" / name;
            std::error_code ec;
            fs::create_directories(qdir, ec);
            for (const fs::path& p : ctx.written) {
                if (fs::exists(p)) fs::rename(p, qdir / p.filename(), ec);
            }
            for (const std::string& out_name : outputs) {
                const fs::path partial = ctx.artifact(out_name + ".partial");
                if (fs::exists(partial)) fs::rename(partial, qdir / partial.filename(), ec);
            }
            throw;
        }

        Json entry;
        entry["fingerprint"] = fingerprint;
        Json outs;
        for (const std::string& out_name : outputs) {
            const fs::path p = ctx.artifact(out_name);
            if (fs::exists(p)) outs[out_name] = sha256_file_hex(p);
        }
        entry["outputs"] = std::move(outs);
        manifest["stages"][name] = std::move(entry);
        write_text_file_atomic(manifest_path, manifest.dump(2) + "\n");
        result.outcomes.push_back({stage, false});
    }
    return result;
}

}  // namespace dpat
