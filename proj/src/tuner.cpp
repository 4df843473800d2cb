#include "dpat/tuner.hpp"

#include <algorithm>
#include <cmath>

#include "dpat/errors.hpp"
#include "dpat/rng.hpp"

namespace dpat {

namespace {

std::string metric_name(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

Metric metric_from(const std::string& s) {
    if (s == "euclidean") return Metric::euclidean;
    if (s == "cosine") return Metric::cosine;
    throw ConfigError("unknown metric '" + s + "'");
}

std::uint64_t trial_seed(const SearchSpace& space, std::size_t trial_id) {
    return space.master_seed ^ static_cast<std::uint64_t>(trial_id);
}

void seed_stages(Trial& t) {
    const std::uint64_t s = t.umap.seed;  // already set to the trial seed
    t.umap.seed = derive_seed(s, 1);
    t.kmeans.seed = derive_seed(s, 2);
}

Trial draw_coarse_trial(const SearchSpace& space, std::size_t trial_id) {
    Trial t;
    t.trial_id = trial_id;
    t.phase = TrialPhase::coarse;
    Rng rng(trial_seed(space, trial_id));
    t.umap.n_neighbors = static_cast<std::size_t>(uniform_int(rng, space.nn_lo, space.nn_hi));
    t.umap.min_dist = uniform_real(rng, space.md_lo, space.md_hi);
    t.umap.n_components = static_cast<std::size_t>(uniform_int(rng, space.nc_lo, space.nc_hi));
    t.umap.metric = space.metrics[uniform_index(rng, space.metrics.size())];
    t.kmeans.k = static_cast<std::size_t>(uniform_int(rng, space.k_lo, space.k_hi));
    t.umap.n_epochs = space.n_epochs;
    t.umap.negative_sample_rate = space.negative_sample_rate;
    t.umap.learning_rate = space.learning_rate;
    t.kmeans.n_init = space.kmeans_n_init;
    t.kmeans.max_iter = space.kmeans_max_iter;
    t.kmeans.tol = space.kmeans_tol;
    t.umap.seed = trial_seed(space, trial_id);
    seed_stages(t);
    return t;
}

Trial draw_fine_trial(const SearchSpace& space, const Trial& anchor, std::size_t trial_id) {
    Trial t;
    t.trial_id = trial_id;
    t.phase = TrialPhase::fine;
    Rng rng(trial_seed(space, trial_id));
    auto window_int = [&](int center, int half, int lo, int hi) {
        const int wlo = std::max(lo, center - half);
        const int whi = std::min(hi, center + half);
        return static_cast<std::size_t>(uniform_int(rng, wlo, whi));
    };
    t.umap.n_neighbors = window_int(static_cast<int>(anchor.umap.n_neighbors), space.nn_window,
                                    space.nn_lo, space.nn_hi);
    const double mlo = std::max(space.md_lo, anchor.umap.min_dist - space.md_window);
    const double mhi = std::min(space.md_hi, anchor.umap.min_dist + space.md_window);
    t.umap.min_dist = uniform_real(rng, mlo, mhi);
    t.umap.n_components = window_int(static_cast<int>(anchor.umap.n_components), space.nc_window,
                                     space.nc_lo, space.nc_hi);
    t.umap.metric = anchor.umap.metric;  // held fixed
    t.kmeans.k = window_int(static_cast<int>(anchor.kmeans.k), space.k_window, space.k_lo,
                            space.k_hi);
    t.umap.n_epochs = space.n_epochs;
    t.umap.negative_sample_rate = space.negative_sample_rate;
    t.umap.learning_rate = space.learning_rate;
    t.kmeans.n_init = space.kmeans_n_init;
    t.kmeans.max_iter = space.kmeans_max_iter;
    t.kmeans.tol = space.kmeans_tol;
    t.umap.seed = trial_seed(space, trial_id);
    seed_stages(t);
    return t;
}

bool metrics_usable(const ValidityMetrics& m) {
    return m.all_defined() && std::isfinite(*m.silhouette) &&
           std::isfinite(*m.calinski_harabasz) && std::isfinite(*m.davies_bouldin);
}

// Fills normalized fields and composites for the ok trials in `pool`;
// returns the trial_id of the argmax (ties to lower id).
std::size_t normalize_population(std::vector<Trial*>& pool) {
    if (pool.empty()) throw NumericError("search: no ok trials to normalize");
    auto minmax = [&](auto get) {
        double lo = get(*pool[0]), hi = lo;
        for (const Trial* t : pool) {
            lo = std::min(lo, get(*t));
            hi = std::max(hi, get(*t));
        }
        return std::pair<double, double>(lo, hi);
    };
    auto norm = [](double v, std::pair<double, double> mm) {
        return mm.second == mm.first ? 0.5 : (v - mm.first) / (mm.second - mm.first);
    };
    const auto sil_mm = minmax([](const Trial& t) { return *t.raw.silhouette; });
    const auto ch_mm = minmax([](const Trial& t) { return *t.raw.calinski_harabasz; });
    const auto db_mm = minmax([](const Trial& t) { return *t.raw.davies_bouldin; });

    std::size_t best_id = pool[0]->trial_id;
    double best_composite = -1.0;
    for (Trial* t : pool) {
        t->sil_norm = norm(*t->raw.silhouette, sil_mm);
        t->ch_norm = norm(*t->raw.calinski_harabasz, ch_mm);
        t->db_norm = norm(*t->raw.davies_bouldin, db_mm);
        t->composite = composite_score(t->sil_norm, t->ch_norm, t->db_norm);
        t->normalized = true;
        if (t->composite > best_composite ||
            (t->composite == best_composite && t->trial_id < best_id)) {
            best_composite = t->composite;
            best_id = t->trial_id;
        }
    }
    return best_id;
}

std::vector<Trial*> ok_trials(std::vector<Trial>& trials) {
    std::vector<Trial*> pool;
    for (Trial& t : trials) {
        if (t.status == TrialStatus::ok) pool.push_back(&t);
    }
    return pool;
}

}  // namespace

void evaluate_trial(const EmbeddingMatrix& matrix, Trial& trial, Exec exec) {
    const std::size_t n = matrix.rows();
    if (trial.umap.n_neighbors >= n) {
        trial.status = TrialStatus::invalid;
        trial.note = "n_neighbors >= n";
        return;
    }
    if (trial.kmeans.k > n) {
        trial.status = TrialStatus::invalid;
        trial.note = "k > n";
        return;
    }
    try {
        const UmapResult fit = umap_fit(matrix, trial.umap, exec);
        const KMeansModel model = kmeans_fit(fit.coords.data, n, fit.coords.dim, trial.kmeans, exec);
        trial.raw = validity_indices(fit.coords.data, n, fit.coords.dim, model.labels, exec);
        if (!metrics_usable(trial.raw)) {
            trial.status = TrialStatus::invalid;
            trial.note = "undefined validity index";
            return;
        }
        trial.status = TrialStatus::ok;
    } catch (const Error& e) {
        trial.status = TrialStatus::invalid;
        trial.note = e.what();
    }
}

std::vector<Trial> coarse_search(const EmbeddingMatrix& matrix, const SearchSpace& space,
                                 std::size_t n_trials, Exec exec) {
    std::vector<Trial> trials(n_trials);
    for (std::size_t i = 0; i < n_trials; ++i) trials[i] = draw_coarse_trial(space, i);
    // Trials own derived seeds, so evaluation order is free.
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_trials); ++i) {
        evaluate_trial(matrix, trials[static_cast<std::size_t>(i)], Exec::serial);
    }
    bool any_ok = false;
    for (const Trial& t : trials) any_ok = any_ok || t.status == TrialStatus::ok;
    if (!any_ok) throw NumericError("coarse search produced no ok trial");
    return trials;
}

std::vector<Trial> fine_tune(const EmbeddingMatrix& matrix, const SearchSpace& space,
                             const std::vector<Trial>& coarse, std::size_t per_config,
                             Exec exec) {
    std::vector<Trial> ranked = coarse;  // normalize on a copy of the coarse population
    auto pool = ok_trials(ranked);
    if (pool.empty()) throw NumericError("fine_tune: no ok coarse trial");
    normalize_population(pool);
    std::sort(pool.begin(), pool.end(), [](const Trial* a, const Trial* b) {
        if (a->composite != b->composite) return a->composite > b->composite;
        return a->trial_id < b->trial_id;
    });
    const std::size_t n_anchors = (pool.size() + 19) / 20;  // ceil(5%)

    std::size_t next_id = coarse.size();
    std::vector<Trial> fine;
    fine.reserve(n_anchors * per_config);
    for (std::size_t a = 0; a < n_anchors; ++a) {
        for (std::size_t p = 0; p < per_config; ++p) {
            fine.push_back(draw_fine_trial(space, *pool[a], next_id++));
        }
    }
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(fine.size()); ++i) {
        evaluate_trial(matrix, fine[static_cast<std::size_t>(i)], Exec::serial);
    }
    return fine;
}

SearchReport select_best(const std::string& stream, const SearchSpace& space,
                         std::vector<Trial> all_trials) {
    SearchReport report;
    report.stream = stream;
    report.space = space;
    report.trials = std::move(all_trials);
    for (const Trial& t : report.trials) {
        if (t.phase == TrialPhase::coarse) ++report.coarse_count;
        else ++report.fine_count;
    }
    auto pool = ok_trials(report.trials);
    if (pool.empty()) throw NumericError("select_best: no ok trials");
    report.best_trial_id = normalize_population(pool);
    return report;
}

SearchReport run_search(const EmbeddingMatrix& matrix, const std::string& stream,
                        const SearchSpace& space, std::size_t n_coarse, std::size_t per_config,
                        Exec exec) {
    std::vector<Trial> trials = coarse_search(matrix, space, n_coarse, exec);
    std::vector<Trial> fine = fine_tune(matrix, space, trials, per_config, exec);
    trials.insert(trials.end(), std::make_move_iterator(fine.begin()),
                  std::make_move_iterator(fine.end()));
    return select_best(stream, space, std::move(trials));
}

const Trial& SearchReport::best() const {
    for (const Trial& t : trials) {
        if (t.trial_id == best_trial_id) return t;
    }
    throw IntegrityError("search report: best trial id not present");
}

SearchSpace SearchSpace::from_json(const Json& j) {
    SearchSpace s;
    if (!j.is_object()) throw ConfigError("search space must be an object");
    auto range2 = [](const Json& v, const char* name) {
        if (!v.is_array() || v.size() != 2) {
            throw ConfigError(std::string("search space '") + name + "' must be [lo, hi]");
        }
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        if (key == "n_neighbors") {
            range2(v, "n_neighbors");
            s.nn_lo = v[0].get<int>();
            s.nn_hi = v[1].get<int>();
        } else if (key == "min_dist") {
            range2(v, "min_dist");
            s.md_lo = v[0].get<double>();
            s.md_hi = v[1].get<double>();
        } else if (key == "n_components") {
            range2(v, "n_components");
            s.nc_lo = v[0].get<int>();
            s.nc_hi = v[1].get<int>();
        } else if (key == "k") {
            range2(v, "k");
            s.k_lo = v[0].get<int>();
            s.k_hi = v[1].get<int>();
        } else if (key == "metric") {
            s.metrics.clear();
            for (const auto& m : v) s.metrics.push_back(metric_from(m.get<std::string>()));
            if (s.metrics.empty()) throw ConfigError("search space metric set is empty");
        } else if (key == "master_seed") s.master_seed = v.get<std::uint64_t>();
        else if (key == "n_epochs") s.n_epochs = v.get<std::size_t>();
        else if (key == "negative_sample_rate") s.negative_sample_rate = v.get<std::size_t>();
        else if (key == "learning_rate") s.learning_rate = v.get<double>();
        else if (key == "kmeans_n_init") s.kmeans_n_init = v.get<std::size_t>();
        else if (key == "kmeans_max_iter") s.kmeans_max_iter = v.get<std::size_t>();
        else if (key == "kmeans_tol") s.kmeans_tol = v.get<double>();
        else if (key == "nn_window") s.nn_window = v.get<int>();
        else if (key == "md_window") s.md_window = v.get<double>();
        else if (key == "nc_window") s.nc_window = v.get<int>();
        else if (key == "k_window") s.k_window = v.get<int>();
        else throw ConfigError("unknown search space key '" + key + "'");
    }
    if (s.nn_lo < 2 || s.nn_lo > s.nn_hi) throw ConfigError("bad n_neighbors range");
    if (!(s.md_lo > 0.0) || s.md_lo > s.md_hi || s.md_hi >= 1.0) {
        throw ConfigError("bad min_dist range");
    }
    if (s.nc_lo < 1 || s.nc_lo > s.nc_hi) throw ConfigError("bad n_components range");
    if (s.k_lo < 2 || s.k_lo > s.k_hi) throw ConfigError("bad k range");
    return s;
}

Json SearchSpace::to_json() const {
    Json j;
    j["n_neighbors"] = {nn_lo, nn_hi};
    j["min_dist"] = {md_lo, md_hi};
    j["n_components"] = {nc_lo, nc_hi};
    j["k"] = {k_lo, k_hi};
    Json ms = Json::array();
    for (Metric m : metrics) ms.push_back(metric_name(m));
    j["metric"] = std::move(ms);
    j["master_seed"] = master_seed;
    j["n_epochs"] = n_epochs;
    j["negative_sample_rate"] = negative_sample_rate;
    j["learning_rate"] = learning_rate;
    j["kmeans_n_init"] = kmeans_n_init;
    j["kmeans_max_iter"] = kmeans_max_iter;
    j["kmeans_tol"] = kmeans_tol;
    j["nn_window"] = nn_window;
    j["md_window"] = md_window;
    j["nc_window"] = nc_window;
    j["k_window"] = k_window;
    return j;
}

Json SearchReport::to_json() const {
    Json j;
    j["stream"] = stream;
    j["space"] = space.to_json();
    j["coarse_count"] = coarse_count;
    j["fine_count"] = fine_count;
    j["best_trial_id"] = best_trial_id;
    Json arr = Json::array();
    for (const Trial& t : trials) {
        Json tj;
        tj["trial_id"] = t.trial_id;
        tj["phase"] = t.phase == TrialPhase::coarse ? "coarse" : "fine";
        tj["status"] = t.status == TrialStatus::ok ? "ok" : "invalid";
        tj["params"] = Json{{"n_neighbors", t.umap.n_neighbors},
                            {"min_dist", t.umap.min_dist},
                            {"n_components", t.umap.n_components},
                            {"metric", metric_name(t.umap.metric)},
                            {"k", t.kmeans.k}};
        if (t.status == TrialStatus::ok) {
            tj["raw"] = Json{{"silhouette", *t.raw.silhouette},
                             {"calinski_harabasz", *t.raw.calinski_harabasz},
                             {"davies_bouldin", *t.raw.davies_bouldin}};
            if (t.normalized) {
                tj["normalized"] = Json{{"silhouette", t.sil_norm},
                                        {"calinski_harabasz", t.ch_norm},
                                        {"davies_bouldin", t.db_norm}};
                tj["composite"] = t.composite;
            }
        } else {
            tj["note"] = t.note;
        }
        arr.push_back(std::move(tj));
    }
    j["trials"] = std::move(arr);
    return j;
}

std::string SearchReport::trials_csv() const {
    std::string out =
        "trial_id,phase,status,n_neighbors,min_dist,n_components,metric,k,"
        "silhouette,calinski_harabasz,davies_bouldin,sil_norm,ch_norm,db_norm,composite,note\n";
    for (const Trial& t : trials) {
        out += std::to_string(t.trial_id);
        out += t.phase == TrialPhase::coarse ? ",coarse," : ",fine,";
        out += t.status == TrialStatus::ok ? "ok," : "invalid,";
        out += std::to_string(t.umap.n_neighbors) + ",";
        out += format_fixed(t.umap.min_dist, 6) + ",";
        out += std::to_string(t.umap.n_components) + ",";
        out += metric_name(t.umap.metric) + ",";
        out += std::to_string(t.kmeans.k) + ",";
        if (t.status == TrialStatus::ok) {
            out += format_fixed(*t.raw.silhouette, 9) + ",";
            out += format_fixed(*t.raw.calinski_harabasz, 9) + ",";
            out += format_fixed(*t.raw.davies_bouldin, 9) + ",";
            if (t.normalized) {
                out += format_fixed(t.sil_norm, 9) + "," + format_fixed(t.ch_norm, 9) + "," +
                       format_fixed(t.db_norm, 9) + "," + format_fixed(t.composite, 9) + ",";
            } else {
                out += ",,,,";
            }
        } else {
            out += ",,,,,,,";
        }
        out += csv_escape(t.note);
        out += "\n";
    }
    return out;
}

}  // namespace dpat
