#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpat/cluster.hpp"
#include "dpat/jsonio.hpp"
#include "dpat/manifold.hpp"

namespace dpat {

struct SearchSpace {
    int nn_lo = 5, nn_hi = 50;          // n_neighbors
    double md_lo = 0.01, md_hi = 0.5;   // min_dist
    int nc_lo = 2, nc_hi = 30;          // n_components
    int k_lo = 2, k_hi = 10;            // clusters
    std::vector<Metric> metrics = {Metric::euclidean, Metric::cosine};
    std::uint64_t master_seed = 0;

    // evaluation defaults applied to every trial
    std::size_t n_epochs = 200;
    std::size_t negative_sample_rate = 5;
    double learning_rate = 1.0;
    std::size_t kmeans_n_init = 10;
    std::size_t kmeans_max_iter = 300;
    double kmeans_tol = 1e-6;

    // fine-phase perturbation half-widths (10% of each range)
    int nn_window = 5;
    double md_window = 0.05;
    int nc_window = 2;
    int k_window = 1;

    static SearchSpace from_json(const Json& j);
    Json to_json() const;
};

enum class TrialStatus { ok, invalid };
enum class TrialPhase { coarse, fine };

struct Trial {
    std::size_t trial_id = 0;
    TrialPhase phase = TrialPhase::coarse;
    UmapParams umap;
    KMeansParams kmeans;
    TrialStatus status = TrialStatus::invalid;
    std::string note;  // why invalid
    ValidityMetrics raw;
    // filled by normalization over the current ok population
    bool normalized = false;
    double sil_norm = 0.0, ch_norm = 0.0, db_norm = 0.0, composite = 0.0;
};

struct SearchReport {
    std::string stream;
    SearchSpace space;
    std::vector<Trial> trials;  // coarse then fine, trial_id order
    std::size_t coarse_count = 0;
    std::size_t fine_count = 0;
    std::size_t best_trial_id = 0;

    const Trial& best() const;
    Json to_json() const;
    std::string trials_csv() const;
};

// Evaluates umap -> kmeans -> validity for one already-drawn trial; any
// numerical failure or undefined index marks it invalid rather than throwing.
void evaluate_trial(const EmbeddingMatrix& matrix, Trial& trial, Exec exec);

// Parameter draws with per-trial seed master_seed ^ trial_id; infeasible
// draws (e.g. n_neighbors >= n) stay as invalid trials, never redrawn.
std::vector<Trial> coarse_search(const EmbeddingMatrix& matrix, const SearchSpace& space,
                                 std::size_t n_trials = 100, Exec exec = Exec::parallel);

// ceil(0.05 * ok-count) anchors by composite under coarse-population
// normalization; per anchor, per_config perturbed draws with the metric held
// fixed and windows clipped to the space.
std::vector<Trial> fine_tune(const EmbeddingMatrix& matrix, const SearchSpace& space,
                             const std::vector<Trial>& coarse, std::size_t per_config = 30,
                             Exec exec = Exec::parallel);

// Min-max normalizes raw indices over the pooled ok population (an index
// degenerate across the population pins at 0.5), recomputes composites, picks
// the argmax with ties to the lower trial_id.
SearchReport select_best(const std::string& stream, const SearchSpace& space,
                         std::vector<Trial> all_trials);

SearchReport run_search(const EmbeddingMatrix& matrix, const std::string& stream,
                        const SearchSpace& space, std::size_t n_coarse = 100,
                        std::size_t per_config = 30, Exec exec = Exec::parallel);

}  // namespace dpat
