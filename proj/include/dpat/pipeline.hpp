#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "dpat/embedding.hpp"
#include "dpat/oslq.hpp"
#include "dpat/profiles.hpp"
#include "dpat/tables.hpp"
#include "dpat/tuner.hpp"

namespace dpat {

// Fixed per-stream parameter block; when present for a stream, the search is
// skipped and the model is fitted with exactly these values.
struct FixedStreamParams {
    std::size_t n_neighbors = 15;
    double min_dist = 0.1;
    std::size_t n_components = 2;
    Metric metric = Metric::euclidean;
    std::size_t k = 2;
};

struct RunConfig {
    fs::path corpus_path;
    fs::path oslq_path;
    fs::path out_dir = "out";
    OslqScheme scheme = default_oslq_scheme();
    ProviderConfig provider;
    SearchSpace space;
    std::size_t coarse_trials = 100;
    std::size_t fine_per_config = 30;
    std::map<StreamKey, FixedStreamParams> fixed_params;
    double alpha = 0.05;
    Unit correlation_unit = Unit::student;
    Unit group_unit = Unit::log;
    FdrFamily fdr_family = FdrFamily::per_table;
    std::map<std::string, DhasrlCategory> category_map;
    double alert_percentile = 75.0;
    std::size_t n_representatives = 5;
    Exec exec = Exec::parallel;
    bool parallel_layout = false;

    // CLI overrides
    void override_seed(std::uint64_t seed) { space.master_seed = seed; }
    void override_unit(Unit u) { correlation_unit = group_unit = u; }

    static RunConfig from_json(const Json& j, const fs::path& config_dir);
    static RunConfig load(const fs::path& config_path);
};

// Pipeline stages in execution order.
enum class Stage { ingest, embed, search, fit, profile, stats, report };
std::string to_string(Stage s);
constexpr std::array<Stage, 7> kAllStages = {Stage::ingest, Stage::embed, Stage::search,
                                             Stage::fit,    Stage::profile, Stage::stats,
                                             Stage::report};

struct StageOutcome {
    Stage stage;
    bool skipped = false;  // inputs and outputs matched the manifest
};

struct PipelineResult {
    std::vector<StageOutcome> outcomes;
    fs::path out_dir;
};

// Runs the stage set in order with manifest-based resume: a stage whose
// fingerprint (config subset + input hashes) and output hashes match the
// manifest is skipped. A failing stage quarantines anything it wrote and
// leaves the manifest untouched. `only` limits execution to one stage (its
// upstream artifacts must already exist).
PipelineResult run_pipeline(const RunConfig& config,
                            std::optional<Stage> only = std::nullopt);

}  // namespace dpat
