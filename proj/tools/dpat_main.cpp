#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dpat/errors.hpp"
#include "dpat/pipeline.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

int run_command(const std::string& config_path, std::optional<dpat::Stage> only,
                std::optional<std::uint64_t> seed, std::optional<std::string> unit,
                std::optional<double> alpha, std::optional<std::string> out, bool serial,
                int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    dpat::RunConfig config = dpat::RunConfig::load(config_path);
    if (seed) config.override_seed(*seed);
    if (unit) {
        if (*unit == "student") config.override_unit(dpat::Unit::student);
        else if (*unit == "log") config.override_unit(dpat::Unit::log);
        else throw dpat::ConfigError("--unit must be student or log");
    }
    if (alpha) {
        if (!(*alpha > 0.0 && *alpha < 1.0)) throw dpat::ConfigError("--alpha must be in (0,1)");
        config.alpha = *alpha;
    }
    if (out) config.out_dir = *out;
    if (serial) {
        config.exec = dpat::Exec::serial;
        config.parallel_layout = false;
    }

    const dpat::PipelineResult result = dpat::run_pipeline(config, only);
    for (const auto& outcome : result.outcomes) {
        std::printf("%-8s %s\n", dpat::to_string(outcome.stage).c_str(),
                    outcome.skipped ? "skipped (up to date)" : "done");
    }
    std::printf("artifacts: %s\n", result.out_dir.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dpat - dialogue pattern analytics over student-AI chat logs"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> unit;
    std::optional<double> alpha;
    std::optional<std::string> out;
    bool serial = false;
    int threads = 0;

    app.add_option("--config", config_path, "run configuration JSON")->required();
    app.add_option("--seed", seed, "override the search master seed");
    app.add_option("--unit", unit, "override the analysis unit (student|log)");
    app.add_option("--alpha", alpha, "override the significance level");
    app.add_option("--out", out, "override the output directory");
    app.add_flag("--serial", serial, "force single-threaded kernels");
    app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");

    struct Sub {
        const char* name;
        const char* help;
        std::optional<dpat::Stage> stage;
    };
    const Sub subs[] = {
        {"ingest", "validate and normalize the corpus and questionnaire", dpat::Stage::ingest},
        {"embed", "obtain vectors and write the binary store", dpat::Stage::embed},
        {"search", "two-phase hyperparameter search per stream", dpat::Stage::search},
        {"fit", "fit final reduction+clustering models and the pattern catalog",
         dpat::Stage::fit},
        {"profile", "per-unit alignment profiles", dpat::Stage::profile},
        {"stats", "descriptives, correlations and group comparisons", dpat::Stage::stats},
        {"report", "render tables, classification and alerts", dpat::Stage::report},
        {"alerts", "regenerate report outputs including alerts", dpat::Stage::report},
        {"run", "run the full pipeline", std::nullopt},
    };
    for (const Sub& s : subs) app.add_subcommand(s.name, s.help)->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        for (const Sub& s : subs) {
            if (app.got_subcommand(s.name)) {
                return run_command(config_path, s.stage, seed, unit, alpha, out, serial,
                                   threads);
            }
        }
        std::fprintf(stderr, "no subcommand given\n");
        return 2;
    } catch (const dpat::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}
