#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "gmr/config.hpp"
#include "gmr/errors.hpp"
#include "gmr/experiments.hpp"
#include "gmr/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Worst-case model reduction toolkit for slow-fast SDEs"};
    app.require_subcommand(1);

    std::string run_config, out_dir;
    long long seed = -1;
    int threads = 0;
    CLI::App* run = app.add_subcommand("run", "Run an experiment from a config file");
    run->add_option("config", run_config, "Experiment config file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides the config)");
    run->add_option("--seed", seed, "Master seed (overrides the config)");
    run->add_option("--threads", threads, "Worker thread cap (0 = all cores)");

    std::string val_config;
    CLI::App* validate = app.add_subcommand("validate", "Check a config file and exit");
    validate->add_option("config", val_config, "Experiment config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (validate->parsed()) {
            gmr::ExperimentConfig::load(val_config);
            std::printf("ok: %s\n", val_config.c_str());
            return 0;
        }
        gmr::ExperimentConfig cfg = gmr::ExperimentConfig::load(run_config);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (seed >= 0) cfg.seed = static_cast<unsigned long long>(seed);
        gmr::set_max_threads(threads);
        gmr::ExperimentReport report = gmr::run_experiment(cfg);
        std::fputs(report.summary().c_str(), stdout);
        return 0;
    } catch (const gmr::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const gmr::SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    }
}
