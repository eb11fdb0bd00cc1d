// Batch experiment runner.
#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "cara/config.hpp"
#include "cara/runner.hpp"

int main(int argc, char** argv) {
    using namespace cara;
    CLI::App app{"CARA portfolio games: equilibria, simulation and verification"};
    app.require_subcommand(1);

    std::string config_path, out_dir, format;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::size_t> samples;
    const std::map<std::string, std::string> help{
        {"solve", "PDE and Riccati solutions only"},
        {"simulate", "simulate state paths"},
        {"nplayer", "N-player equilibrium strategies and values"},
        {"mfg", "mean field equilibrium for sampled types"},
        {"single", "single-player (c = 0) solution"},
        {"verify", "run the selected verification tests"},
        {"figure1", "surface of delta_bar - delta over (c, psi)"},
    };
    for (const auto& name : runner::commands()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config_path, "experiment config (JSON)");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker thread cap");
        sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--samples", samples, "paths written to per-path outputs");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : runner::BadConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    config::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = config::load(config_path);
    } catch (const Error& e) {
        runner::report_error(out_dir.empty() ? cfg.out : out_dir, e.kind(), e.what(), runner::BadConfig, "",
                             std::cerr);
        return runner::BadConfig;
    }
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (threads) cfg.threads = *threads;
    if (!format.empty()) cfg.format = format;
    if (samples) cfg.samples = *samples;
    return runner::execute(command, cfg);
}
