#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tissue/app.hpp"
#include "tissue/config.hpp"

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("tissue");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* level = std::getenv("TISSUE_LOG")) spdlog::cfg::helpers::load_levels(level);

    CLI::App app{"Periodic orbits and their stability for a membrane-coupled tissue model"};
    app.footer(tissue::describe_outputs());
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    const char* names[][2] = {
        {"simulate", "Micro simulation from the configured initial jump"},
        {"periodic", "Time-periodic orbit of the micro problem"},
        {"decay", "Distance of a trajectory to the stored periodic orbit"},
        {"homogenize", "Two-scale limit: periodic orbit and decay"},
        {"verify", "Invariant suite on the configured grid"},
        {"compare", "Micro against two-scale bulk error over an epsilon sweep"},
    };
    for (const auto& [name, help] : names) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Configuration file (key = value lines)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides `output`)");
        sub->add_option("--threads", threads, "Worker threads (used by compare)")->check(CLI::Range(1, 256));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tissue::kExitParse;
    }

    tissue::RunConfig config;
    try {
        config = tissue::parse_config(config_path);
    } catch (const tissue::ConfigError& e) {
        spdlog::error("{}", e.what());
        return e.code();
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    return tissue::run(sub, config, {out_dir, threads});
}
