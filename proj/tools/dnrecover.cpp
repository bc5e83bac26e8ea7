// Command-line experiment runner: validates a config, executes the selected
// pipeline and writes its report files.  Exit codes: 0 all checks passed,
// 1 pipeline error or failed checks, 2 configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "../src/pipelines.hpp"

int main(int argc, char** argv) {
    CLI::App app{"DN-data synthesis and coefficient recovery for "
                 "convection-diffusion problems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "run the pipeline described by a config");
    run->add_option("config", config_path, "experiment file")->required();
    run->add_option("-o,--output", out_dir, "output directory (default from config)");

    auto* presets = app.add_subcommand("presets", "preset registry");
    presets->add_subcommand("list", "list the named presets and models");

    auto* schema = app.add_subcommand("schema", "configuration schema");
    schema->add_subcommand("print", "print the experiment-file schema");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const dnr::Config cfg = dnr::parse_config_file(config_path);
            std::string out = out_dir;
            if (out.empty())
                out = cfg.section("experiment").get("output", "out");
            const dnr::cli::RunResult res = dnr::cli::run_pipeline(cfg, out);
            std::cout << res.summary.dump(2) << "\n";
            return res.pass ? 0 : 1;
        }
        if (presets->parsed()) {
            std::cout << dnr::cli::presets_listing();
            return 0;
        }
        if (schema->parsed()) {
            std::cout << dnr::cli::schema_text();
            return 0;
        }
    } catch (const dnr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const dnr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
