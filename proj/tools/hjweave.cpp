// Command-line front end: hjweave <subcommand> --config PATH [--out DIR] [--threads N] [--seed S]

#include <iostream>

#include "CLI11.hpp"
#include "hjweave/errors.hpp"
#include "hjweave/runner.hpp"

int main(int argc, char** argv) {
    using namespace hjweave;

    CLI::App app{"Weakly coupled Hamilton-Jacobi systems: variational solver and finite-difference oracle"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> files;

    const auto add = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "worker threads (overrides the config and HJWEAVE_THREADS)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        return sub;
    };
    add("certify", "certify the coupling matrix and report the short horizon (certify.json)");
    add("minimize", "fundamental solution between two points (minimize.csv)");
    add("characteristics", "characteristic bundle (characteristics.csv)");
    add("evolve", "variational value field on the grid (evolve.csv)");
    add("oracle", "finite-difference value field on the grid (oracle.csv)");
    add("compare", "norms between two value fields (compare.json)")
        ->add_option("files", files, "two field CSV files (default: evolve.csv and oracle.csv in --out)")
        ->expected(0, 2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    RunOverrides overrides;
    if (chosen->count("--out")) overrides.output_directory = out_dir;
    if (chosen->count("--threads")) overrides.threads = threads;
    if (chosen->count("--seed")) overrides.seed = seed;
    overrides.compare_files = files;

    try {
        const ProblemConfig config = parse_config(config_path);
        const RunResult result = run(*parse_subcommand(chosen->get_name()), config, overrides, std::cerr);
        for (const auto& path : result.artifacts) std::cout << path << "\n";
        return result.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
