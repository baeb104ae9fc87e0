#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "dualbound/errors.hpp"
#include "dualbound/experiment.hpp"

namespace {

// env var beats the flag, the flag beats the config file
std::string resolve_out_dir(const std::string& flag_value, const std::string& config_value) {
    if (const char* env = std::getenv("PORTFOLIO_BOUNDS_OUT"); env && *env) return env;
    if (!flag_value.empty()) return flag_value;
    return config_value;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lower/upper bounds for dynamic portfolio choice with non-traded risk"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mode_override;
    std::uint64_t seed_override = 0;
    bool seed_given = false, parallel = false;

    CLI::App* cmd_bounds = app.add_subcommand("bounds", "run the bound pipeline per cell");
    cmd_bounds->add_option("--config", config_path, "config file")->required();
    cmd_bounds->add_option("--out", out_dir, "output directory")->required();
    cmd_bounds->add_option("--mode", mode_override, "inject-dual or optimize-primal");
    cmd_bounds->add_option("--seed", seed_override, "master seed override")
        ->each([&seed_given](const std::string&) { seed_given = true; });
    cmd_bounds->add_flag("--parallel-cells", parallel, "run cells concurrently");

    CLI::App* cmd_figures = app.add_subcommand("figures", "emit figure data CSVs");
    cmd_figures->add_option("--config", config_path, "config file")->required();
    cmd_figures->add_option("--out", out_dir, "output directory")->required();

    CLI::App* cmd_paths = app.add_subcommand("paths", "export raw simulated market states");
    cmd_paths->add_option("--config", config_path, "config file")->required();
    cmd_paths->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        dualbound::ExperimentConfig config = dualbound::parse_config_file(config_path);
        if (seed_given) config.sim.seed = seed_override;
        if (parallel) config.parallel_cells = true;
        if (!mode_override.empty()) {
            if (mode_override == "inject-dual")
                config.mode = dualbound::ExperimentConfig::Mode::inject_dual;
            else if (mode_override == "optimize-primal")
                config.mode = dualbound::ExperimentConfig::Mode::optimize_primal;
            else
                throw dualbound::ConfigError("--mode must be inject-dual or optimize-primal");
        }
        config.validate();
        std::string out = resolve_out_dir(out_dir, config.out_dir);
        if (out.empty()) throw dualbound::ConfigError("no output directory given");

        if (cmd_bounds->parsed()) return dualbound::run_bounds_to_dir(config, out);
        if (cmd_figures->parsed()) return dualbound::run_figures_to_dir(config, out);
        if (cmd_paths->parsed()) return dualbound::run_paths_to_dir(config, out);
        return 2;
    } catch (const dualbound::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
