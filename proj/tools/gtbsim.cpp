// Experiment runner for the gather-trade-build economy: single runs, the
// 2-environment x 4-objective grid, pooling, and plot-ready CSV emission.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gtb/config.hpp"
#include "gtb/report.hpp"
#include "gtb/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRunFailure = 2;

gtb::SimConfig load_or_default(const std::string& path) {
    if (path.empty()) return gtb::SimConfig{};
    return gtb::load_config(path);
}

uint64_t effective_seed(uint64_t cli_seed) {
    if (const char* env = std::getenv("GTB_ROOT_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') {
            std::cerr << "note: GTB_ROOT_SEED=" << v << " overrides --seed\n";
            return v;
        }
        std::cerr << "warning: ignoring malformed GTB_ROOT_SEED\n";
    }
    return cli_seed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gather-trade-build economy simulator and experiment runner"};
    app.require_subcommand(1);

    std::string config_path, out_dir, env_name = "uniform", objective = "eqprod";
    std::string policy_name = "train", checkpoint, cell_filter, report_dir;
    uint64_t seed = 1;
    int parallel = 1;
    bool stochastic_eval = false;
    std::vector<std::string> run_dirs;

    CLI::App* run = app.add_subcommand("run", "train/evaluate one run and write its CSVs");
    run->add_option("--config", config_path, "config JSON path");
    run->add_option("--seed", seed, "run seed");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--env", env_name, "band|uniform");
    run->add_option("--objective", objective, "eqprod|utilitarian|prod|eq");
    run->add_option("--policy", policy_name, "train|noop|random|gatherer");
    run->add_option("--checkpoint", checkpoint, "evaluate from an existing checkpoint");
    run->add_flag("--stochastic-eval", stochastic_eval, "sample instead of argmax in evaluation");

    CLI::App* grid = app.add_subcommand("grid", "run the 2-environment x 4-objective grid");
    grid->add_option("--config", config_path, "config JSON path");
    grid->add_option("--seed", seed, "root seed");
    grid->add_option("--out", out_dir, "output directory")->required();
    grid->add_option("--cell", cell_filter, "single cell, e.g. bandxeqprod");
    grid->add_option("--parallel", parallel, "cells run concurrently");
    grid->add_option("--policy", policy_name, "train|noop|random|gatherer");

    CLI::App* agg = app.add_subcommand("aggregate", "pool run directories by environment");
    agg->add_option("--out", out_dir, "output directory")->required();
    agg->add_option("dirs", run_dirs, "run directories")->required()->expected(-1);

    CLI::App* plot = app.add_subcommand("plot-data", "emit tidy per-figure CSVs");
    plot->add_option("--report", report_dir, "aggregate directory")->required();
    plot->add_option("--out", out_dir, "output directory")->required();

    CLI::App* dump = app.add_subcommand("layout-dump", "write the map text for a layout");
    dump->add_option("--config", config_path, "config JSON path");
    dump->add_option("--seed", seed, "layout seed");
    dump->add_option("--env", env_name, "band|uniform");
    dump->add_option("--out", out_dir, "output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const uint64_t root_seed = effective_seed(seed);
        if (run->parsed()) {
            gtb::RunSpec spec;
            spec.config = load_or_default(config_path);
            spec.scenario = gtb::layout_from_string(env_name);
            spec.objective = gtb::swf_from_string(objective);
            spec.seed = root_seed;
            spec.out_dir = out_dir;
            spec.policy = gtb::policy_mode_from_string(policy_name);
            spec.checkpoint = checkpoint;
            spec.stochastic_eval = stochastic_eval;
            gtb::cmd_run(spec);
            std::cout << "run written to " << out_dir << "\n";
        } else if (grid->parsed()) {
            gtb::GridResult res =
                gtb::cmd_grid(load_or_default(config_path), root_seed, out_dir,
                              gtb::policy_mode_from_string(policy_name), cell_filter, parallel);
            for (const gtb::GridCell& c : res.cells) {
                std::cout << "cell " << c.index << " " << gtb::name_of(c.scenario) << "/"
                          << gtb::name_of(c.objective) << ": "
                          << (c.ok ? "ok" : "FAILED: " + c.error) << "\n";
            }
            if (!res.all_ok()) return kExitRunFailure;
        } else if (agg->parsed()) {
            gtb::aggregate_runs(run_dirs, out_dir);
            std::cout << "aggregate written to " << out_dir << "\n";
        } else if (plot->parsed()) {
            gtb::write_plot_data(report_dir, out_dir);
            std::cout << "plot data written to " << out_dir << "\n";
        } else if (dump->parsed()) {
            gtb::SimConfig cfg = load_or_default(config_path);
            cfg.world.layout = gtb::layout_from_string(env_name);
            gtb::cmd_layout_dump(cfg, root_seed, out_dir);
            std::cout << "layout written to " << out_dir << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRunFailure;
    }
    return kExitOk;
}
