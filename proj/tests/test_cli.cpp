#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtb/csv.hpp"
#include "gtb/report.hpp"
#include "gtb/runner.hpp"

using namespace gtb;
namespace fs = std::filesystem;

namespace {

SimConfig fast_config() {
    SimConfig c;
    c.world.width = 13;
    c.world.height = 13;
    c.world.n_agents = 4;
    c.world.regen_counts = {8, 8, 8};
    c.env.horizon = 120;
    c.fiscal.period = 40;
    c.scripted.build_cooldown = 25;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(GTBSIM_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cmd_run writes the complete artifact set, deterministically") {
    const fs::path out1 = fresh_dir("gtb_cli_run1");
    const fs::path out2 = fresh_dir("gtb_cli_run2");

    RunSpec spec;
    spec.config = fast_config();
    spec.scenario = LayoutKind::Uniform;
    spec.objective = SwfKind::EqTimesProd;
    spec.seed = 5;
    spec.policy = PolicyMode::GathererBuilder;
    spec.out_dir = out1.string();
    cmd_run(spec);
    spec.out_dir = out2.string();
    cmd_run(spec);

    for (const char* f : {"metrics.csv", "resources.csv", "trades.csv", "taxes.csv",
                          "actions.csv", "manifest.json", "layout.txt", "config.json",
                          "run.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(out1 / f));
        CHECK(slurp(out1 / f) == slurp(out2 / f));
    }
    // no training artifacts for a scripted run
    CHECK(!fs::exists(out1 / "checkpoint.bin"));
    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("cmd_grid enumerates 8 cells and honors filters and root seeds") {
    const fs::path out = fresh_dir("gtb_cli_grid");
    GridResult res =
        cmd_grid(fast_config(), 11, out.string(), PolicyMode::GathererBuilder, "", 2);
    CHECK(res.cells.size() == 8);
    CHECK(res.all_ok());
    CHECK(res.run_dirs().size() == 8);
    CHECK(fs::exists(out / "grid.json"));
    // band cells come first, objectives cycle within an environment
    CHECK(res.cells[0].scenario == LayoutKind::BandLike);
    CHECK(res.cells[4].scenario == LayoutKind::Uniform);
    CHECK(res.cells[0].objective == SwfKind::EqTimesProd);
    CHECK(res.cells[3].objective == SwfKind::EqualityOnly);

    // cell seeds are a pure function of (root seed, index)
    const fs::path out2 = fresh_dir("gtb_cli_grid2");
    GridResult res2 =
        cmd_grid(fast_config(), 11, out2.string(), PolicyMode::GathererBuilder, "", 1);
    for (size_t i = 0; i < 8; ++i) CHECK(res.cells[i].seed == res2.cells[i].seed);
    CHECK(slurp(out / "band_eqprod" / "metrics.csv") ==
          slurp(out2 / "band_eqprod" / "metrics.csv"));

    const fs::path out3 = fresh_dir("gtb_cli_grid3");
    GridResult filtered = cmd_grid(fast_config(), 11, out3.string(),
                                   PolicyMode::GathererBuilder, "uniformxprod", 1);
    CHECK(filtered.cells.size() == 1);
    CHECK(filtered.cells[0].scenario == LayoutKind::Uniform);
    CHECK(filtered.cells[0].objective == SwfKind::ProductivityOnly);

    fs::remove_all(out2);
    fs::remove_all(out3);
    fs::remove_all(out);
}

TEST_CASE("aggregate pools by environment") {
    const fs::path grid_dir = fresh_dir("gtb_cli_agg_runs");
    GridResult res =
        cmd_grid(fast_config(), 21, grid_dir.string(), PolicyMode::GathererBuilder, "", 2);
    REQUIRE(res.all_ok());

    const fs::path agg = fresh_dir("gtb_cli_agg_out");
    aggregate_runs(res.run_dirs(), agg.string());

    const CsvTable pooled = read_csv((agg / "pooled_metrics.csv").string());
    // horizon rows per environment
    CHECK(pooled.rows.size() == 2u * 120);
    const CsvTable returns = read_csv((agg / "tax_returns.csv").string());
    CHECK(returns.rows.size() == 8u * 3 * 4);  // runs x periods x agents

    SUBCASE("two identical runs pool to zero spread and the same mean") {
        const fs::path a = fresh_dir("gtb_cli_agg_a");
        const fs::path b = fresh_dir("gtb_cli_agg_b");
        RunSpec spec;
        spec.config = fast_config();
        spec.policy = PolicyMode::GathererBuilder;
        spec.seed = 33;
        spec.out_dir = a.string();
        cmd_run(spec);
        spec.out_dir = b.string();
        cmd_run(spec);
        const fs::path agg2 = fresh_dir("gtb_cli_agg2_out");
        aggregate_runs({a.string(), b.string()}, agg2.string());
        const CsvTable t = read_csv((agg2 / "pooled_metrics.csv").string());
        const int c_sd = t.column("productivity_sd");
        const int c_mean = t.column("productivity_mean");
        const CsvTable orig = read_csv((a / "metrics.csv").string());
        const int c_prod = orig.column("productivity");
        for (size_t r = 0; r < t.rows.size(); ++r) {
            CHECK(std::stod(t.rows[r][static_cast<size_t>(c_sd)]) == 0.0);
            CHECK(std::stod(t.rows[r][static_cast<size_t>(c_mean)]) ==
                  std::stod(orig.rows[r][static_cast<size_t>(c_prod)]));
        }
        fs::remove_all(a);
        fs::remove_all(b);
        fs::remove_all(agg2);
    }

    SUBCASE("a single run per environment pools to itself verbatim") {
        const fs::path solo = fresh_dir("gtb_cli_agg_solo");
        aggregate_runs({res.cells[0].dir}, solo.string());
        const CsvTable t = read_csv((solo / "pooled_metrics.csv").string());
        const CsvTable orig = read_csv((grid_dir / "band_eqprod" / "metrics.csv").string());
        const int c_mean = t.column("equality_mean");
        const int c_orig = orig.column("equality");
        for (size_t r = 0; r < t.rows.size(); ++r)
            CHECK(t.rows[r][static_cast<size_t>(c_mean)] ==
                  orig.rows[r][static_cast<size_t>(c_orig)]);
        fs::remove_all(solo);
    }

    SUBCASE("mixed horizons are refused with a diagnostic") {
        const fs::path other = fresh_dir("gtb_cli_agg_mixed");
        RunSpec spec;
        spec.config = fast_config();
        spec.config.env.horizon = 80;
        spec.policy = PolicyMode::NoOp;
        spec.out_dir = other.string();
        cmd_run(spec);
        CHECK_THROWS_AS(aggregate_runs({res.cells[0].dir, other.string()},
                                       (other / "agg").string()),
                        ConfigError);
        fs::remove_all(other);
    }

    SUBCASE("plot data reshapes the aggregate verbatim") {
        const fs::path plots = fresh_dir("gtb_cli_plots");
        write_plot_data(agg.string(), plots.string());
        const CsvTable fig4 = read_csv((plots / "fig4.csv").string());
        CHECK(fig4.header ==
              std::vector<std::string>{"step", "environment", "resource", "mean_units"});
        CHECK(fig4.rows.size() == 2u * 120 * 3);
        const CsvTable fig6 = read_csv((plots / "fig6.csv").string());
        CHECK(fig6.rows.size() == 8u * 3 * 4);
        // scripted runs have no curves: fig10 is headers only
        const CsvTable fig10 = read_csv((plots / "fig10.csv").string());
        CHECK(fig10.rows.empty());
        CHECK(fs::exists(plots / "schema.md"));

        // spot-check: values are copied bit-identically from aggregate inputs
        const CsvTable pooled_res = read_csv((agg / "pooled_resources.csv").string());
        const int c_mu = pooled_res.column("mean_units");
        CHECK(fig4.rows[0][3] == pooled_res.rows[0][static_cast<size_t>(c_mu)]);
        fs::remove_all(plots);
    }

    fs::remove_all(grid_dir);
    fs::remove_all(agg);
}

TEST_CASE("trained runs emit curves and checkpoints; checkpoints evaluate alone") {
    SimConfig cfg;
    cfg.world.width = 9;
    cfg.world.height = 9;
    cfg.world.n_agents = 3;
    cfg.world.regen_counts = {4, 4, 4};
    cfg.env.horizon = 60;
    cfg.fiscal.period = 30;
    cfg.trainer.iterations = 2;
    cfg.trainer.phase1_iters = 1;
    cfg.trainer.anneal_iters = 2;
    cfg.trainer.episodes_per_iter = 1;
    cfg.trainer.epochs = 1;
    cfg.trainer.conv_filters = 4;
    cfg.trainer.hidden = 16;

    const fs::path out = fresh_dir("gtb_cli_train");
    RunSpec spec;
    spec.config = cfg;
    spec.policy = PolicyMode::Train;
    spec.seed = 8;
    spec.out_dir = out.string();
    cmd_run(spec);
    CHECK(fs::exists(out / "checkpoint.bin"));
    CHECK(fs::exists(out / "training_curve.csv"));
    const CsvTable curve = read_csv((out / "training_curve.csv").string());
    CHECK(curve.rows.size() == 2);

    // evaluating the saved checkpoint reproduces the greedy evaluation episode
    const fs::path out2 = fresh_dir("gtb_cli_train_eval");
    RunSpec eval = spec;
    eval.out_dir = out2.string();
    eval.checkpoint = (out / "checkpoint.bin").string();
    cmd_run(eval);
    CHECK(!fs::exists(out2 / "checkpoint.bin"));  // nothing trained here
    CHECK(slurp(out / "metrics.csv") == slurp(out2 / "metrics.csv"));
    CHECK(slurp(out / "actions.csv") == slurp(out2 / "actions.csv"));

    fs::remove_all(out);
    fs::remove_all(out2);
}

TEST_CASE("binary: exit codes and layout dump") {
    const fs::path tmp = fresh_dir("gtb_cli_bin");
    fs::create_directories(tmp);

    CHECK(run_binary("definitely-not-a-verb") == 1);
    CHECK(run_binary("run") == 1);  // missing required --out
    CHECK(run_binary("run --config /nonexistent.json --out " + (tmp / "x").string()) == 2);

    const fs::path map = tmp / "band.txt";
    CHECK(run_binary("layout-dump --env band --seed 9 --out " + map.string()) == 0);
    const std::string text = slurp(map);
    CHECK(text.find('W') != std::string::npos);
    CHECK(text.find('w') != std::string::npos);

    fs::remove_all(tmp);
}
