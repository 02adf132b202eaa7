#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/types.hpp"

namespace gtb {

enum class PolicyMode : uint8_t { Train, NoOp, Random, GathererBuilder };

const char* name_of(PolicyMode m);
PolicyMode policy_mode_from_string(const std::string& s);

struct RunSpec {
    SimConfig config;
    LayoutKind scenario = LayoutKind::Uniform;
    SwfKind objective = SwfKind::EqTimesProd;
    uint64_t seed = 0;
    std::string out_dir;
    PolicyMode policy = PolicyMode::Train;
    /// Evaluate from an existing checkpoint instead of training.
    std::string checkpoint;
    bool stochastic_eval = false;
    /// Rate setting applied every year when agents are scripted (planner has
    /// nothing to learn against scripted agents); 2 = 10% marginal rate.
    int scripted_rate_setting = 2;
    int grid_cell = -1;  // set by cmd_grid
};

/// Trains (or loads / scripts) the policies, evaluates one final episode
/// (greedy unless stochastic_eval), and writes the full CSV set, manifest,
/// layout dump, and resolved config into out_dir.
void cmd_run(const RunSpec& spec);

struct GridCell {
    int index = 0;
    LayoutKind scenario = LayoutKind::Uniform;
    SwfKind objective = SwfKind::EqTimesProd;
    uint64_t seed = 0;
    std::string dir;
    bool ok = false;
    std::string error;
};

struct GridResult {
    std::vector<GridCell> cells;
    bool all_ok() const;
    std::vector<std::string> run_dirs() const;  // grid order
};

/// The default 8-run grid: {band, uniform} x the four planner objectives,
/// band row first. Cell seeds derive from the root seed and cell index.
/// `cell_filter` ("bandxeqprod") selects a single cell; parallel > 1 runs
/// cells concurrently. A failing cell is reported and the grid continues.
GridResult cmd_grid(const SimConfig& base, uint64_t root_seed, const std::string& out_dir,
                    PolicyMode policy, const std::string& cell_filter = "", int parallel = 1);

/// Writes the one-character-per-cell map dump for the configured layout.
void cmd_layout_dump(const SimConfig& config, uint64_t seed, const std::string& path);

}  // namespace gtb
