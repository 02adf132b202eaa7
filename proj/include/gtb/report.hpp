#pragma once

#include <string>
#include <vector>

#include "gtb/types.hpp"

namespace gtb {

/// Pools run directories by environment (mean and population-sd per step for
/// the metric and resource series), concatenates the per-run tax-return
/// tables in input order, and collects training curves where present.
/// Refuses runs with mismatched horizons.
void aggregate_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir);

/// Reshapes an aggregate directory into one tidy CSV per target figure plus a
/// schema file; cell values are copied verbatim from the aggregate inputs.
void write_plot_data(const std::string& aggregate_dir, const std::string& out_dir);

}  // namespace gtb
