#pragma once

#include <array>
#include <span>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/types.hpp"

namespace gtb {

struct UtilityParams {
    double eta = 0.23;  // isoelastic curvature, > 0 and != 1
};

/// Sentinel for the pole at zero coin when eta > 1.
inline constexpr double kUtilityFloor = -1e9;

/// Isoelastic utility of coin minus accumulated labor:
/// (C^(1-eta) - 1) / (1 - eta) - L.
double utility(double coin, double labor, const UtilityParams& params);

/// Mean absolute pairwise difference over twice the mean-scaled total;
/// 0 for an all-zero vector. Needs at least two agents.
double gini(std::span<const double> coins);

/// 1 - N/(N-1) * gini, in [0, 1].
double equality(std::span<const double> coins);

double productivity(std::span<const double> coins);

/// Minimum coin endowment across agents.
double maximin(std::span<const double> coins);

struct WelfareSnapshot {
    std::vector<double> coins;
    std::vector<double> labors;
    double gini = 0.0;
    double equality = 1.0;
    double productivity = 0.0;
    double maximin = 0.0;
    std::array<double, 4> swf{};       // indexed by SwfKind
    std::vector<double> weights;       // inverse-income, normalized to sum 1
    std::vector<double> utilities;
    int utility_floor_hits = 0;        // zero-coin pole occurrences
};

WelfareSnapshot make_snapshot(std::span<const double> coins, std::span<const double> labors,
                              const MetricsConfig& cfg);

double social_welfare(SwfKind kind, const WelfareSnapshot& snapshot);

}  // namespace gtb
