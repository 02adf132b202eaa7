#include "gtb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gtb {

double utility(double coin, double labor, const UtilityParams& params) {
    require(params.eta > 0.0 && params.eta != 1.0, "utility: eta must be > 0 and != 1");
    require(coin >= 0.0, "utility: coin must be non-negative");
    if (coin == 0.0 && params.eta > 1.0) return kUtilityFloor - labor;
    return (std::pow(coin, 1.0 - params.eta) - 1.0) / (1.0 - params.eta) - labor;
}

double gini(std::span<const double> coins) {
    const size_t n = coins.size();
    require(n >= 2, "gini: needs at least two agents");
    double total = 0.0;
    for (double c : coins) total += c;
    if (total == 0.0) return 0.0;  // degenerate all-zero economy
    double diff_sum = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) diff_sum += std::abs(coins[i] - coins[j]);
    return diff_sum / (2.0 * static_cast<double>(n) * total);
}

double equality(std::span<const double> coins) {
    const double n = static_cast<double>(coins.size());
    return 1.0 - n / (n - 1.0) * gini(coins);
}

double productivity(std::span<const double> coins) {
    return std::accumulate(coins.begin(), coins.end(), 0.0);
}

double maximin(std::span<const double> coins) {
    require(!coins.empty(), "maximin: needs at least one agent");
    return *std::min_element(coins.begin(), coins.end());
}

WelfareSnapshot make_snapshot(std::span<const double> coins, std::span<const double> labors,
                              const MetricsConfig& cfg) {
    require(coins.size() == labors.size(), "make_snapshot: coin/labor length mismatch");
    WelfareSnapshot s;
    s.coins.assign(coins.begin(), coins.end());
    s.labors.assign(labors.begin(), labors.end());
    s.gini = gini(coins);
    s.equality = equality(coins);
    s.productivity = productivity(coins);
    s.maximin = maximin(coins);

    const UtilityParams up{cfg.eta};
    s.utilities.resize(coins.size());
    for (size_t i = 0; i < coins.size(); ++i) {
        if (coins[i] == 0.0 && cfg.eta > 1.0) ++s.utility_floor_hits;
        s.utilities[i] = utility(coins[i], labors[i], up);
    }

    s.weights.resize(coins.size());
    double wsum = 0.0;
    for (size_t i = 0; i < coins.size(); ++i) {
        s.weights[i] = 1.0 / std::max(coins[i], cfg.weight_floor);
        wsum += s.weights[i];
    }
    for (double& w : s.weights) w /= wsum;

    double utilitarian = 0.0;
    for (size_t i = 0; i < coins.size(); ++i) utilitarian += s.weights[i] * s.utilities[i];

    s.swf[static_cast<size_t>(SwfKind::EqTimesProd)] = s.equality * s.productivity;
    s.swf[static_cast<size_t>(SwfKind::InverseIncomeUtilitarian)] = utilitarian;
    s.swf[static_cast<size_t>(SwfKind::ProductivityOnly)] = s.productivity;
    s.swf[static_cast<size_t>(SwfKind::EqualityOnly)] = s.equality;
    return s;
}

double social_welfare(SwfKind kind, const WelfareSnapshot& snapshot) {
    return snapshot.swf[static_cast<size_t>(kind)];
}

}  // namespace gtb
