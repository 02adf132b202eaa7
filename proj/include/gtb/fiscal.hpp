#pragma once

#include <cstdint>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/rng.hpp"
#include "gtb/types.hpp"
#include "gtb/world.hpp"

namespace gtb {

inline constexpr int kNumBrackets = 7;
inline constexpr int kNumRateSettings = 22;  // 21 rate levels plus "keep"
inline constexpr int kKeepRateSetting = 21;

/// Bracketed marginal tax schedule. Cutoffs are the lower bound of each
/// bracket (first is 0, top bracket is open-ended); one marginal rate per
/// bracket.
class TaxSchedule {
  public:
    TaxSchedule(std::vector<double> lower_cutoffs, std::vector<double> rates);

    static TaxSchedule zero_rates(std::vector<double> lower_cutoffs);

    int num_brackets() const { return static_cast<int>(rates_.size()); }
    const std::vector<double>& cutoffs() const { return cutoffs_; }
    const std::vector<double>& rates() const { return rates_; }

    /// Index of the bracket containing income z (z <= 0 falls in bracket 0).
    int bracket_of(double z) const;
    double marginal_rate_at(double z) const { return rates_[static_cast<size_t>(bracket_of(z))]; }

    void set_rate(int bracket, double rate);

  private:
    std::vector<double> cutoffs_;  // size B, strictly increasing, first 0
    std::vector<double> rates_;   // size B, each in [0,1]
};

/// Payable tax on income z. Negative income owes nothing. Computed in
/// integer milli-coin so two algebraic routes over the same schedule agree
/// exactly; per-bracket amounts round half-away-from-zero to the milli-coin.
double compute_tax(double z, const TaxSchedule& schedule);

/// Applies one planner action: per bracket, one of 21 rate levels
/// {0.00, 0.05, ..., 1.00} or the 22nd setting, "keep the previous rate".
/// `scale` multiplies chosen levels (training curriculum ramp).
void set_rates(TaxSchedule& schedule, const std::vector<int>& settings, double scale = 1.0);

/// The randomized wealth-threshold selection and per-recipient return draws
/// for one tax period; everything needed to replay the redistribution.
struct RedistributionDraw {
    double threshold_noise = 0.0;  // uniform(0,1) behind the income threshold
    double total_income = 0.0;     // sum of the period's pretax incomes
    int n_agents = 0;
    int n_wealthy = 0;
    std::vector<int> wealthy;  // agent ids passing the threshold, ascending
    // one (scale_noise, sign_draw) pair per wealthy agent, in `wealthy` order
    std::vector<double> scale_noise;
    std::vector<int> sign_draw;
};

/// Agent i is wealthy iff z_i > (0.7 + 0.1*noise) * mean income, strictly.
RedistributionDraw select_wealthy(const std::vector<double>& incomes, Rng& rng);

/// Deterministic core of select_wealthy with the threshold noise supplied.
RedistributionDraw select_wealthy_with_noise(const std::vector<double>& incomes,
                                             double threshold_noise);

/// Pays each wealthy agent
///   (noa/nowa) * (1 + (-1)^sign * noise * (1 - nowa/noa)) * revenue/noa
/// with fresh per-agent draws recorded into `draw`; everyone else gets 0.
std::vector<double> redistribute(double net_revenue, RedistributionDraw& draw, Rng& rng);

/// Recomputes returns from a logged draw, bit-exactly.
std::vector<double> replay_redistribution(double net_revenue, const RedistributionDraw& draw);

/// The double closest to net_revenue - returned for which
/// returned + residual == net_revenue holds bit-exactly.
double balanced_residual(double net_revenue, double returned);

struct TaxPeriodRecord {
    int period = 0;
    std::vector<double> pretax_income;  // coin change over the year, per agent
    std::vector<double> tax;            // payable tax per agent
    std::vector<double> tax_return;     // redistribution received per agent
    std::vector<double> shortfall;      // tax that could not be debited (coin clamp)
    double net_revenue = 0.0;           // sum of payable taxes
    double planner_residual = 0.0;      // net_revenue - sum of returns
    RedistributionDraw draw;
};

/// Ends a tax year: measures incomes against the baselines, debits taxes
/// (clamping coin at zero, logging any shortfall), selects the wealthy set,
/// credits the randomized returns, and resets the baselines.
TaxPeriodRecord close_tax_year(WorldState& world, const TaxSchedule& schedule,
                               std::vector<double>& year_start_coin, int period_index, Rng& rng);

}  // namespace gtb
