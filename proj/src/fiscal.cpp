#include "gtb/fiscal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace gtb {

namespace {

constexpr double kMilliPerCoin = 1000.0;

int64_t to_milli(double coin) {
    return static_cast<int64_t>(std::llround(coin * kMilliPerCoin));
}

}  // namespace

namespace {

double plain_sum(const std::vector<double>& v) {
    // index order; the ledger identity is defined over this summation
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

std::optional<double> residual_candidate(double net_revenue, double returned) {
    const double base = net_revenue - returned;
    if (returned + base == net_revenue) return base;
    double lo = base, hi = base;
    for (int i = 0; i < 8; ++i) {
        lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
        hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
        if (returned + lo == net_revenue) return lo;
        if (returned + hi == net_revenue) return hi;
    }
    return std::nullopt;
}

// When the returns sum sits in a lower binade than the revenue, no residual
// representation can balance the ledger bit-exactly (every candidate lands on
// a rounding tie). Shifting the last nonzero return by single ulps moves the
// sum in sub-ulp-of-revenue steps, which always escapes the tie lattice.
void balance_ledger(double net_revenue, std::vector<double>& returns) {
    if (residual_candidate(net_revenue, plain_sum(returns))) return;
    int last = -1;
    for (int i = static_cast<int>(returns.size()) - 1; i >= 0; --i)
        if (returns[static_cast<size_t>(i)] != 0.0) {
            last = i;
            break;
        }
    if (last < 0) return;
    const double orig = returns[static_cast<size_t>(last)];
    for (int steps = 1; steps <= 8; ++steps) {
        for (double dir :
             {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}) {
            double v = orig;
            for (int s = 0; s < steps; ++s) v = std::nextafter(v, dir);
            returns[static_cast<size_t>(last)] = v;
            if (residual_candidate(net_revenue, plain_sum(returns))) return;
        }
    }
    returns[static_cast<size_t>(last)] = orig;
}

}  // namespace

double balanced_residual(double net_revenue, double returned) {
    if (auto r = residual_candidate(net_revenue, returned)) return *r;
    return net_revenue - returned;
}

TaxSchedule::TaxSchedule(std::vector<double> lower_cutoffs, std::vector<double> rates)
    : cutoffs_(std::move(lower_cutoffs)), rates_(std::move(rates)) {
    require(!cutoffs_.empty() && cutoffs_.size() == rates_.size(),
            "TaxSchedule: need one lower cutoff per bracket");
    require(cutoffs_.front() == 0.0, "TaxSchedule: first cutoff must be 0");
    for (size_t i = 1; i < cutoffs_.size(); ++i)
        require(cutoffs_[i] > cutoffs_[i - 1], "TaxSchedule: cutoffs must be strictly increasing");
    for (double r : rates_)
        require(r >= 0.0 && r <= 1.0, "TaxSchedule: rates must lie in [0,1]");
}

TaxSchedule TaxSchedule::zero_rates(std::vector<double> lower_cutoffs) {
    std::vector<double> rates(lower_cutoffs.size(), 0.0);
    return TaxSchedule(std::move(lower_cutoffs), std::move(rates));
}

int TaxSchedule::bracket_of(double z) const {
    int b = 0;
    for (size_t i = 1; i < cutoffs_.size(); ++i)
        if (z > cutoffs_[i]) b = static_cast<int>(i);
    return b;
}

void TaxSchedule::set_rate(int bracket, double rate) {
    require(bracket >= 0 && bracket < num_brackets(), "set_rate: bracket out of range");
    require(rate >= 0.0 && rate <= 1.0, "set_rate: rate must lie in [0,1]");
    rates_[static_cast<size_t>(bracket)] = rate;
}

double compute_tax(double z, const TaxSchedule& schedule) {
    require(std::isfinite(z), "compute_tax: income must be finite");
    const int64_t z_mc = std::max<int64_t>(to_milli(z), 0);  // negative income owes nothing
    const auto& cuts = schedule.cutoffs();
    const auto& rates = schedule.rates();
    int64_t tax_mc = 0;
    for (size_t j = 0; j < rates.size(); ++j) {
        const int64_t lo = to_milli(cuts[j]);
        const int64_t hi =
            j + 1 < cuts.size() ? to_milli(cuts[j + 1]) : std::numeric_limits<int64_t>::max();
        const int64_t span = std::clamp(z_mc, lo, hi) - lo;
        if (span > 0)
            tax_mc += static_cast<int64_t>(std::llround(rates[j] * static_cast<double>(span)));
    }
    return static_cast<double>(tax_mc) / kMilliPerCoin;
}

void set_rates(TaxSchedule& schedule, const std::vector<int>& settings, double scale) {
    require(static_cast<int>(settings.size()) == schedule.num_brackets(),
            "set_rates: one setting per bracket required");
    for (size_t b = 0; b < settings.size(); ++b) {
        const int s = settings[b];
        require(s >= 0 && s < kNumRateSettings, "set_rates: setting outside the 22 choices");
        if (s == kKeepRateSetting) continue;
        schedule.set_rate(static_cast<int>(b), 0.05 * s * scale);
    }
}

RedistributionDraw select_wealthy_with_noise(const std::vector<double>& incomes,
                                             double threshold_noise) {
    require(!incomes.empty(), "select_wealthy: no agents");
    RedistributionDraw draw;
    draw.n_agents = static_cast<int>(incomes.size());
    draw.total_income = std::accumulate(incomes.begin(), incomes.end(), 0.0);
    draw.threshold_noise = threshold_noise;
    const double threshold =
        (0.7 + 0.1 * draw.threshold_noise) * draw.total_income / draw.n_agents;
    for (int i = 0; i < draw.n_agents; ++i)
        if (incomes[static_cast<size_t>(i)] > threshold) draw.wealthy.push_back(i);
    draw.n_wealthy = static_cast<int>(draw.wealthy.size());
    return draw;
}

RedistributionDraw select_wealthy(const std::vector<double>& incomes, Rng& rng) {
    return select_wealthy_with_noise(incomes, rng.uniform01());
}

std::vector<double> replay_redistribution(double net_revenue, const RedistributionDraw& draw) {
    require(net_revenue >= 0.0, "redistribute: net revenue cannot be negative");
    std::vector<double> returns(static_cast<size_t>(draw.n_agents), 0.0);
    if (draw.n_wealthy == 0) return returns;
    const double inclusion = static_cast<double>(draw.n_agents) / draw.n_wealthy;
    const double spread = 1.0 - static_cast<double>(draw.n_wealthy) / draw.n_agents;
    const double base = net_revenue / draw.n_agents;
    for (size_t k = 0; k < draw.wealthy.size(); ++k) {
        const double sign = draw.sign_draw[k] % 2 == 0 ? 1.0 : -1.0;
        const double factor = 1.0 + sign * draw.scale_noise[k] * spread;
        returns[static_cast<size_t>(draw.wealthy[k])] = inclusion * factor * base;
    }
    balance_ledger(net_revenue, returns);
    return returns;
}

std::vector<double> redistribute(double net_revenue, RedistributionDraw& draw, Rng& rng) {
    require(net_revenue >= 0.0, "redistribute: net revenue cannot be negative");
    draw.scale_noise.clear();
    draw.sign_draw.clear();
    for (size_t k = 0; k < draw.wealthy.size(); ++k) {
        draw.scale_noise.push_back(rng.uniform01());
        draw.sign_draw.push_back(static_cast<int>(rng.uniform_int(0, 1)));
    }
    return replay_redistribution(net_revenue, draw);
}

TaxPeriodRecord close_tax_year(WorldState& world, const TaxSchedule& schedule,
                               std::vector<double>& year_start_coin, int period_index, Rng& rng) {
    require(year_start_coin.size() == world.agents.size(),
            "close_tax_year: baseline per agent required");
    TaxPeriodRecord rec;
    rec.period = period_index;
    const size_t n = world.agents.size();
    rec.pretax_income.resize(n);
    rec.tax.resize(n);
    rec.shortfall.assign(n, 0.0);

    for (size_t i = 0; i < n; ++i) {
        AgentState& a = world.agents[i];
        rec.pretax_income[i] = a.total_coin() - year_start_coin[i];
        rec.tax[i] = compute_tax(rec.pretax_income[i], schedule);
        rec.net_revenue += rec.tax[i];
        // debit from free coin; escrowed coin is committed to open bids, so a
        // temporary shortfall is clamped and logged rather than taken
        const double paid = std::min(rec.tax[i], a.coin);
        rec.shortfall[i] = rec.tax[i] - paid;
        a.coin -= paid;
    }

    rec.draw = select_wealthy(rec.pretax_income, rng);
    rec.tax_return = redistribute(rec.net_revenue, rec.draw, rng);
    double returned = 0.0;
    for (size_t i = 0; i < n; ++i) {
        world.agents[i].coin += rec.tax_return[i];
        returned += rec.tax_return[i];
    }
    rec.planner_residual = balanced_residual(rec.net_revenue, returned);

    for (size_t i = 0; i < n; ++i) year_start_coin[i] = world.agents[i].total_coin();
    return rec;
}

}  // namespace gtb
