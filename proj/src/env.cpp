#include "gtb/env.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "gtb/csv.hpp"

namespace gtb {

// ---------------------------------------------------------------------------
// Action encoding
// ---------------------------------------------------------------------------

AgentAction decode_agent_action(int index) {
    require(index >= 0 && index < kNumAgentActions, "decode_agent_action: index out of range");
    AgentAction a;
    if (index == 0) {
        a.kind = AgentActionKind::Noop;
    } else if (index < kFirstTradeAction) {
        a.kind = AgentActionKind::Move;
        a.dir = static_cast<Direction>(index - kFirstMoveAction);
    } else if (index < kFirstBuildAction) {
        a.kind = AgentActionKind::Trade;
        int t = index - kFirstTradeAction;  // resource-major: 2 sides x 11 prices
        a.resource = static_cast<ResourceKind>(t / (2 * kPriceLevels));
        a.side = static_cast<Side>((t / kPriceLevels) % 2);
        a.price = t % kPriceLevels;
    } else {
        a.kind = AgentActionKind::Build;
        a.house = static_cast<HouseType>(index - kFirstBuildAction);
    }
    return a;
}

int encode_agent_action(const AgentAction& a) {
    switch (a.kind) {
        case AgentActionKind::Noop: return 0;
        case AgentActionKind::Move: return kFirstMoveAction + static_cast<int>(a.dir);
        case AgentActionKind::Trade:
            return kFirstTradeAction + static_cast<int>(a.resource) * 2 * kPriceLevels +
                   static_cast<int>(a.side) * kPriceLevels + a.price;
        case AgentActionKind::Build: return kFirstBuildAction + static_cast<int>(a.house);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Observation encoding
// ---------------------------------------------------------------------------

namespace {

// feature scales keep network inputs near unit range
constexpr double kCoinScale = 0.01;
constexpr double kInventoryScale = 0.1;
constexpr double kCountScale = 0.2;
constexpr double kPriceScale = 0.1;
constexpr double kTradeCountScale = 0.05;
constexpr double kSkillScale = 1.0 / 30.0;

void paint_cell(std::vector<double>& spatial, int cells_per_channel, int slot,
                const WorldState& world, Coord c, int viewer) {
    auto set = [&](int chan, double v) {
        spatial[static_cast<size_t>(chan * cells_per_channel + slot)] = v;
    };
    if (!world.layout.in_bounds(c)) {
        set(kChanOutOfWorld, 1.0);
        return;
    }
    if (world.is_water(c)) set(kChanWater, 1.0);
    int ri = world.regen_index(c);
    if (ri >= 0) {
        ResourceKind kind = world.layout.regen_cells[static_cast<size_t>(ri)].second;
        set(kChanRegenWood + static_cast<int>(kind), 1.0);
        int units = world.resource_units[static_cast<size_t>(ri)];
        if (units > 0) set(kChanUnitsWood + static_cast<int>(kind), static_cast<double>(units));
    }
    int aid = world.agent_at(c);
    if (aid >= 0) {
        if (aid == viewer)
            set(kChanSelfAgent, 1.0);
        else
            set(kChanOtherAgent, 1.0);
    }
    if (const House* h = world.house_at(c)) {
        if (viewer >= 0 && h->owner == viewer)
            set(kChanOwnHouse, 1.0);
        else
            set(kChanOtherHouse, 1.0);
    }
}

void append_market_block(std::vector<double>& vec, const MarketView& mv, bool include_own) {
    if (include_own)
        for (double v : mv.own_counts) vec.push_back(v * kCountScale);
    for (double v : mv.other_counts) vec.push_back(v * kCountScale);
    for (double v : mv.avg_price) vec.push_back(v * kPriceScale);
    for (double v : mv.trades_at_level) vec.push_back(v * kTradeCountScale);
}

}  // namespace

int agent_vec_size(int n_agents) {
    // inventory 3 + escrow 3 + escrow coin + coin + skills 3 +
    // market (66 own + 66 others + 3 avg + 33 levels) + rates 7 + progress 2 +
    // sorted last-year incomes + own marginal rate
    return 3 + 3 + 1 + 1 + 3 + (66 + 66 + 3 + 33) + 7 + 2 + n_agents + 1;
}

int planner_vec_size(int n_agents) {
    // per agent (inventory 3 + escrow 3 + escrow coin + coin) +
    // market (66 + 3 + 33) + rates 7 + progress 2 +
    // per agent last-year income and marginal rate
    return 8 * n_agents + (66 + 3 + 33) + 7 + 2 + 2 * n_agents;
}

AgentObservation Environment::agent_observation(int agent_id) const {
    require(agent_id >= 0 && agent_id < static_cast<int>(world_.agents.size()),
            "agent_observation: invalid agent id");
    const AgentState& a = world_.agents[static_cast<size_t>(agent_id)];
    const int win = cfg_.env.window;
    const int half = win / 2;
    AgentObservation obs;
    obs.window = win;
    obs.spatial.assign(static_cast<size_t>(kNumObsChannels) * win * win, 0.0);
    for (int wy = 0; wy < win; ++wy) {
        for (int wx = 0; wx < win; ++wx) {
            Coord c{a.location.x + wx - half, a.location.y + wy - half};
            paint_cell(obs.spatial, win * win, wy * win + wx, world_, c, agent_id);
        }
    }

    obs.vec.reserve(static_cast<size_t>(agent_vec_size(static_cast<int>(world_.agents.size()))));
    for (int v : a.inventory) obs.vec.push_back(v * kInventoryScale);
    for (int v : a.escrow) obs.vec.push_back(v * kInventoryScale);
    obs.vec.push_back(a.escrow_coin * kCoinScale);
    obs.vec.push_back(a.coin * kCoinScale);
    for (double s : a.build_skill) obs.vec.push_back(s * kSkillScale);
    append_market_block(obs.vec, book_.observation(agent_id), true);

    for (double r : schedule_.rates()) obs.vec.push_back(r);
    const int t_in_year = world_.step % cfg_.fiscal.period;
    obs.vec.push_back(static_cast<double>(t_in_year) / cfg_.fiscal.period);
    obs.vec.push_back(static_cast<double>(cfg_.fiscal.period - t_in_year) / cfg_.fiscal.period);
    for (double z : last_year_sorted_incomes_) obs.vec.push_back(z * kCoinScale);
    const double year_income = a.total_coin() - year_baseline_[static_cast<size_t>(agent_id)];
    obs.vec.push_back(schedule_.marginal_rate_at(std::max(year_income, 0.0)));
    return obs;
}

PlannerObservation Environment::planner_observation() const {
    PlannerObservation obs;
    obs.width = world_.layout.width;
    obs.height = world_.layout.height;
    obs.spatial.assign(static_cast<size_t>(kNumObsChannels) * obs.width * obs.height, 0.0);
    for (int y = 0; y < obs.height; ++y)
        for (int x = 0; x < obs.width; ++x)
            paint_cell(obs.spatial, obs.width * obs.height, y * obs.width + x, world_, {x, y},
                       kPlannerViewer);

    obs.vec.reserve(static_cast<size_t>(planner_vec_size(static_cast<int>(world_.agents.size()))));
    for (const AgentState& a : world_.agents) {
        for (int v : a.inventory) obs.vec.push_back(v * kInventoryScale);
        for (int v : a.escrow) obs.vec.push_back(v * kInventoryScale);
        obs.vec.push_back(a.escrow_coin * kCoinScale);
        obs.vec.push_back(a.coin * kCoinScale);
    }
    append_market_block(obs.vec, book_.observation(kPlannerViewer), false);
    for (double r : schedule_.rates()) obs.vec.push_back(r);
    const int t_in_year = world_.step % cfg_.fiscal.period;
    obs.vec.push_back(static_cast<double>(t_in_year) / cfg_.fiscal.period);
    obs.vec.push_back(static_cast<double>(cfg_.fiscal.period - t_in_year) / cfg_.fiscal.period);
    for (double z : last_year_incomes_) obs.vec.push_back(z * kCoinScale);
    for (double r : last_year_marginal_rates_) obs.vec.push_back(r);
    return obs;
}

std::vector<uint8_t> Environment::legal_actions(int agent_id) const {
    require(agent_id >= 0 && agent_id < static_cast<int>(world_.agents.size()),
            "legal_actions: invalid agent id");
    const AgentState& a = world_.agents[static_cast<size_t>(agent_id)];
    std::vector<uint8_t> mask(kNumAgentActions, 0);
    mask[0] = 1;
    for (Direction d : kAllDirections) {
        Coord to = neighbor(a.location, d);
        const House* h = world_.house_at(to);
        bool blocked = !world_.layout.in_bounds(to) || world_.is_water(to) ||
                       world_.agent_at(to) >= 0 || (h != nullptr && h->owner != agent_id);
        mask[static_cast<size_t>(kFirstMoveAction + static_cast<int>(d))] = blocked ? 0 : 1;
    }
    for (int r = 0; r < kNumResources; ++r) {
        for (int s = 0; s < 2; ++s) {
            bool can = s == static_cast<int>(Side::Bid)
                           ? true
                           : a.inventory[static_cast<size_t>(r)] >= 1;
            can = can && book_.open_count(agent_id, static_cast<ResourceKind>(r),
                                          static_cast<Side>(s)) < cfg_.market.max_open_per_side;
            for (int p = 0; p < kPriceLevels; ++p) {
                bool funded = s == static_cast<int>(Side::Bid) ? a.coin >= p : true;
                size_t slot = static_cast<size_t>(kFirstTradeAction + r * 2 * kPriceLevels +
                                                  s * kPriceLevels + p);
                mask[slot] = (can && funded) ? 1 : 0;
            }
        }
    }
    const bool cell_ok =
        world_.house_at(a.location) == nullptr && world_.regen_index(a.location) < 0;
    for (HouseType h : kAllHouseTypes) {
        bool have = true;
        for (ResourceKind k : recipe(h)) have = have && a.inventory[static_cast<size_t>(k)] >= 1;
        mask[static_cast<size_t>(kFirstBuildAction + static_cast<int>(h))] =
            (cell_ok && have) ? 1 : 0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Environment lifecycle
// ---------------------------------------------------------------------------

Environment::Environment(const SimConfig& config, uint64_t seed)
    : cfg_(config.normalized()),
      seed_(seed),
      world_(make_world(cfg_.world, seed)),
      book_(cfg_.market),
      schedule_(TaxSchedule::zero_rates(cfg_.fiscal.bracket_cutoffs)),
      env_rng_(derive_seed(seed, 0x01)) {
    require(schedule_.num_brackets() == kNumBrackets,
            "Environment: planner schedule must have 7 brackets");
    const size_t n = world_.agents.size();
    year_baseline_.resize(n);
    for (size_t i = 0; i < n; ++i) year_baseline_[i] = world_.agents[i].total_coin();
    last_year_incomes_.assign(n, 0.0);
    last_year_sorted_incomes_.assign(n, 0.0);
    last_year_marginal_rates_.assign(n, 0.0);

    std::vector<double> coins(n), labors(n, 0.0);
    for (size_t i = 0; i < n; ++i) coins[i] = world_.agents[i].total_coin();
    WelfareSnapshot s0 = make_snapshot(coins, labors, cfg_.metrics);
    prev_utils_ = s0.utilities;
    prev_swf_ = social_welfare(cfg_.env.objective, s0);

    log_.config_hash = config_hash(cfg_);
    log_.seed = seed;
    log_.horizon = cfg_.env.horizon;
    log_.n_agents = static_cast<int>(n);
    log_.period = cfg_.fiscal.period;
    log_.layout = cfg_.world.layout;
    log_.objective = cfg_.env.objective;
    log_.initial_utilities = prev_utils_;
    log_.initial_swf = prev_swf_;
    log_.initial_resources = resource_totals(world_);
    log_.layout_text = layout_to_text(world_.layout);
}

void Environment::apply_agent_action(int agent_id, const AgentAction& a) {
    switch (a.kind) {
        case AgentActionKind::Noop: break;
        case AgentActionKind::Move:
            step_move(world_, agent_id, a.dir, env_rng_, cfg_.labor);
            break;
        case AgentActionKind::Trade: {
            Order o;
            o.owner = agent_id;
            o.side = a.side;
            o.resource = a.resource;
            o.price = a.price;
            o.placed_at = world_.step;
            book_.submit(world_, o, env_rng_, cfg_.labor.trade);
            break;
        }
        case AgentActionKind::Build:
            build_house(world_, agent_id, a.house, cfg_.labor);
            break;
    }
}

void Environment::snapshot_and_reward(StepResult& result) {
    const size_t n = world_.agents.size();
    std::vector<double> coins(n), labors(n);
    for (size_t i = 0; i < n; ++i) {
        coins[i] = world_.agents[i].total_coin();
        labors[i] = world_.agents[i].labor;
    }
    WelfareSnapshot s = make_snapshot(coins, labors, cfg_.metrics);
    log_.utility_floor_hits += s.utility_floor_hits;

    result.agent_rewards.resize(n);
    for (size_t i = 0; i < n; ++i) {
        result.agent_rewards[i] = s.utilities[i] - prev_utils_[i];
        prev_utils_[i] = s.utilities[i];
    }
    const double swf = social_welfare(cfg_.env.objective, s);
    result.planner_reward = swf - prev_swf_;
    prev_swf_ = swf;

    log_.snapshots.push_back(std::move(s));
    log_.resource_series.push_back(resource_totals(world_));
    log_.rewards.push_back(result.agent_rewards);
    log_.planner_rewards.push_back(result.planner_reward);
    std::vector<double> lab(n), cn(n);
    for (size_t i = 0; i < n; ++i) {
        lab[i] = world_.agents[i].labor;
        cn[i] = world_.agents[i].total_coin();
    }
    log_.labor.push_back(std::move(lab));
    log_.coin.push_back(std::move(cn));
}

StepResult Environment::step(const std::vector<int>& agent_actions,
                             const std::optional<PlannerAction>& planner_action) {
    require(!done(), "step: episode already finished");
    const size_t n = world_.agents.size();
    require(agent_actions.size() == n, "step: one action per agent required");

    std::vector<AgentAction> decoded(n);
    for (size_t i = 0; i < n; ++i) decoded[i] = decode_agent_action(agent_actions[i]);

    if (at_year_start()) {
        require(planner_action.has_value(), "step: planner action required at year start");
        if (cfg_.fiscal.taxes_enabled) {
            set_rates(schedule_, *planner_action, cfg_.fiscal.tax_rate_scale);
        } else {
            for (int b = 0; b < schedule_.num_brackets(); ++b) schedule_.set_rate(b, 0.0);
        }
    } else {
        require(!planner_action.has_value(), "step: planner acts only at year starts");
    }

    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    env_rng_.shuffle(order);
    for (int id : order) apply_agent_action(id, decoded[static_cast<size_t>(id)]);

    book_.expire(world_, world_.step);
    regen_resources(world_, env_rng_, cfg_.world.regen_prob, cfg_.world.cell_cap);

    if (world_.step % cfg_.fiscal.period == cfg_.fiscal.period - 1) {
        TaxPeriodRecord rec =
            close_tax_year(world_, schedule_, year_baseline_, periods_done_, env_rng_);
        ++periods_done_;
        last_year_incomes_ = rec.pretax_income;
        last_year_sorted_incomes_ = rec.pretax_income;
        std::sort(last_year_sorted_incomes_.begin(), last_year_sorted_incomes_.end());
        for (size_t i = 0; i < n; ++i)
            last_year_marginal_rates_[i] =
                schedule_.marginal_rate_at(std::max(rec.pretax_income[i], 0.0));
        log_.tax_records.push_back(std::move(rec));
    }

    StepResult result;
    log_.actions.push_back(agent_actions);
    snapshot_and_reward(result);

    ++world_.step;
    result.done = done();
    if (result.done) log_.trades = book_.trades();
    return result;
}

EpisodeLog Environment::take_log() {
    if (done()) log_.trades = book_.trades();
    return std::move(log_);
}

// ---------------------------------------------------------------------------
// Episode driver
// ---------------------------------------------------------------------------

EpisodeLog run_episode(const SimConfig& config, uint64_t seed, IAgentPolicy& agents,
                       IPlannerPolicy& planner) {
    Environment env(config, seed);
    Rng agent_rng(derive_seed(seed, 0x20));
    Rng planner_rng(derive_seed(seed, 0x21));
    agents.begin_episode(env, agent_rng);
    planner.begin_episode(env, planner_rng);
    const int n = static_cast<int>(env.world().agents.size());
    while (!env.done()) {
        std::optional<PlannerAction> pa;
        if (env.at_year_start()) pa = planner.act(env, planner_rng);
        std::vector<int> acts(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) acts[static_cast<size_t>(i)] = agents.act(env, i, agent_rng);
        env.step(acts, pa);
    }
    return env.take_log();
}

// ---------------------------------------------------------------------------
// Episode log output
// ---------------------------------------------------------------------------

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw ConfigError("csv column not found: " + name);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open csv: " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.empty()) continue;
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

void EpisodeLog::write_csv_dir(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    {
        CsvWriter w(dir + "/metrics.csv", "step,productivity,equality,maximin,swf");
        for (size_t t = 0; t < snapshots.size(); ++t) {
            const WelfareSnapshot& s = snapshots[t];
            w.row(static_cast<int>(t), s.productivity, s.equality, s.maximin,
                  social_welfare(objective, s));
        }
    }
    {
        CsvWriter w(dir + "/resources.csv", "step,wood,stone,iron");
        for (size_t t = 0; t < resource_series.size(); ++t)
            w.row(static_cast<int>(t), resource_series[t][0], resource_series[t][1],
                  resource_series[t][2]);
    }
    {
        CsvWriter w(dir + "/trades.csv", "step,resource,price,buyer,seller");
        for (const Trade& t : trades)
            w.row(t.step, name_of(t.resource), t.price, t.buyer, t.seller);
    }
    {
        CsvWriter w(dir + "/taxes.csv", "period,agent,pretax_income,tax,tax_return");
        for (const TaxPeriodRecord& rec : tax_records)
            for (size_t i = 0; i < rec.pretax_income.size(); ++i)
                w.row(rec.period, static_cast<int>(i), rec.pretax_income[i], rec.tax[i],
                      rec.tax_return[i]);
    }
    {
        CsvWriter w(dir + "/actions.csv", "step,agent,action,labor,coin,reward");
        for (size_t t = 0; t < actions.size(); ++t)
            for (size_t i = 0; i < actions[t].size(); ++i)
                w.row(static_cast<int>(t), static_cast<int>(i), actions[t][i], labor[t][i],
                      coin[t][i], rewards[t][i]);
    }

    nlohmann::json manifest;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(config_hash));
    manifest["config_hash"] = hash_hex;
    manifest["seed"] = seed;
    manifest["horizon"] = horizon;
    manifest["n_agents"] = n_agents;
    manifest["period"] = period;
    manifest["environment"] = name_of(layout);
    manifest["objective"] = name_of(objective);
    manifest["periods"] = static_cast<int>(tax_records.size());
    manifest["utility_floor_hits"] = utility_floor_hits;
    manifest["initial_resources"] = {initial_resources[0], initial_resources[1],
                                     initial_resources[2]};
    manifest["schema_version"] = 1;
    std::ofstream mo(dir + "/manifest.json");
    if (!mo) throw ConfigError("cannot write manifest: " + dir);
    mo << manifest.dump(2) << "\n";

    std::ofstream lo(dir + "/layout.txt");
    lo << layout_text;
}

}  // namespace gtb
