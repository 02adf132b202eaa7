#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gtb/env.hpp"
#include "gtb/policy.hpp"

using namespace gtb;

namespace {

SimConfig small_config() {
    SimConfig c;
    c.world.layout = LayoutKind::Uniform;
    c.world.width = 15;
    c.world.height = 15;
    c.world.n_agents = 5;
    c.world.regen_counts = {12, 12, 12};
    c.env.horizon = 200;
    c.fiscal.period = 50;
    c.scripted.build_cooldown = 20;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("agent action space: exactly 74 actions, encode/decode bijection") {
    int noop = 0, moves = 0, trades = 0, builds = 0;
    std::set<std::tuple<int, int, int, int, int, int>> distinct;
    for (int i = 0; i < kNumAgentActions; ++i) {
        const AgentAction a = decode_agent_action(i);
        CHECK(encode_agent_action(a) == i);
        switch (a.kind) {
            case AgentActionKind::Noop: ++noop; break;
            case AgentActionKind::Move: ++moves; break;
            case AgentActionKind::Trade: ++trades; break;
            case AgentActionKind::Build: ++builds; break;
        }
        distinct.insert({static_cast<int>(a.kind), static_cast<int>(a.dir),
                         static_cast<int>(a.resource), static_cast<int>(a.side), a.price,
                         static_cast<int>(a.house)});
    }
    CHECK(noop == 1);
    CHECK(moves == 4);
    CHECK(trades == 66);
    CHECK(builds == 3);
    CHECK(distinct.size() == kNumAgentActions);
    CHECK_THROWS_AS(decode_agent_action(74), ContractError);
    CHECK_THROWS_AS(decode_agent_action(-1), ContractError);
}

TEST_CASE("planner action space: 7 brackets x 22 settings") {
    CHECK(kNumBrackets == 7);
    CHECK(kNumRateSettings == 22);
    // decoding a setting and reading the rate back is a bijection on levels
    auto cutoffs = FiscalConfig{}.bracket_cutoffs;
    for (int s = 0; s <= 20; ++s) {
        TaxSchedule sched = TaxSchedule::zero_rates(cutoffs);
        std::vector<int> action(7, kKeepRateSetting);
        action[3] = s;
        set_rates(sched, action);
        CHECK(sched.rates()[3] == doctest::Approx(0.05 * s));
        const int recovered = static_cast<int>(std::llround(sched.rates()[3] / 0.05));
        CHECK(recovered == s);
    }
}

TEST_CASE("reset determinism and observation shapes") {
    const SimConfig cfg = small_config();
    Environment a(cfg, 42), b(cfg, 42);
    CHECK(a.world().agents.size() == 5);

    for (int i = 0; i < 5; ++i) {
        const AgentObservation oa = a.agent_observation(i);
        const AgentObservation ob = b.agent_observation(i);
        CHECK(oa.spatial == ob.spatial);
        CHECK(oa.vec == ob.vec);
        CHECK(oa.spatial.size() ==
              static_cast<size_t>(kNumObsChannels) * cfg.env.window * cfg.env.window);
        CHECK(oa.vec.size() == static_cast<size_t>(agent_vec_size(5)));
    }
    const PlannerObservation pa = a.planner_observation();
    const PlannerObservation pb = b.planner_observation();
    CHECK(pa.spatial == pb.spatial);
    CHECK(pa.vec == pb.vec);
    CHECK(pa.vec.size() == static_cast<size_t>(planner_vec_size(5)));
}

TEST_CASE("planner map shows the water columns of a band layout") {
    SimConfig cfg = small_config();
    cfg.world.layout = LayoutKind::BandLike;
    cfg.world.regen_counts = {10, 10, 10};
    Environment env(cfg, 3);
    const PlannerObservation obs = env.planner_observation();
    const int cells = cfg.world.width * cfg.world.height;
    double water_sum = 0.0;
    for (int i = 0; i < cells; ++i) water_sum += obs.spatial[static_cast<size_t>(kChanWater * cells + i)];
    CHECK(water_sum == 2.0 * cfg.world.height);
}

TEST_CASE("all no-op step yields zero rewards") {
    SimConfig cfg = small_config();
    cfg.world.regen_prob = 0.0;
    Environment env(cfg, 7);
    StepResult r = env.step(std::vector<int>(5, 0), PlannerAction(kNumBrackets, 0));
    for (double x : r.agent_rewards) CHECK(x == 0.0);
    CHECK(r.planner_reward == 0.0);
}

TEST_CASE("build reward equals the hand-evaluated utility delta") {
    SimConfig cfg = small_config();
    cfg.metrics.eta = 0.5;
    cfg.world.regen_prob = 0.0;
    cfg.world.initial_coin = 4.0;  // so the pre-build utility is u(4, 0)
    Environment env(cfg, 7);
    WorldState& w = env.world_mutable();
    // stand agent 0 on a plain cell with materials and skill 17
    Coord spot{1, 1};
    while (w.regen_index(spot) >= 0 || w.agent_at(spot) >= 0) spot.x += 1;
    w.relocate_agent(0, spot);
    w.agents[0].inventory = {1, 1, 0};
    w.agents[0].build_skill[0] = 17.0;

    const UtilityParams up{0.5};
    const double u_before = utility(4.0, 0.0, up);
    const double u_after = utility(21.0, cfg.labor.build, up);

    std::vector<int> acts(5, 0);
    acts[0] = kFirstBuildAction + 0;  // build red
    StepResult r = env.step(acts, PlannerAction(kNumBrackets, 0));
    CHECK(r.agent_rewards[0] == doctest::Approx(u_after - u_before).epsilon(1e-12));
}

TEST_CASE("legal action mask matches world state") {
    SimConfig cfg = small_config();
    Environment env(cfg, 9);
    WorldState& w = env.world_mutable();
    w.relocate_agent(0, {0, 0});
    std::vector<uint8_t> mask = env.legal_actions(0);
    CHECK(mask[0] == 1);
    CHECK(mask[kFirstMoveAction + static_cast<int>(Direction::Up)] == 0);
    CHECK(mask[kFirstMoveAction + static_cast<int>(Direction::Left)] == 0);
    // no coin: bids above price 0 are illegal, price-0 bids are legal
    CHECK(mask[kFirstTradeAction + 0] == 1);
    CHECK(mask[kFirstTradeAction + 1] == 0);
    // no inventory: asks and builds illegal
    CHECK(mask[kFirstTradeAction + kPriceLevels] == 0);
    CHECK(mask[kFirstBuildAction] == 0);

    w.agents[0].inventory = {1, 1, 0};
    w.agents[0].coin = 10.0;
    // park on a plain cell so building is only gated by materials
    Coord spot{3, 3};
    while (w.regen_index(spot) >= 0 || w.agent_at(spot) >= 0) spot.x += 1;
    w.relocate_agent(0, spot);
    mask = env.legal_actions(0);
    CHECK(mask[kFirstTradeAction + kPriceLevels + 3] == 1);  // can ask wood
    CHECK(mask[kFirstBuildAction + 0] == 1);                 // can build red
    CHECK(mask[kFirstBuildAction + 1] == 0);                 // blue needs iron
    CHECK(mask[kFirstTradeAction + 10] == 1);                // bid wood at 10
}

TEST_CASE("window padding at the map corner") {
    SimConfig cfg = small_config();
    Environment env(cfg, 9);
    env.world_mutable().relocate_agent(0, {0, 0});
    const AgentObservation obs = env.agent_observation(0);
    const int win = cfg.env.window;
    const int cells = win * win;
    double padded = 0.0;
    for (int i = 0; i < cells; ++i) padded += obs.spatial[static_cast<size_t>(kChanOutOfWorld * cells + i)];
    const int half = win / 2;
    const int visible = (win - half) * (win - half);
    CHECK(padded == cells - visible);
    // the agent sees itself at the window center
    CHECK(obs.spatial[static_cast<size_t>(kChanSelfAgent * cells + (win / 2) * win + win / 2)] ==
          1.0);
}

TEST_CASE("planner observation excludes private skills; agent observation includes them") {
    SimConfig cfg = small_config();
    Environment a(cfg, 12), b(cfg, 12);
    b.world_mutable().agents[2].build_skill = {29.0, 29.0, 29.0};
    CHECK(a.planner_observation().vec == b.planner_observation().vec);
    CHECK(a.planner_observation().spatial == b.planner_observation().spatial);
    CHECK(a.agent_observation(2).vec != b.agent_observation(2).vec);
}

TEST_CASE("full episode with scripted agents: accounting identities") {
    SimConfig cfg = small_config();
    GathererBuilderPolicy agents;
    FixedRatePlanner planner(2);  // 10% everywhere, every year
    EpisodeLog log = run_episode(cfg, 2024, agents, planner);

    CHECK(static_cast<int>(log.snapshots.size()) == cfg.env.horizon);
    CHECK(log.tax_records.size() == static_cast<size_t>(cfg.env.horizon / cfg.fiscal.period));

    SUBCASE("sorted incomes block is non-decreasing") {
        Environment env(cfg, 2024);
        // run one tax year to populate last-year incomes
        GathererBuilderPolicy ag;
        Rng r1(1), r2(2);
        ag.begin_episode(env, r1);
        while (env.step_index() < cfg.fiscal.period) {
            std::optional<PlannerAction> pa;
            if (env.at_year_start()) pa = PlannerAction(kNumBrackets, 2);
            std::vector<int> acts;
            for (int i = 0; i < 5; ++i) acts.push_back(ag.act(env, i, r2));
            env.step(acts, pa);
        }
        const AgentObservation obs = env.agent_observation(0);
        // the sorted block sits just before the final marginal-rate entry
        const size_t end = obs.vec.size() - 1;
        const size_t start = end - 5;
        for (size_t i = start + 1; i < end; ++i) CHECK(obs.vec[i] >= obs.vec[i - 1]);
    }

    SUBCASE("per-year coin change is income minus tax plus return") {
        const int period = cfg.fiscal.period;
        for (const TaxPeriodRecord& rec : log.tax_records) {
            const int year_end = (rec.period + 1) * period - 1;
            for (int i = 0; i < log.n_agents; ++i) {
                const double before =
                    rec.period == 0 ? 0.0
                                    : log.coin[static_cast<size_t>(year_end - period)]
                                              [static_cast<size_t>(i)];
                const double after =
                    log.coin[static_cast<size_t>(year_end)][static_cast<size_t>(i)];
                const double expected = before + rec.pretax_income[static_cast<size_t>(i)] -
                                        rec.tax[static_cast<size_t>(i)] +
                                        rec.tax_return[static_cast<size_t>(i)];
                CHECK(after == doctest::Approx(expected).epsilon(1e-9));
            }
        }
    }

    SUBCASE("reward telescoping for agents and planner") {
        for (int i = 0; i < log.n_agents; ++i) {
            double sum = 0.0;
            for (size_t t = 0; t < log.rewards.size(); ++t)
                sum += log.rewards[t][static_cast<size_t>(i)];
            const double u_final =
                log.snapshots.back().utilities[static_cast<size_t>(i)];
            CHECK(sum + log.initial_utilities[static_cast<size_t>(i)] ==
                  doctest::Approx(u_final).epsilon(1e-9));
        }
        double psum = 0.0;
        for (double r : log.planner_rewards) psum += r;
        const double swf_final = social_welfare(log.objective, log.snapshots.back());
        CHECK(psum + log.initial_swf == doctest::Approx(swf_final).epsilon(1e-9));
    }

    SUBCASE("gatherer-builders earn in a uniform world") {
        CHECK(log.snapshots.back().productivity > 0.0);
    }

    SUBCASE("planner rewards replay from the logged coin and labor series") {
        // independent recomputation of the swf series from raw snapshots
        double prev = log.initial_swf;
        for (size_t t = 0; t < log.snapshots.size(); ++t) {
            WelfareSnapshot s =
                make_snapshot(log.snapshots[t].coins, log.snapshots[t].labors, cfg.metrics);
            const double swf = social_welfare(log.objective, s);
            CHECK(log.planner_rewards[t] == doctest::Approx(swf - prev).epsilon(1e-9));
            prev = swf;
        }
        // the year-end steps carry the post-transfer welfare jump
        bool any_year_end_moved = false;
        for (const TaxPeriodRecord& rec : log.tax_records)
            any_year_end_moved =
                any_year_end_moved ||
                log.planner_rewards[static_cast<size_t>((rec.period + 1) * cfg.fiscal.period - 1)] !=
                    0.0;
        CHECK(any_year_end_moved);
    }

    SUBCASE("labor is non-decreasing for every agent") {
        for (int i = 0; i < log.n_agents; ++i)
            for (size_t t = 1; t < log.labor.size(); ++t)
                CHECK(log.labor[t][static_cast<size_t>(i)] >=
                      log.labor[t - 1][static_cast<size_t>(i)]);
    }
}

TEST_CASE("no-op policies produce a flat coin series") {
    SimConfig cfg = small_config();
    cfg.world.initial_coin = 5.0;
    NoOpPolicy agents;
    ZeroTaxPlanner planner;
    EpisodeLog log = run_episode(cfg, 99, agents, planner);
    for (const auto& per_step : log.coin)
        for (double c : per_step) CHECK(c == 5.0);
    CHECK(log.trades.empty());
    CHECK(static_cast<int>(log.actions.size()) == cfg.env.horizon);
}

TEST_CASE("identical seeds give byte-identical episode logs") {
    namespace fs = std::filesystem;
    const SimConfig cfg = small_config();
    const fs::path tmp = fs::temp_directory_path() / "gtb_env_test";
    fs::remove_all(tmp);

    for (int rep = 0; rep < 2; ++rep) {
        GathererBuilderPolicy agents;
        FixedRatePlanner planner(2);
        EpisodeLog log = run_episode(cfg, 777, agents, planner);
        log.write_csv_dir((tmp / ("rep" + std::to_string(rep))).string());
    }
    for (const char* f :
         {"metrics.csv", "resources.csv", "trades.csv", "taxes.csv", "actions.csv",
          "manifest.json", "layout.txt"}) {
        CHECK(slurp((tmp / "rep0" / f).string()) == slurp((tmp / "rep1" / f).string()));
        CHECK(!slurp((tmp / "rep0" / f).string()).empty());
    }
    fs::remove_all(tmp);
}

TEST_CASE("step contract violations") {
    SimConfig cfg = small_config();
    Environment env(cfg, 5);
    // planner action required at year start
    CHECK_THROWS_AS(env.step(std::vector<int>(5, 0), std::nullopt), ContractError);
    env.step(std::vector<int>(5, 0), PlannerAction(kNumBrackets, 0));
    // and forbidden elsewhere
    CHECK_THROWS_AS(env.step(std::vector<int>(5, 0), PlannerAction(kNumBrackets, 0)),
                    ContractError);
    // wrong action arity and range
    CHECK_THROWS_AS(env.step(std::vector<int>(4, 0), std::nullopt), ContractError);
    CHECK_THROWS_AS(env.step(std::vector<int>(5, 74), std::nullopt), ContractError);
}

TEST_CASE("config validation errors are named") {
    SimConfig bad = small_config();
    bad.env.horizon = 123;  // not divisible by period 50
    CHECK_THROWS_AS(bad.normalized(), ConfigError);
    bad = small_config();
    bad.metrics.eta = 1.0;
    CHECK_THROWS_AS(bad.normalized(), ConfigError);
    bad = small_config();
    bad.fiscal.bracket_cutoffs = {0.0, 5.0, 5.0};
    CHECK_THROWS_AS(bad.normalized(), ConfigError);
}
