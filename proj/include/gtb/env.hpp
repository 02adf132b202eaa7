#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/fiscal.hpp"
#include "gtb/market.hpp"
#include "gtb/metrics.hpp"
#include "gtb/rng.hpp"
#include "gtb/types.hpp"
#include "gtb/world.hpp"

namespace gtb {

// ---------------------------------------------------------------------------
// Action space: 1 no-op + 4 moves + 66 trades + 3 builds = 74
// ---------------------------------------------------------------------------

inline constexpr int kNumAgentActions = 74;
inline constexpr int kFirstMoveAction = 1;
inline constexpr int kFirstTradeAction = 5;
inline constexpr int kFirstBuildAction = 71;

enum class AgentActionKind : uint8_t { Noop, Move, Trade, Build };

struct AgentAction {
    AgentActionKind kind = AgentActionKind::Noop;
    Direction dir = Direction::Up;           // Move
    ResourceKind resource = ResourceKind::Wood;  // Trade
    Side side = Side::Bid;                   // Trade
    int price = 0;                           // Trade
    HouseType house = HouseType::Red;        // Build
};

AgentAction decode_agent_action(int index);
int encode_agent_action(const AgentAction& a);

/// Planner action: one of 22 settings per bracket (21 rate levels plus
/// "keep"); see fiscal set_rates for the decoding.
using PlannerAction = std::vector<int>;

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// Channel order of the spatial blocks. Planner maps use the same layout with
/// the viewer-relative channels left at zero.
enum ObsChannel : int {
    kChanOutOfWorld = 0,
    kChanWater,
    kChanUnitsWood,
    kChanUnitsStone,
    kChanUnitsIron,
    kChanRegenWood,
    kChanRegenStone,
    kChanRegenIron,
    kChanSelfAgent,
    kChanOtherAgent,
    kChanOwnHouse,
    kChanOtherHouse,
    kNumObsChannels
};

struct AgentObservation {
    std::vector<double> spatial;  // channels x window x window, channel-major
    std::vector<double> vec;
    int window = 0;
    int channels = kNumObsChannels;
};

struct PlannerObservation {
    std::vector<double> spatial;  // channels x height x width, channel-major
    std::vector<double> vec;
    int width = 0;
    int height = 0;
    int channels = kNumObsChannels;
};

int agent_vec_size(int n_agents);
int planner_vec_size(int n_agents);

// ---------------------------------------------------------------------------
// Episode log
// ---------------------------------------------------------------------------

struct EpisodeLog {
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    int horizon = 0;
    int n_agents = 0;
    int period = 0;
    LayoutKind layout = LayoutKind::Uniform;
    SwfKind objective = SwfKind::EqTimesProd;

    std::vector<WelfareSnapshot> snapshots;                    // one per step
    std::vector<std::array<int, kNumResources>> resource_series;
    std::vector<TaxPeriodRecord> tax_records;
    std::vector<Trade> trades;
    std::vector<std::vector<int>> actions;      // [step][agent]
    std::vector<std::vector<double>> labor;     // [step][agent]
    std::vector<std::vector<double>> coin;      // [step][agent], incl. escrow
    std::vector<std::vector<double>> rewards;   // [step][agent]
    std::vector<double> planner_rewards;        // [step]

    std::vector<double> initial_utilities;
    double initial_swf = 0.0;
    std::array<int, kNumResources> initial_resources{};
    int utility_floor_hits = 0;
    std::string layout_text;

    /// Writes metrics.csv, resources.csv, trades.csv, taxes.csv, actions.csv
    /// and manifest.json into dir (created if missing).
    void write_csv_dir(const std::string& dir) const;
};

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

struct StepResult {
    std::vector<double> agent_rewards;
    double planner_reward = 0.0;
    bool done = false;
};

/// One episode of the gather-trade-build economy. Sub-step order within
/// step(): planner rate setting (year start) -> agent actions in randomized
/// order -> order expiry -> resource regen -> tax collection (year end) ->
/// metric snapshot. Rewards are utility / social-welfare deltas.
class Environment {
  public:
    Environment(const SimConfig& config, uint64_t seed);

    StepResult step(const std::vector<int>& agent_actions,
                    const std::optional<PlannerAction>& planner_action);

    AgentObservation agent_observation(int agent_id) const;
    PlannerObservation planner_observation() const;
    /// Advisory per-action legality: moves that would be blocked, trades the
    /// market would reject, and builds that would be rejected are 0.
    std::vector<uint8_t> legal_actions(int agent_id) const;

    bool done() const { return world_.step >= cfg_.env.horizon; }
    bool at_year_start() const { return world_.step % cfg_.fiscal.period == 0; }
    int step_index() const { return world_.step; }

    const SimConfig& config() const { return cfg_; }
    const WorldState& world() const { return world_; }
    WorldState& world_mutable() { return world_; }
    const OrderBook& book() const { return book_; }
    const TaxSchedule& schedule() const { return schedule_; }
    const EpisodeLog& log() const { return log_; }
    EpisodeLog take_log();

  private:
    SimConfig cfg_;
    uint64_t seed_;
    WorldState world_;
    OrderBook book_;
    TaxSchedule schedule_;
    Rng env_rng_;
    std::vector<double> year_baseline_;
    std::vector<double> prev_utils_;
    double prev_swf_ = 0.0;
    std::vector<double> last_year_incomes_;         // per agent
    std::vector<double> last_year_sorted_incomes_;  // anonymized
    std::vector<double> last_year_marginal_rates_;  // per agent
    int periods_done_ = 0;
    EpisodeLog log_;

    void apply_agent_action(int agent_id, const AgentAction& a);
    void snapshot_and_reward(StepResult& result);
};

// ---------------------------------------------------------------------------
// Policies (implementations live in the learning module)
// ---------------------------------------------------------------------------

class IAgentPolicy {
  public:
    virtual ~IAgentPolicy() = default;
    virtual void begin_episode(const Environment&, Rng&) {}
    virtual int act(const Environment& env, int agent_id, Rng& rng) = 0;
};

class IPlannerPolicy {
  public:
    virtual ~IPlannerPolicy() = default;
    virtual void begin_episode(const Environment&, Rng&) {}
    virtual PlannerAction act(const Environment& env, Rng& rng) = 0;
};

/// Runs one full episode under the given policies. Deterministic given
/// (config, seed) and deterministic policies.
EpisodeLog run_episode(const SimConfig& config, uint64_t seed, IAgentPolicy& agents,
                       IPlannerPolicy& planner);

}  // namespace gtb
