#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/rng.hpp"
#include "gtb/types.hpp"

namespace gtb {

struct WorldLayout {
    int width = 0;
    int height = 0;
    LayoutKind kind = LayoutKind::Uniform;
    std::vector<Coord> water_cells;
    /// Regen cells in a fixed (sorted) order; index into this vector is the
    /// cell's identity for resource bookkeeping.
    std::vector<std::pair<Coord, ResourceKind>> regen_cells;
    std::vector<Coord> spawn_points;  // one per agent

    bool in_bounds(Coord c) const {
        return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
    }
};

struct AgentState {
    int id = 0;
    Coord location;
    std::array<int, kNumResources> inventory{};
    std::array<int, kNumResources> escrow{};  // units committed to open asks
    double coin = 0.0;                        // freely spendable coin
    double escrow_coin = 0.0;                 // coin committed to open bids
    double labor = 0.0;
    std::array<double, kNumHouseTypes> build_skill{};
    double gather_bonus_prob = 0.0;

    /// Coin endowment including amounts locked in open orders; the quantity
    /// taxes, utility, and the welfare metrics are defined over.
    double total_coin() const { return coin + escrow_coin; }
};

struct House {
    int owner = -1;
    HouseType type = HouseType::Red;
};

struct WorldState {
    WorldLayout layout;
    std::vector<AgentState> agents;
    std::map<Coord, House> houses;  // ordered map keeps iteration deterministic
    /// Units currently on each regen cell, parallel to layout.regen_cells;
    /// resources exist nowhere else.
    std::vector<int> resource_units;
    int step = 0;

    // spawn ledger, for conservation audits: regen spawns plus gather bonuses
    std::array<int64_t, kNumResources> spawned_units{};
    std::array<int64_t, kNumResources> consumed_units{};  // by building

    int agent_at(Coord c) const;          // -1 if none
    int regen_index(Coord c) const;       // -1 if not a regen cell
    bool is_water(Coord c) const;
    const House* house_at(Coord c) const;

    void rebuild_lookup();
    void relocate_agent(int id, Coord to);

  private:
    // flat lookup grids, maintained by the mutation ops
    std::vector<int16_t> agent_grid_;
    std::vector<int32_t> regen_grid_;
    std::vector<uint8_t> water_grid_;
    size_t idx(Coord c) const { return static_cast<size_t>(c.y) * layout.width + c.x; }
};

/// Deterministic function of (config, seed).
WorldLayout generate_layout(const WorldConfig& config, uint64_t seed);

/// Initial world: agents on their spawn points with Pareto-drawn build
/// skills, every regen cell filled to cap.
WorldState make_world(const WorldConfig& config, uint64_t seed);

struct MoveOutcome {
    bool moved = false;
    int gathered = 0;  // units received (includes any bonus unit)
};

/// Moves one cell unless blocked by water, the edge, another agent, or
/// another agent's house. Move labor accrues even when blocked. Arriving on a
/// populated regen cell gathers one unit plus a possible bonus unit.
MoveOutcome step_move(WorldState& world, int agent_id, Direction dir, Rng& rng,
                      const LaborConfig& labor);

/// Each regen cell below cap independently gains one unit with probability
/// regen_prob.
void regen_resources(WorldState& world, Rng& rng, double regen_prob, int cell_cap);

struct BuildOutcome {
    bool built = false;
    double income = 0.0;
};

/// Consumes the recipe, places the house at the agent's location, credits
/// coin equal to build skill. Rejected (no state change) when materials are
/// missing or the cell is a regen cell / already has a house.
BuildOutcome build_house(WorldState& world, int agent_id, HouseType house,
                         const LaborConfig& labor);

std::array<int, kNumResources> resource_totals(const WorldState& world);

/// One character per cell: W water, w/s/i regen kind, . empty.
std::string layout_to_text(const WorldLayout& layout);

/// Cells reachable by 4-neighbour movement over non-water cells.
std::vector<uint8_t> reachable_from(const WorldLayout& layout, Coord start);

}  // namespace gtb
