#include "gtb/world.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace gtb {

// ---------------------------------------------------------------------------
// WorldState lookups
// ---------------------------------------------------------------------------

void WorldState::rebuild_lookup() {
    const size_t n = static_cast<size_t>(layout.width) * layout.height;
    agent_grid_.assign(n, -1);
    regen_grid_.assign(n, -1);
    water_grid_.assign(n, 0);
    for (const Coord& c : layout.water_cells) water_grid_[idx(c)] = 1;
    for (size_t i = 0; i < layout.regen_cells.size(); ++i)
        regen_grid_[idx(layout.regen_cells[i].first)] = static_cast<int32_t>(i);
    for (const AgentState& a : agents) agent_grid_[idx(a.location)] = static_cast<int16_t>(a.id);
}

int WorldState::agent_at(Coord c) const {
    if (!layout.in_bounds(c)) return -1;
    return agent_grid_[idx(c)];
}

int WorldState::regen_index(Coord c) const {
    if (!layout.in_bounds(c)) return -1;
    return regen_grid_[idx(c)];
}

bool WorldState::is_water(Coord c) const {
    if (!layout.in_bounds(c)) return false;
    return water_grid_[idx(c)] != 0;
}

const House* WorldState::house_at(Coord c) const {
    auto it = houses.find(c);
    return it == houses.end() ? nullptr : &it->second;
}

void WorldState::relocate_agent(int id, Coord to) {
    AgentState& a = agents[static_cast<size_t>(id)];
    agent_grid_[idx(a.location)] = -1;
    agent_grid_[idx(to)] = static_cast<int16_t>(id);
    a.location = to;
}

// ---------------------------------------------------------------------------
// Layout generation
// ---------------------------------------------------------------------------

namespace {

struct CellSet {
    std::vector<uint8_t> taken;
    int width;
    explicit CellSet(int w, int h) : taken(static_cast<size_t>(w) * h, 0), width(w) {}
    bool occupied(Coord c) const { return taken[static_cast<size_t>(c.y) * width + c.x] != 0; }
    void mark(Coord c) { taken[static_cast<size_t>(c.y) * width + c.x] = 1; }
};

// Deterministic scan for a free cell within a column range, starting at the
// preferred coordinate and wrapping.
Coord probe_free(const CellSet& used, int x_lo, int x_hi, Coord preferred, int height) {
    const int span = (x_hi - x_lo + 1) * height;
    const int start = (preferred.x - x_lo) * height + preferred.y;
    for (int off = 0; off < span; ++off) {
        int i = (start + off) % span;
        Coord c{x_lo + i / height, i % height};
        if (!used.occupied(c)) return c;
    }
    throw ConfigError("no free cell left while placing spawn points");
}

WorldLayout generate_band(const WorldConfig& cfg, Rng& rng) {
    WorldLayout lay;
    lay.width = cfg.width;
    lay.height = cfg.height;
    lay.kind = LayoutKind::BandLike;

    if (cfg.width < 5)
        throw ConfigError("band layout needs width >= 5 for three stripes and two water columns");

    const int usable = cfg.width - 2;
    std::array<int, 3> stripe_w;
    for (int s = 0; s < 3; ++s) stripe_w[s] = usable / 3 + (s < usable % 3 ? 1 : 0);
    // stripe s spans columns [lo[s], hi[s]]; a full-height water column follows
    // stripes 0 and 1, which is what isolates them
    std::array<int, 3> lo, hi;
    lo[0] = 0;
    hi[0] = stripe_w[0] - 1;
    lo[1] = hi[0] + 2;
    hi[1] = lo[1] + stripe_w[1] - 1;
    lo[2] = hi[1] + 2;
    hi[2] = cfg.width - 1;

    for (int y = 0; y < cfg.height; ++y) {
        lay.water_cells.push_back({hi[0] + 1, y});
        lay.water_cells.push_back({hi[1] + 1, y});
    }
    std::sort(lay.water_cells.begin(), lay.water_cells.end());

    CellSet used(cfg.width, cfg.height);
    for (const Coord& c : lay.water_cells) used.mark(c);

    // agents round-robin across stripes
    for (int i = 0; i < cfg.n_agents; ++i) {
        int s = i % 3;
        int k = i / 3;
        int col = (lo[s] + hi[s]) / 2;
        int row = (cfg.height / 2 + 2 * k) % cfg.height;
        Coord c = probe_free(used, lo[s], hi[s], {col, row}, cfg.height);
        used.mark(c);
        lay.spawn_points.push_back(c);
    }

    for (int s = 0; s < 3; ++s) {
        std::vector<Coord> candidates;
        for (int x = lo[s]; x <= hi[s]; ++x)
            for (int y = 0; y < cfg.height; ++y)
                if (!used.occupied({x, y})) candidates.push_back({x, y});
        const int want = cfg.regen_counts[static_cast<size_t>(s)];
        if (static_cast<int>(candidates.size()) < want) {
            std::ostringstream msg;
            msg << "stripe for " << name_of(static_cast<ResourceKind>(s)) << " has "
                << candidates.size() << " free cells but regen count " << want
                << " was requested (grid too small)";
            throw ConfigError(msg.str());
        }
        rng.shuffle(candidates);
        for (int i = 0; i < want; ++i) {
            used.mark(candidates[static_cast<size_t>(i)]);
            lay.regen_cells.push_back({candidates[static_cast<size_t>(i)],
                                       static_cast<ResourceKind>(s)});
        }
    }
    std::sort(lay.regen_cells.begin(), lay.regen_cells.end());
    return lay;
}

WorldLayout generate_uniform(const WorldConfig& cfg, Rng& rng) {
    WorldLayout lay;
    lay.width = cfg.width;
    lay.height = cfg.height;
    lay.kind = LayoutKind::Uniform;

    CellSet used(cfg.width, cfg.height);

    // agents on a centered ring
    const double cx = (cfg.width - 1) / 2.0;
    const double cy = (cfg.height - 1) / 2.0;
    const double radius = std::max(1.0, std::min(cfg.width, cfg.height) / 4.0);
    for (int i = 0; i < cfg.n_agents; ++i) {
        double ang = 2.0 * 3.14159265358979323846 * i / cfg.n_agents;
        int x = std::clamp(static_cast<int>(std::lround(cx + radius * std::cos(ang))), 0,
                           cfg.width - 1);
        int y = std::clamp(static_cast<int>(std::lround(cy + radius * std::sin(ang))), 0,
                           cfg.height - 1);
        Coord c = probe_free(used, 0, cfg.width - 1, {x, y}, cfg.height);
        used.mark(c);
        lay.spawn_points.push_back(c);
    }

    std::vector<Coord> candidates;
    for (int x = 0; x < cfg.width; ++x)
        for (int y = 0; y < cfg.height; ++y)
            if (!used.occupied({x, y})) candidates.push_back({x, y});
    rng.shuffle(candidates);

    std::array<int, kNumResources> remaining = cfg.regen_counts;
    int total_needed = remaining[0] + remaining[1] + remaining[2];
    if (static_cast<int>(candidates.size()) < total_needed) {
        std::ostringstream msg;
        msg << "grid has " << candidates.size() << " free cells but " << total_needed
            << " regen cells were requested (grid too small)";
        throw ConfigError(msg.str());
    }

    // assignment avoids forcing two same-kind cells adjacent where possible
    std::map<Coord, ResourceKind> assigned;
    auto same_kind_neighbor = [&](Coord c, int k) {
        for (Direction d : kAllDirections) {
            auto it = assigned.find(neighbor(c, d));
            if (it != assigned.end() && it->second == static_cast<ResourceKind>(k)) return true;
        }
        return false;
    };
    size_t ci = 0;
    while (total_needed > 0 && ci < candidates.size()) {
        Coord c = candidates[ci++];
        int pick = -1;
        for (int pass = 0; pass < 2 && pick < 0; ++pass) {
            int best = -1;
            for (int k = 0; k < kNumResources; ++k) {
                if (remaining[static_cast<size_t>(k)] <= 0) continue;
                if (pass == 0 && same_kind_neighbor(c, k)) continue;
                if (best < 0 || remaining[static_cast<size_t>(k)] > remaining[static_cast<size_t>(best)])
                    best = k;
            }
            pick = best;
        }
        assigned[c] = static_cast<ResourceKind>(pick);
        --remaining[static_cast<size_t>(pick)];
        --total_needed;
    }

    for (const auto& [c, k] : assigned) lay.regen_cells.push_back({c, k});
    std::sort(lay.regen_cells.begin(), lay.regen_cells.end());
    return lay;
}

}  // namespace

WorldLayout generate_layout(const WorldConfig& config, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x10));
    return config.layout == LayoutKind::BandLike ? generate_band(config, rng)
                                                 : generate_uniform(config, rng);
}

WorldState make_world(const WorldConfig& config, uint64_t seed) {
    WorldState ws;
    ws.layout = generate_layout(config, seed);
    Rng skill_rng(derive_seed(seed, 0x11));
    ws.agents.resize(static_cast<size_t>(config.n_agents));
    for (int i = 0; i < config.n_agents; ++i) {
        AgentState& a = ws.agents[static_cast<size_t>(i)];
        a.id = i;
        a.location = ws.layout.spawn_points[static_cast<size_t>(i)];
        a.coin = config.initial_coin;
        a.gather_bonus_prob = config.gather_bonus_prob;
        for (int h = 0; h < kNumHouseTypes; ++h)
            a.build_skill[static_cast<size_t>(h)] =
                skill_rng.pareto_clipped(config.skill_min, config.pareto_shape, config.skill_max);
    }
    ws.resource_units.assign(ws.layout.regen_cells.size(), config.cell_cap);
    ws.rebuild_lookup();
    return ws;
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

MoveOutcome step_move(WorldState& world, int agent_id, Direction dir, Rng& rng,
                      const LaborConfig& labor) {
    require(agent_id >= 0 && agent_id < static_cast<int>(world.agents.size()),
            "step_move: invalid agent id");
    AgentState& a = world.agents[static_cast<size_t>(agent_id)];
    a.labor += labor.move;  // an attempted move is labor, blocked or not

    Coord to = neighbor(a.location, dir);
    const House* h = world.house_at(to);
    bool blocked = !world.layout.in_bounds(to) || world.is_water(to) ||
                   world.agent_at(to) >= 0 || (h != nullptr && h->owner != agent_id);
    if (blocked) return {};

    world.relocate_agent(agent_id, to);
    MoveOutcome out;
    out.moved = true;

    int ri = world.regen_index(to);
    if (ri >= 0 && world.resource_units[static_cast<size_t>(ri)] > 0) {
        ResourceKind kind = world.layout.regen_cells[static_cast<size_t>(ri)].second;
        world.resource_units[static_cast<size_t>(ri)] -= 1;
        a.inventory[static_cast<size_t>(kind)] += 1;
        out.gathered = 1;
        if (rng.bernoulli(a.gather_bonus_prob)) {
            // the bonus unit enters the economy from outside the map stock,
            // so it is booked as a spawn
            a.inventory[static_cast<size_t>(kind)] += 1;
            world.spawned_units[static_cast<size_t>(kind)] += 1;
            out.gathered = 2;
        }
        a.labor += labor.gather;
    }
    return out;
}

void regen_resources(WorldState& world, Rng& rng, double regen_prob, int cell_cap) {
    for (size_t i = 0; i < world.layout.regen_cells.size(); ++i) {
        if (world.resource_units[i] >= cell_cap) continue;
        if (rng.bernoulli(regen_prob)) {
            world.resource_units[i] += 1;
            ResourceKind kind = world.layout.regen_cells[i].second;
            world.spawned_units[static_cast<size_t>(kind)] += 1;
        }
    }
}

BuildOutcome build_house(WorldState& world, int agent_id, HouseType house,
                         const LaborConfig& labor) {
    require(agent_id >= 0 && agent_id < static_cast<int>(world.agents.size()),
            "build_house: invalid agent id");
    AgentState& a = world.agents[static_cast<size_t>(agent_id)];
    const auto rec = recipe(house);
    for (ResourceKind k : rec)
        if (a.inventory[static_cast<size_t>(k)] < 1) return {};  // rejected, no state change
    Coord c = a.location;
    if (world.house_at(c) != nullptr || world.regen_index(c) >= 0) return {};

    for (ResourceKind k : rec) {
        a.inventory[static_cast<size_t>(k)] -= 1;
        world.consumed_units[static_cast<size_t>(k)] += 1;
    }
    world.houses[c] = House{agent_id, house};
    double income = a.build_skill[static_cast<size_t>(house)];
    a.coin += income;
    a.labor += labor.build;
    return {true, income};
}

std::array<int, kNumResources> resource_totals(const WorldState& world) {
    std::array<int, kNumResources> totals{};
    for (size_t i = 0; i < world.layout.regen_cells.size(); ++i)
        totals[static_cast<size_t>(world.layout.regen_cells[i].second)] += world.resource_units[i];
    return totals;
}

std::string layout_to_text(const WorldLayout& layout) {
    std::vector<std::string> rows(static_cast<size_t>(layout.height),
                                  std::string(static_cast<size_t>(layout.width), '.'));
    for (const Coord& c : layout.water_cells) rows[static_cast<size_t>(c.y)][static_cast<size_t>(c.x)] = 'W';
    for (const auto& [c, k] : layout.regen_cells) {
        char ch = k == ResourceKind::Wood ? 'w' : (k == ResourceKind::Stone ? 's' : 'i');
        rows[static_cast<size_t>(c.y)][static_cast<size_t>(c.x)] = ch;
    }
    std::string out;
    for (const std::string& r : rows) {
        out += r;
        out += '\n';
    }
    return out;
}

std::vector<uint8_t> reachable_from(const WorldLayout& layout, Coord start) {
    const size_t n = static_cast<size_t>(layout.width) * layout.height;
    std::vector<uint8_t> water(n, 0), seen(n, 0);
    for (const Coord& c : layout.water_cells)
        water[static_cast<size_t>(c.y) * layout.width + c.x] = 1;
    auto at = [&](Coord c) { return static_cast<size_t>(c.y) * layout.width + c.x; };
    if (!layout.in_bounds(start) || water[at(start)]) return seen;
    std::deque<Coord> frontier{start};
    seen[at(start)] = 1;
    while (!frontier.empty()) {
        Coord c = frontier.front();
        frontier.pop_front();
        for (Direction d : kAllDirections) {
            Coord nb = neighbor(c, d);
            if (!layout.in_bounds(nb) || water[at(nb)] || seen[at(nb)]) continue;
            seen[at(nb)] = 1;
            frontier.push_back(nb);
        }
    }
    return seen;
}

}  // namespace gtb
