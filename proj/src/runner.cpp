#include "gtb/runner.hpp"

#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "gtb/env.hpp"
#include "gtb/policy.hpp"
#include "gtb/trainer.hpp"

namespace gtb {

namespace fs = std::filesystem;
using nlohmann::json;

const char* name_of(PolicyMode m) {
    switch (m) {
        case PolicyMode::Train: return "train";
        case PolicyMode::NoOp: return "noop";
        case PolicyMode::Random: return "random";
        case PolicyMode::GathererBuilder: return "gatherer";
    }
    return "?";
}

PolicyMode policy_mode_from_string(const std::string& s) {
    if (s == "train") return PolicyMode::Train;
    if (s == "noop") return PolicyMode::NoOp;
    if (s == "random") return PolicyMode::Random;
    if (s == "gatherer" || s == "gatherer-builder") return PolicyMode::GathererBuilder;
    throw ConfigError("unknown policy mode '" + s + "' (expected train|noop|random|gatherer)");
}

void cmd_run(const RunSpec& spec) {
    SimConfig cfg = spec.config;
    cfg.world.layout = spec.scenario;
    cfg.env.objective = spec.objective;
    cfg = cfg.normalized();

    fs::create_directories(spec.out_dir);
    save_config(cfg, spec.out_dir + "/config.json");

    EpisodeLog log;
    bool trained = false;
    if (spec.policy == PolicyMode::Train) {
        PolicyBundle bundle = [&] {
            if (!spec.checkpoint.empty()) return PolicyBundle::load(spec.checkpoint);
            TrainResult tr = train(cfg, spec.seed, spec.out_dir);
            trained = true;
            return std::move(tr.bundle);
        }();
        NeuralAgentPolicy agents(*bundle.agent, !spec.stochastic_eval);
        NeuralPlannerPolicy planner(*bundle.planner, !spec.stochastic_eval);
        log = run_episode(cfg, derive_seed(spec.seed, 0xE0A1), agents, planner);
    } else {
        std::unique_ptr<IAgentPolicy> agents;
        switch (spec.policy) {
            case PolicyMode::NoOp: agents = scripted_policy(ScriptedKind::NoOp); break;
            case PolicyMode::Random: agents = scripted_policy(ScriptedKind::Random); break;
            default: agents = scripted_policy(ScriptedKind::GathererBuilder); break;
        }
        FixedRatePlanner planner(spec.scripted_rate_setting);
        log = run_episode(cfg, derive_seed(spec.seed, 0xE0A1), *agents, planner);
    }

    log.write_csv_dir(spec.out_dir);

    json run_info;
    run_info["policy"] = name_of(spec.policy);
    run_info["environment"] = name_of(spec.scenario);
    run_info["objective"] = name_of(spec.objective);
    run_info["seed"] = spec.seed;
    run_info["trained"] = trained;
    run_info["checkpoint"] = spec.checkpoint;
    run_info["stochastic_eval"] = spec.stochastic_eval;
    if (spec.grid_cell >= 0) run_info["grid_cell"] = spec.grid_cell;
    std::ofstream out(spec.out_dir + "/run.json");
    out << run_info.dump(2) << "\n";
}

bool GridResult::all_ok() const {
    for (const GridCell& c : cells)
        if (!c.ok) return false;
    return true;
}

std::vector<std::string> GridResult::run_dirs() const {
    std::vector<std::string> dirs;
    for (const GridCell& c : cells)
        if (c.ok) dirs.push_back(c.dir);
    return dirs;
}

GridResult cmd_grid(const SimConfig& base, uint64_t root_seed, const std::string& out_dir,
                    PolicyMode policy, const std::string& cell_filter, int parallel) {
    GridResult result;
    int index = 0;
    for (LayoutKind env : {LayoutKind::BandLike, LayoutKind::Uniform}) {
        for (SwfKind obj : kAllSwfKinds) {
            GridCell cell;
            cell.index = index;
            cell.scenario = env;
            cell.objective = obj;
            cell.seed = derive_seed(root_seed, 1000 + static_cast<uint64_t>(index));
            cell.dir = out_dir + "/" + name_of(env) + "_" + name_of(obj);
            ++index;
            const std::string token = std::string(name_of(env)) + "x" + name_of(obj);
            if (!cell_filter.empty() && cell_filter != token) continue;
            result.cells.push_back(cell);
        }
    }
    require(!result.cells.empty(), "grid: cell filter matched nothing");

    auto run_cell = [&](GridCell& cell) {
        try {
            RunSpec spec;
            spec.config = base;
            spec.scenario = cell.scenario;
            spec.objective = cell.objective;
            spec.seed = cell.seed;
            spec.out_dir = cell.dir;
            spec.policy = policy;
            spec.grid_cell = cell.index;
            cmd_run(spec);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    };

    const int workers = std::max(1, std::min<int>(parallel, static_cast<int>(result.cells.size())));
    if (workers == 1) {
        for (GridCell& c : result.cells) run_cell(c);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (size_t i = static_cast<size_t>(w); i < result.cells.size();
                     i += static_cast<size_t>(workers))
                    run_cell(result.cells[i]);
            });
        }
        for (auto& t : pool) t.join();
    }

    fs::create_directories(out_dir);
    json manifest;
    manifest["root_seed"] = root_seed;
    manifest["policy"] = name_of(policy);
    manifest["cells"] = json::array();
    for (const GridCell& c : result.cells) {
        manifest["cells"].push_back({{"index", c.index},
                                     {"environment", name_of(c.scenario)},
                                     {"objective", name_of(c.objective)},
                                     {"seed", c.seed},
                                     {"dir", c.dir},
                                     {"ok", c.ok},
                                     {"error", c.error}});
    }
    std::ofstream out(out_dir + "/grid.json");
    out << manifest.dump(2) << "\n";
    return result;
}

void cmd_layout_dump(const SimConfig& config, uint64_t seed, const std::string& path) {
    const SimConfig cfg = config.normalized();
    const WorldLayout layout = generate_layout(cfg.world, seed);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write layout dump: " + path);
    out << layout_to_text(layout);
}

}  // namespace gtb
