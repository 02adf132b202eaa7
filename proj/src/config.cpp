#include "gtb/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gtb {

using nlohmann::json;

const char* name_of(SwfKind k) {
    switch (k) {
        case SwfKind::EqTimesProd: return "eqprod";
        case SwfKind::InverseIncomeUtilitarian: return "utilitarian";
        case SwfKind::ProductivityOnly: return "prod";
        case SwfKind::EqualityOnly: return "eq";
    }
    return "?";
}

SwfKind swf_from_string(const std::string& s) {
    for (SwfKind k : kAllSwfKinds)
        if (s == name_of(k)) return k;
    throw ConfigError("unknown planner objective '" + s + "' (expected eqprod|utilitarian|prod|eq)");
}

LayoutKind layout_from_string(const std::string& s) {
    if (s == "band" || s == "band-like" || s == "bandlike") return LayoutKind::BandLike;
    if (s == "uniform") return LayoutKind::Uniform;
    throw ConfigError("unknown layout '" + s + "' (expected band|uniform)");
}

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_world(const json& j, WorldConfig& w) {
    if (j.contains("layout")) w.layout = layout_from_string(j.at("layout").get<std::string>());
    get_if(j, "width", w.width);
    get_if(j, "height", w.height);
    get_if(j, "n_agents", w.n_agents);
    if (j.contains("regen_counts")) {
        const json& rc = j.at("regen_counts");
        w.regen_counts = {rc.value("wood", -1), rc.value("stone", -1), rc.value("iron", -1)};
    }
    get_if(j, "regen_prob", w.regen_prob);
    get_if(j, "cell_cap", w.cell_cap);
    get_if(j, "gather_bonus_prob", w.gather_bonus_prob);
    get_if(j, "pareto_shape", w.pareto_shape);
    get_if(j, "skill_min", w.skill_min);
    get_if(j, "skill_max", w.skill_max);
    get_if(j, "initial_coin", w.initial_coin);
}

json dump_world(const WorldConfig& w) {
    return json{
        {"layout", name_of(w.layout)},
        {"width", w.width},
        {"height", w.height},
        {"n_agents", w.n_agents},
        {"regen_counts",
         {{"wood", w.regen_counts[0]}, {"stone", w.regen_counts[1]}, {"iron", w.regen_counts[2]}}},
        {"regen_prob", w.regen_prob},
        {"cell_cap", w.cell_cap},
        {"gather_bonus_prob", w.gather_bonus_prob},
        {"pareto_shape", w.pareto_shape},
        {"skill_min", w.skill_min},
        {"skill_max", w.skill_max},
        {"initial_coin", w.initial_coin},
    };
}

}  // namespace

SimConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    SimConfig c;
    if (j.contains("world")) parse_world(j.at("world"), c.world);
    if (j.contains("labor")) {
        const json& l = j.at("labor");
        get_if(l, "move", c.labor.move);
        get_if(l, "gather", c.labor.gather);
        get_if(l, "trade", c.labor.trade);
        get_if(l, "build", c.labor.build);
    }
    if (j.contains("market")) {
        const json& m = j.at("market");
        get_if(m, "max_open_per_side", c.market.max_open_per_side);
        get_if(m, "order_lifetime", c.market.order_lifetime);
    }
    if (j.contains("fiscal")) {
        const json& f = j.at("fiscal");
        get_if(f, "bracket_cutoffs", c.fiscal.bracket_cutoffs);
        get_if(f, "period", c.fiscal.period);
        get_if(f, "taxes_enabled", c.fiscal.taxes_enabled);
        get_if(f, "tax_rate_scale", c.fiscal.tax_rate_scale);
    }
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        get_if(m, "eta", c.metrics.eta);
        get_if(m, "weight_floor", c.metrics.weight_floor);
    }
    if (j.contains("env")) {
        const json& e = j.at("env");
        get_if(e, "horizon", c.env.horizon);
        get_if(e, "window", c.env.window);
        if (e.contains("objective")) c.env.objective = swf_from_string(e.at("objective").get<std::string>());
    }
    if (j.contains("scripted")) {
        get_if(j.at("scripted"), "build_cooldown", c.scripted.build_cooldown);
    }
    if (j.contains("trainer")) {
        const json& t = j.at("trainer");
        TrainerConfig& tr = c.trainer;
        get_if(t, "iterations", tr.iterations);
        get_if(t, "phase1_iters", tr.phase1_iters);
        get_if(t, "anneal_iters", tr.anneal_iters);
        get_if(t, "episodes_per_iter", tr.episodes_per_iter);
        get_if(t, "epochs", tr.epochs);
        get_if(t, "minibatch", tr.minibatch);
        get_if(t, "clip_ratio", tr.clip_ratio);
        get_if(t, "lr_agent", tr.lr_agent);
        get_if(t, "lr_planner", tr.lr_planner);
        get_if(t, "entropy_coef", tr.entropy_coef);
        get_if(t, "entropy_decay", tr.entropy_decay);
        get_if(t, "entropy_decay_every", tr.entropy_decay_every);
        get_if(t, "value_coef", tr.value_coef);
        get_if(t, "gamma", tr.gamma);
        get_if(t, "max_grad_norm", tr.max_grad_norm);
        get_if(t, "conv_filters", tr.conv_filters);
        get_if(t, "hidden", tr.hidden);
        get_if(t, "recurrent", tr.recurrent);
        get_if(t, "recurrent_state", tr.recurrent_state);
        get_if(t, "rollout_threads", tr.rollout_threads);
        get_if(t, "checkpoint_every", tr.checkpoint_every);
    }
    return c;
}

SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string config_to_json_text(const SimConfig& c) {
    json j;
    j["world"] = dump_world(c.world);
    j["labor"] = {{"move", c.labor.move},
                  {"gather", c.labor.gather},
                  {"trade", c.labor.trade},
                  {"build", c.labor.build}};
    j["market"] = {{"max_open_per_side", c.market.max_open_per_side},
                   {"order_lifetime", c.market.order_lifetime}};
    j["fiscal"] = {{"bracket_cutoffs", c.fiscal.bracket_cutoffs},
                   {"period", c.fiscal.period},
                   {"taxes_enabled", c.fiscal.taxes_enabled},
                   {"tax_rate_scale", c.fiscal.tax_rate_scale}};
    j["metrics"] = {{"eta", c.metrics.eta}, {"weight_floor", c.metrics.weight_floor}};
    j["env"] = {{"horizon", c.env.horizon},
                {"window", c.env.window},
                {"objective", name_of(c.env.objective)}};
    j["scripted"] = {{"build_cooldown", c.scripted.build_cooldown}};
    const TrainerConfig& tr = c.trainer;
    j["trainer"] = {{"iterations", tr.iterations},
                    {"phase1_iters", tr.phase1_iters},
                    {"anneal_iters", tr.anneal_iters},
                    {"episodes_per_iter", tr.episodes_per_iter},
                    {"epochs", tr.epochs},
                    {"minibatch", tr.minibatch},
                    {"clip_ratio", tr.clip_ratio},
                    {"lr_agent", tr.lr_agent},
                    {"lr_planner", tr.lr_planner},
                    {"entropy_coef", tr.entropy_coef},
                    {"entropy_decay", tr.entropy_decay},
                    {"entropy_decay_every", tr.entropy_decay_every},
                    {"value_coef", tr.value_coef},
                    {"gamma", tr.gamma},
                    {"max_grad_norm", tr.max_grad_norm},
                    {"conv_filters", tr.conv_filters},
                    {"hidden", tr.hidden},
                    {"recurrent", tr.recurrent},
                    {"recurrent_state", tr.recurrent_state},
                    {"rollout_threads", tr.rollout_threads},
                    {"checkpoint_every", tr.checkpoint_every}};
    return j.dump(2);
}

void save_config(const SimConfig& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << config_to_json_text(c) << "\n";
}

SimConfig SimConfig::normalized() const {
    SimConfig c = *this;
    WorldConfig& w = c.world;
    const std::array<int, 3> band_default{40, 40, 36};
    const std::array<int, 3> uniform_default{38, 38, 36};
    for (int k = 0; k < kNumResources; ++k) {
        if (w.regen_counts[k] < 0)
            w.regen_counts[k] =
                (w.layout == LayoutKind::BandLike ? band_default[k] : uniform_default[k]);
    }

    if (w.width < 3 || w.height < 3)
        throw ConfigError("world.width/height must be at least 3");
    if (w.n_agents < 1) throw ConfigError("world.n_agents must be >= 1");
    if (w.regen_prob < 0.0 || w.regen_prob > 1.0)
        throw ConfigError("world.regen_prob must lie in [0,1]");
    if (w.cell_cap < 1) throw ConfigError("world.cell_cap must be >= 1");
    if (w.gather_bonus_prob < 0.0 || w.gather_bonus_prob > 1.0)
        throw ConfigError("world.gather_bonus_prob must lie in [0,1]");
    if (!(w.skill_min > 0.0) || !(w.skill_max >= w.skill_min))
        throw ConfigError("world.skill_min/skill_max must satisfy 0 < min <= max");
    if (!(w.pareto_shape > 0.0)) throw ConfigError("world.pareto_shape must be positive");

    if (c.market.max_open_per_side < 1) throw ConfigError("market.max_open_per_side must be >= 1");
    if (c.market.order_lifetime < 1) throw ConfigError("market.order_lifetime must be >= 1");

    const auto& cuts = c.fiscal.bracket_cutoffs;
    if (cuts.empty() || cuts.front() != 0.0)
        throw ConfigError("fiscal.bracket_cutoffs must start at 0");
    for (size_t i = 1; i < cuts.size(); ++i)
        if (!(cuts[i] > cuts[i - 1]))
            throw ConfigError("fiscal.bracket_cutoffs must be strictly increasing");
    if (c.fiscal.period < 1) throw ConfigError("fiscal.period must be >= 1");
    if (c.fiscal.tax_rate_scale < 0.0 || c.fiscal.tax_rate_scale > 1.0)
        throw ConfigError("fiscal.tax_rate_scale must lie in [0,1]");

    if (!(c.metrics.eta > 0.0) || c.metrics.eta == 1.0)
        throw ConfigError("metrics.eta must be positive and != 1");
    if (!(c.metrics.weight_floor > 0.0))
        throw ConfigError("metrics.weight_floor must be positive");

    if (c.env.horizon < 1) throw ConfigError("env.horizon must be >= 1");
    if (c.env.horizon % c.fiscal.period != 0)
        throw ConfigError("env.horizon must be divisible by fiscal.period");
    if (c.env.window < 3 || c.env.window % 2 == 0)
        throw ConfigError("env.window must be an odd number >= 3");

    const TrainerConfig& tr = c.trainer;
    if (tr.iterations < 0 || tr.phase1_iters < 0 || tr.anneal_iters < 0)
        throw ConfigError("trainer iteration counts must be non-negative");
    if (tr.episodes_per_iter < 1 || tr.epochs < 1 || tr.minibatch < 1)
        throw ConfigError("trainer.episodes_per_iter/epochs/minibatch must be positive");
    if (!(tr.gamma > 0.0) || tr.gamma > 1.0) throw ConfigError("trainer.gamma must lie in (0,1]");
    if (!(tr.clip_ratio > 0.0)) throw ConfigError("trainer.clip_ratio must be positive");

    return c;
}

uint64_t config_hash(const SimConfig& c) {
    const std::string dump = config_to_json_text(c);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace gtb
