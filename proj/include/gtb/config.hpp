#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gtb/types.hpp"

namespace gtb {

enum class SwfKind : uint8_t {
    EqTimesProd = 0,
    InverseIncomeUtilitarian = 1,
    ProductivityOnly = 2,
    EqualityOnly = 3,
};

inline constexpr std::array<SwfKind, 4> kAllSwfKinds{
    SwfKind::EqTimesProd, SwfKind::InverseIncomeUtilitarian,
    SwfKind::ProductivityOnly, SwfKind::EqualityOnly};

const char* name_of(SwfKind k);
SwfKind swf_from_string(const std::string& s);
LayoutKind layout_from_string(const std::string& s);

struct WorldConfig {
    LayoutKind layout = LayoutKind::Uniform;
    int width = 25;
    int height = 25;
    int n_agents = 5;
    /// Regen cell count per resource; -1 selects the per-layout default
    /// (band {40,40,36}, uniform {38,38,36}).
    std::array<int, kNumResources> regen_counts{-1, -1, -1};
    double regen_prob = 0.01;
    int cell_cap = 1;
    double gather_bonus_prob = 0.2;
    double pareto_shape = 4.0;
    double skill_min = 10.0;
    double skill_max = 30.0;
    double initial_coin = 0.0;
};

struct LaborConfig {
    double move = 0.21;
    double gather = 0.21;
    double trade = 0.05;
    double build = 2.1;
};

struct MarketConfig {
    int max_open_per_side = 5;
    int order_lifetime = 50;  // steps until an open order expires
    static constexpr int kPriceLevels = 11;
};

struct FiscalConfig {
    /// Lower cutoff of each bracket, starting at 0; the top bracket is open.
    std::vector<double> bracket_cutoffs{0.0, 9.7, 39.475, 84.2, 160.725, 204.1, 510.3};
    int period = 100;
    bool taxes_enabled = true;
    /// Multiplier applied to planner-chosen rates (training curriculum ramps
    /// this from 0 to 1).
    double tax_rate_scale = 1.0;
};

struct MetricsConfig {
    double eta = 0.23;
    /// Floor substituted for zero coin when forming inverse-income weights.
    double weight_floor = 0.01;
};

struct EnvConfig {
    int horizon = 2000;
    int window = 11;  // egocentric observation side length
    SwfKind objective = SwfKind::EqTimesProd;
};

struct ScriptedConfig {
    /// Idle steps a gatherer-builder waits after each build; paces resource
    /// consumption against regeneration.
    int build_cooldown = 250;
};

struct TrainerConfig {
    int iterations = 60;
    int phase1_iters = 40;   // agents only, taxes disabled
    int anneal_iters = 10;   // tax scale ramp length once the planner starts
    int episodes_per_iter = 2;
    int epochs = 2;
    int minibatch = 256;
    double clip_ratio = 0.2;
    double lr_agent = 3e-4;
    double lr_planner = 1e-4;
    double entropy_coef = 0.1;
    double entropy_decay = 0.5;
    int entropy_decay_every = 100;
    double value_coef = 0.5;
    double gamma = 0.998;
    double max_grad_norm = 0.5;
    int conv_filters = 8;
    int hidden = 64;
    bool recurrent = false;
    int recurrent_state = 32;
    int rollout_threads = 2;
    int checkpoint_every = 0;  // 0 = final checkpoint only
};

/// Full simulation configuration; one of these drives one episode/run.
struct SimConfig {
    WorldConfig world;
    LaborConfig labor;
    MarketConfig market;
    FiscalConfig fiscal;
    MetricsConfig metrics;
    EnvConfig env;
    ScriptedConfig scripted;
    TrainerConfig trainer;

    /// Copy with layout-dependent defaults resolved; throws ConfigError on
    /// any violated constraint, naming it.
    SimConfig normalized() const;
};

SimConfig load_config(const std::string& path);
SimConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const SimConfig& c);
void save_config(const SimConfig& c, const std::string& path);

/// FNV-1a over the canonical JSON dump; stable across runs.
uint64_t config_hash(const SimConfig& c);

}  // namespace gtb
