#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/env.hpp"
#include "gtb/nn.hpp"

namespace gtb {

// ---------------------------------------------------------------------------
// Policy networks
// ---------------------------------------------------------------------------

struct AgentNetSizes {
    int window = 11;
    int channels = kNumObsChannels;
    int vec_dim = 0;
    int conv_filters = 8;
    int hidden = 64;
    int actions = kNumAgentActions;
    bool recurrent = false;
    int recurrent_state = 32;
};

/// Shared agent policy: conv stack over the egocentric window, dense over the
/// vector block, joint trunk, categorical policy head and value head. With
/// recurrence on, an Elman-style cell sits between trunk and heads; the
/// incoming hidden state is treated as an input (no backprop through time).
class AgentNet {
  public:
    AgentNet(const AgentNetSizes& sizes, Rng& rng);

    struct Out {
        Mat logits;       // actions x batch
        Vec value;        // batch
        Mat hidden_next;  // recurrent_state x batch (empty when not recurrent)
    };
    /// `hidden` may be empty when the net is not recurrent.
    Out forward(const Mat& spatial, const Mat& vec, const Mat& hidden);
    void backward(const Mat& dlogits, const Vec& dvalue);
    std::vector<Tensor*> params();

    const AgentNetSizes& sizes() const { return sizes_; }

  private:
    AgentNetSizes sizes_;
    Conv2d conv_;
    Relu conv_relu_;
    Dense fc_vec_;
    Relu vec_relu_;
    Dense trunk_;
    Relu trunk_relu_;
    Dense rec_;  // recurrent cell (if enabled)
    Tanh rec_tanh_;
    Dense pi_;
    Dense value_;

    int spatial_feat_ = 0;
    Eigen::Index last_batch_ = 0;
};

struct PlannerNetSizes {
    int map_w = 25;
    int map_h = 25;
    int channels = kNumObsChannels;
    int vec_dim = 0;
    int conv_filters = 8;
    int hidden = 64;
    int brackets = kNumBrackets;
    int settings = kNumRateSettings;
};

/// Planner policy: one categorical head per tax bracket over the 22 settings.
class PlannerNet {
  public:
    PlannerNet(const PlannerNetSizes& sizes, Rng& rng);

    struct Out {
        Mat logits;  // (brackets*settings) x batch, bracket-major
        Vec value;   // batch
    };
    Out forward(const Mat& spatial, const Mat& vec);
    void backward(const Mat& dlogits, const Vec& dvalue);
    std::vector<Tensor*> params();

    const PlannerNetSizes& sizes() const { return sizes_; }

  private:
    PlannerNetSizes sizes_;
    Conv2d conv_;
    Relu conv_relu_;
    Dense fc_vec_;
    Relu vec_relu_;
    Dense trunk_;
    Relu trunk_relu_;
    Dense pi_;
    Dense value_;
};

/// Shared agent policy, planner policy, and their optimizer state.
struct PolicyBundle {
    std::unique_ptr<AgentNet> agent;
    std::unique_ptr<PlannerNet> planner;
    Adam agent_opt;
    Adam planner_opt;

    static PolicyBundle make(const SimConfig& cfg, uint64_t seed);

    void save(const std::string& path) const;
    static PolicyBundle load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Observation <-> matrix helpers
// ---------------------------------------------------------------------------

Mat obs_to_col(const std::vector<double>& data);

struct AgentDecision {
    int action = 0;
    double logprob = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    std::vector<double> hidden_next;
};

/// One-sample act for rollouts and evaluation.
AgentDecision agent_act(AgentNet& net, const AgentObservation& obs,
                        const std::vector<uint8_t>& mask, const std::vector<double>& hidden,
                        bool greedy, Rng& rng);

struct PlannerDecision {
    PlannerAction settings;
    double logprob = 0.0;
    double value = 0.0;
    double entropy = 0.0;
};

PlannerDecision planner_act(PlannerNet& net, const PlannerObservation& obs, bool greedy, Rng& rng);

// ---------------------------------------------------------------------------
// Scripted policies
// ---------------------------------------------------------------------------

enum class ScriptedKind : uint8_t { NoOp, Random, GathererBuilder };

class NoOpPolicy final : public IAgentPolicy {
  public:
    int act(const Environment&, int, Rng&) override { return 0; }
};

/// Uniform over the legal-action mask (or over all 74 actions with the mask
/// disabled).
class RandomAgentPolicy final : public IAgentPolicy {
  public:
    explicit RandomAgentPolicy(bool use_mask = true) : use_mask_(use_mask) {}
    int act(const Environment& env, int agent_id, Rng& rng) override;

  private:
    bool use_mask_;
};

/// Moves toward the nearest reachable cell holding a resource its best-skill
/// house still needs, builds that house on the first legal cell, then rests
/// for a configured cooldown. Never trades.
class GathererBuilderPolicy final : public IAgentPolicy {
  public:
    explicit GathererBuilderPolicy(int build_cooldown = -1) : cooldown_cfg_(build_cooldown) {}

    void begin_episode(const Environment& env, Rng& rng) override;
    int act(const Environment& env, int agent_id, Rng& rng) override;

  private:
    int cooldown_cfg_;
    std::vector<int> cooldown_;
    std::vector<HouseType> target_;
    std::vector<std::vector<uint8_t>> reachable_;  // per agent, from spawn

    int move_toward(const Environment& env, int agent_id, Coord goal) const;
};

std::unique_ptr<IAgentPolicy> scripted_policy(ScriptedKind kind, int build_cooldown = -1);

class ZeroTaxPlanner final : public IPlannerPolicy {
  public:
    PlannerAction act(const Environment&, Rng&) override {
        return PlannerAction(kNumBrackets, 0);
    }
};

/// Applies the same rate setting to every bracket each year.
class FixedRatePlanner final : public IPlannerPolicy {
  public:
    explicit FixedRatePlanner(int setting) : settings_(kNumBrackets, setting) {}
    explicit FixedRatePlanner(PlannerAction settings) : settings_(std::move(settings)) {}
    PlannerAction act(const Environment&, Rng&) override { return settings_; }

  private:
    PlannerAction settings_;
};

class RandomPlannerPolicy final : public IPlannerPolicy {
  public:
    PlannerAction act(const Environment&, Rng& rng) override {
        PlannerAction a(kNumBrackets);
        for (int& s : a) s = static_cast<int>(rng.uniform_int(0, kNumRateSettings - 1));
        return a;
    }
};

/// Neural policies adapted to the episode-driver interface.
class NeuralAgentPolicy final : public IAgentPolicy {
  public:
    NeuralAgentPolicy(AgentNet& net, bool greedy) : net_(net), greedy_(greedy) {}
    void begin_episode(const Environment& env, Rng& rng) override;
    int act(const Environment& env, int agent_id, Rng& rng) override;

  private:
    AgentNet& net_;
    bool greedy_;
    std::vector<std::vector<double>> hidden_;
};

class NeuralPlannerPolicy final : public IPlannerPolicy {
  public:
    NeuralPlannerPolicy(PlannerNet& net, bool greedy) : net_(net), greedy_(greedy) {}
    PlannerAction act(const Environment& env, Rng& rng) override;

  private:
    PlannerNet& net_;
    bool greedy_;
};

}  // namespace gtb
