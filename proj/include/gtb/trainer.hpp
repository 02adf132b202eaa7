#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gtb/config.hpp"
#include "gtb/env.hpp"
#include "gtb/policy.hpp"

namespace gtb {

// Observations inside samples are stored as float to halve rollout memory;
// they are widened back to double when batches are assembled.

struct AgentSample {
    std::vector<float> spatial;
    std::vector<float> vec;
    std::vector<float> hidden;  // incoming recurrent state (empty if off)
    std::vector<uint8_t> mask;
    int action = 0;
    double logprob = 0.0;
    double value = 0.0;
    double reward = 0.0;
    double ret = 0.0;  // discounted Monte Carlo return
    double adv = 0.0;  // ret - value
};

struct PlannerSample {
    std::vector<float> spatial;
    std::vector<float> vec;
    PlannerAction settings;
    double logprob = 0.0;
    double value = 0.0;
    double ret = 0.0;
    double adv = 0.0;
};

struct EpisodeRollout {
    uint64_t seed = 0;
    std::vector<AgentSample> agent_samples;  // step-major: [t * n_agents + i]
    std::vector<PlannerSample> planner_samples;
    double mean_agent_episode_reward = 0.0;  // sum_t r_{i,t}, averaged over agents
    double planner_episode_reward = 0.0;     // sum_t r_{p,t}
    double mean_policy_entropy = 0.0;
};

struct Trajectories {
    std::vector<EpisodeRollout> episodes;

    size_t agent_sample_count() const;
    size_t planner_sample_count() const;
    double mean_agent_reward() const;
    double mean_planner_reward() const;
};

/// Samples n_episodes complete episodes under the bundle's current policies.
/// Episode seeds derive from (seed, episode index); collection may run on
/// several threads without changing the result.
Trajectories collect_rollouts(const SimConfig& cfg, const PolicyBundle& bundle, int n_episodes,
                              uint64_t seed, bool planner_neural, int threads);

struct LossStats {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;        // mean policy entropy of the batch
    double entropy_term = 0.0;   // -coef * entropy contribution to the loss
    double clip_fraction = 0.0;
};

struct PpoParams {
    double clip = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
};

struct AgentBatchRef {
    const AgentSample* s;
    double adv;  // possibly normalized
};

struct PlannerBatchRef {
    const PlannerSample* s;
    double adv;
};

/// Clipped-surrogate PPO loss over one minibatch; with_grad accumulates
/// parameter gradients (caller zeroes them), never applies an optimizer step.
LossStats agent_loss(AgentNet& net, const std::vector<AgentBatchRef>& batch,
                     const PpoParams& pp, bool with_grad);
LossStats planner_loss(PlannerNet& net, const std::vector<PlannerBatchRef>& batch,
                       const PpoParams& pp, bool with_grad);

struct UpdateDiagnostics {
    LossStats agent;
    LossStats planner;
    double agent_grad_norm = 0.0;
    double planner_grad_norm = 0.0;
    bool aborted = false;  // non-finite loss or gradient; no step applied
    int agent_minibatches = 0;
    int planner_minibatches = 0;
};

UpdateDiagnostics policy_update(PolicyBundle& bundle, const Trajectories& traj,
                                const TrainerConfig& cfg, double entropy_coef, Rng& rng,
                                bool update_planner);

struct CurveRow {
    int iteration = 0;
    int phase = 1;
    double tax_scale = 0.0;
    double entropy_coef = 0.0;
    double mean_agent_reward = 0.0;
    double mean_planner_reward = 0.0;
    UpdateDiagnostics diag;
};

struct TrainResult {
    std::vector<CurveRow> curve;
    PolicyBundle bundle;
    int iterations_run = 0;
};

/// Returning false stops training after the current iteration.
using IterationCallback = std::function<bool(const CurveRow&)>;

/// Two-phase training: phase 1 trains agents with taxes disabled; phase 2
/// co-trains the planner with marginal rates annealed from 0 to full over
/// the anneal schedule. Writes checkpoint.bin and training_curve.csv into
/// out_dir when non-empty.
TrainResult train(const SimConfig& cfg, uint64_t seed, const std::string& out_dir = "",
                  const IterationCallback& callback = {});

void write_curve_csv(const std::vector<CurveRow>& curve, const std::string& path);

void write_checkpoint_manifest(const SimConfig& cfg, uint64_t seed, int iterations,
                               const std::string& path);

}  // namespace gtb
