#include "gtb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "gtb/csv.hpp"

namespace gtb {

size_t Trajectories::agent_sample_count() const {
    size_t n = 0;
    for (const auto& e : episodes) n += e.agent_samples.size();
    return n;
}

size_t Trajectories::planner_sample_count() const {
    size_t n = 0;
    for (const auto& e : episodes) n += e.planner_samples.size();
    return n;
}

double Trajectories::mean_agent_reward() const {
    if (episodes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : episodes) s += e.mean_agent_episode_reward;
    return s / static_cast<double>(episodes.size());
}

double Trajectories::mean_planner_reward() const {
    if (episodes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : episodes) s += e.planner_episode_reward;
    return s / static_cast<double>(episodes.size());
}

// ---------------------------------------------------------------------------
// Rollout collection
// ---------------------------------------------------------------------------

namespace {

std::vector<float> to_float(const std::vector<double>& v) {
    std::vector<float> f(v.size());
    for (size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(v[i]);
    return f;
}

EpisodeRollout run_rollout_episode(const SimConfig& cfg, AgentNet& agent, PlannerNet& planner,
                                   bool planner_neural, uint64_t episode_seed, double gamma) {
    EpisodeRollout out;
    out.seed = episode_seed;
    Environment env(cfg, episode_seed);
    Rng agent_rng(derive_seed(episode_seed, 0x30));
    Rng planner_rng(derive_seed(episode_seed, 0x31));

    const int n = static_cast<int>(env.world().agents.size());
    const bool recurrent = agent.sizes().recurrent;
    std::vector<std::vector<double>> hidden(
        static_cast<size_t>(n),
        std::vector<double>(static_cast<size_t>(recurrent ? agent.sizes().recurrent_state : 0),
                            0.0));

    std::vector<double> planner_rewards;
    std::vector<int> planner_decision_steps;
    double entropy_sum = 0.0;
    size_t entropy_count = 0;

    while (!env.done()) {
        std::optional<PlannerAction> pa;
        if (env.at_year_start()) {
            if (planner_neural) {
                PlannerObservation pobs = env.planner_observation();
                PlannerDecision pd = planner_act(planner, pobs, false, planner_rng);
                PlannerSample ps;
                ps.spatial = to_float(pobs.spatial);
                ps.vec = to_float(pobs.vec);
                ps.settings = pd.settings;
                ps.logprob = pd.logprob;
                ps.value = pd.value;
                out.planner_samples.push_back(std::move(ps));
                planner_decision_steps.push_back(env.step_index());
                pa = pd.settings;
            } else {
                pa = PlannerAction(kNumBrackets, 0);
            }
        }

        std::vector<int> acts(static_cast<size_t>(n));
        const size_t base = out.agent_samples.size();
        for (int i = 0; i < n; ++i) {
            AgentObservation obs = env.agent_observation(i);
            std::vector<uint8_t> mask = env.legal_actions(i);
            AgentDecision d = agent_act(agent, obs, mask, hidden[static_cast<size_t>(i)], false,
                                        agent_rng);
            AgentSample s;
            s.spatial = to_float(obs.spatial);
            s.vec = to_float(obs.vec);
            if (recurrent) {
                s.hidden = to_float(hidden[static_cast<size_t>(i)]);
                hidden[static_cast<size_t>(i)] = d.hidden_next;
            }
            s.mask = std::move(mask);
            s.action = d.action;
            s.logprob = d.logprob;
            s.value = d.value;
            out.agent_samples.push_back(std::move(s));
            acts[static_cast<size_t>(i)] = d.action;
            entropy_sum += d.entropy;
            ++entropy_count;
        }

        StepResult r = env.step(acts, pa);
        for (int i = 0; i < n; ++i)
            out.agent_samples[base + static_cast<size_t>(i)].reward =
                r.agent_rewards[static_cast<size_t>(i)];
        planner_rewards.push_back(r.planner_reward);
    }

    // discounted Monte Carlo returns per agent stream
    const int T = static_cast<int>(planner_rewards.size());
    for (int i = 0; i < n; ++i) {
        double ret = 0.0;
        for (int t = T - 1; t >= 0; --t) {
            AgentSample& s = out.agent_samples[static_cast<size_t>(t) * static_cast<size_t>(n) +
                                               static_cast<size_t>(i)];
            ret = s.reward + gamma * ret;
            s.ret = ret;
            s.adv = ret - s.value;
        }
    }
    std::vector<double> planner_suffix(static_cast<size_t>(T) + 1, 0.0);
    for (int t = T - 1; t >= 0; --t)
        planner_suffix[static_cast<size_t>(t)] =
            planner_rewards[static_cast<size_t>(t)] + gamma * planner_suffix[static_cast<size_t>(t) + 1];
    for (size_t k = 0; k < out.planner_samples.size(); ++k) {
        PlannerSample& ps = out.planner_samples[k];
        ps.ret = planner_suffix[static_cast<size_t>(planner_decision_steps[k])];
        ps.adv = ps.ret - ps.value;
    }

    double agent_total = 0.0;
    for (const AgentSample& s : out.agent_samples) agent_total += s.reward;
    out.mean_agent_episode_reward = n > 0 ? agent_total / n : 0.0;
    for (double r : planner_rewards) out.planner_episode_reward += r;
    out.mean_policy_entropy =
        entropy_count > 0 ? entropy_sum / static_cast<double>(entropy_count) : 0.0;
    return out;
}

}  // namespace

Trajectories collect_rollouts(const SimConfig& cfg, const PolicyBundle& bundle, int n_episodes,
                              uint64_t seed, bool planner_neural, int threads) {
    Trajectories traj;
    traj.episodes.resize(static_cast<size_t>(n_episodes));
    if (n_episodes == 0) return traj;

    const SimConfig norm = cfg.normalized();
    const double gamma = norm.trainer.gamma;
    const int workers = std::max(1, std::min(threads, n_episodes));

    auto work = [&](int worker_idx) {
        // snapshot copies; layer caches make the nets stateful during forward
        AgentNet agent_copy = *bundle.agent;
        PlannerNet planner_copy = *bundle.planner;
        for (int ep = worker_idx; ep < n_episodes; ep += workers) {
            traj.episodes[static_cast<size_t>(ep)] =
                run_rollout_episode(norm, agent_copy, planner_copy, planner_neural,
                                    derive_seed(seed, static_cast<uint64_t>(ep)), gamma);
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    return traj;
}

// ---------------------------------------------------------------------------
// PPO losses
// ---------------------------------------------------------------------------

namespace {

Mat assemble(const std::vector<const std::vector<float>*>& cols) {
    require(!cols.empty(), "assemble: empty batch");
    Mat m(static_cast<Eigen::Index>(cols.front()->size()),
          static_cast<Eigen::Index>(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c) {
        const std::vector<float>& v = *cols[c];
        for (size_t r = 0; r < v.size(); ++r)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                static_cast<double>(v[r]);
    }
    return m;
}

}  // namespace

LossStats agent_loss(AgentNet& net, const std::vector<AgentBatchRef>& batch, const PpoParams& pp,
                     bool with_grad) {
    require(!batch.empty(), "agent_loss: empty batch");
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(B);

    std::vector<const std::vector<float>*> sp, vc, hd;
    for (const AgentBatchRef& r : batch) {
        sp.push_back(&r.s->spatial);
        vc.push_back(&r.s->vec);
        if (net.sizes().recurrent) hd.push_back(&r.s->hidden);
    }
    const Mat spatial = assemble(sp);
    const Mat vec = assemble(vc);
    Mat hidden;
    if (net.sizes().recurrent) hidden = assemble(hd);

    Mat mask(net.sizes().actions, B);
    std::vector<int> actions(static_cast<size_t>(B));
    for (Eigen::Index c = 0; c < B; ++c) {
        const AgentSample& s = *batch[static_cast<size_t>(c)].s;
        actions[static_cast<size_t>(c)] = s.action;
        for (int a = 0; a < net.sizes().actions; ++a)
            mask(a, c) = s.mask[static_cast<size_t>(a)] ? 1.0 : 0.0;
    }

    AgentNet::Out out = net.forward(spatial, vec, hidden);
    CategoricalBatch cat = masked_categorical(out.logits, mask);

    LossStats st;
    Vec dlogp_coef = Vec::Zero(B);
    Vec dent_coef = Vec::Zero(B);
    Vec dvalue = Vec::Zero(B);
    for (Eigen::Index c = 0; c < B; ++c) {
        const AgentBatchRef& r = batch[static_cast<size_t>(c)];
        const double logp_new = cat.log_probs(actions[static_cast<size_t>(c)], c);
        const double ratio = std::exp(logp_new - r.s->logprob);
        const double unclipped = ratio * r.adv;
        const double clipped = std::clamp(ratio, 1.0 - pp.clip, 1.0 + pp.clip) * r.adv;
        st.policy += -std::min(unclipped, clipped) * inv_b;
        if (unclipped <= clipped)
            dlogp_coef[c] = -r.adv * ratio * inv_b;  // else clip is active: zero grad
        else
            st.clip_fraction += inv_b;

        const double verr = out.value[c] - r.s->ret;
        st.value += pp.value_coef * verr * verr * inv_b;
        dvalue[c] = 2.0 * pp.value_coef * verr * inv_b;

        st.entropy += cat.entropy[c] * inv_b;
        dent_coef[c] = -pp.entropy_coef * inv_b;
    }
    st.entropy_term = -pp.entropy_coef * st.entropy;
    st.total = st.policy + st.value + st.entropy_term;

    if (with_grad) {
        const Mat dlogits = categorical_backward(cat, actions, dlogp_coef, dent_coef);
        net.backward(dlogits, dvalue);
    }
    return st;
}

LossStats planner_loss(PlannerNet& net, const std::vector<PlannerBatchRef>& batch,
                       const PpoParams& pp, bool with_grad) {
    require(!batch.empty(), "planner_loss: empty batch");
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(B);
    const int settings = net.sizes().settings;
    const int brackets = net.sizes().brackets;

    std::vector<const std::vector<float>*> sp, vc;
    for (const PlannerBatchRef& r : batch) {
        sp.push_back(&r.s->spatial);
        vc.push_back(&r.s->vec);
    }
    PlannerNet::Out out = net.forward(assemble(sp), assemble(vc));

    const Mat ones = Mat::Ones(settings, B);
    std::vector<CategoricalBatch> cats;
    cats.reserve(static_cast<size_t>(brackets));
    std::vector<std::vector<int>> head_actions(static_cast<size_t>(brackets),
                                               std::vector<int>(static_cast<size_t>(B)));
    Vec logp_new = Vec::Zero(B);
    Vec entropy = Vec::Zero(B);
    for (int h = 0; h < brackets; ++h) {
        cats.push_back(masked_categorical(out.logits.block(h * settings, 0, settings, B), ones));
        for (Eigen::Index c = 0; c < B; ++c) {
            const int a = batch[static_cast<size_t>(c)].s->settings[static_cast<size_t>(h)];
            head_actions[static_cast<size_t>(h)][static_cast<size_t>(c)] = a;
            logp_new[c] += cats.back().log_probs(a, c);
            entropy[c] += cats.back().entropy[c];
        }
    }

    LossStats st;
    Vec dlogp_coef = Vec::Zero(B);
    Vec dent_coef = Vec::Zero(B);
    Vec dvalue = Vec::Zero(B);
    for (Eigen::Index c = 0; c < B; ++c) {
        const PlannerBatchRef& r = batch[static_cast<size_t>(c)];
        const double ratio = std::exp(logp_new[c] - r.s->logprob);
        const double unclipped = ratio * r.adv;
        const double clipped = std::clamp(ratio, 1.0 - pp.clip, 1.0 + pp.clip) * r.adv;
        st.policy += -std::min(unclipped, clipped) * inv_b;
        if (unclipped <= clipped)
            dlogp_coef[c] = -r.adv * ratio * inv_b;
        else
            st.clip_fraction += inv_b;

        const double verr = out.value[c] - r.s->ret;
        st.value += pp.value_coef * verr * verr * inv_b;
        dvalue[c] = 2.0 * pp.value_coef * verr * inv_b;

        st.entropy += entropy[c] * inv_b;
        dent_coef[c] = -pp.entropy_coef * inv_b;
    }
    st.entropy_term = -pp.entropy_coef * st.entropy;
    st.total = st.policy + st.value + st.entropy_term;

    if (with_grad) {
        Mat dlogits = Mat::Zero(out.logits.rows(), B);
        for (int h = 0; h < brackets; ++h) {
            dlogits.block(h * settings, 0, settings, B) = categorical_backward(
                cats[static_cast<size_t>(h)], head_actions[static_cast<size_t>(h)], dlogp_coef,
                dent_coef);
        }
        net.backward(dlogits, dvalue);
    }
    return st;
}

// ---------------------------------------------------------------------------
// PPO update
// ---------------------------------------------------------------------------

namespace {

// mean/std normalization; an all-equal batch maps to all-zero advantages
std::vector<double> normalized_advantages(const std::vector<double>& adv) {
    std::vector<double> out(adv.size(), 0.0);
    if (adv.empty()) return out;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    const double sd = std::sqrt(var);
    for (size_t i = 0; i < adv.size(); ++i)
        out[i] = sd > 1e-12 ? (adv[i] - mean) / sd : adv[i] - mean;
    return out;
}

void accumulate(LossStats& into, const LossStats& part) {
    into.total += part.total;
    into.policy += part.policy;
    into.value += part.value;
    into.entropy += part.entropy;
    into.entropy_term += part.entropy_term;
    into.clip_fraction += part.clip_fraction;
}

void finalize(LossStats& st, int count) {
    if (count == 0) return;
    st.total /= count;
    st.policy /= count;
    st.value /= count;
    st.entropy /= count;
    st.entropy_term /= count;
    st.clip_fraction /= count;
}

}  // namespace

UpdateDiagnostics policy_update(PolicyBundle& bundle, const Trajectories& traj,
                                const TrainerConfig& cfg, double entropy_coef, Rng& rng,
                                bool update_planner) {
    UpdateDiagnostics diag;
    require(traj.agent_sample_count() > 0, "policy_update: empty trajectories");

    std::vector<const AgentSample*> agent_samples;
    std::vector<double> agent_adv;
    for (const EpisodeRollout& e : traj.episodes) {
        for (const AgentSample& s : e.agent_samples) {
            agent_samples.push_back(&s);
            agent_adv.push_back(s.adv);
        }
    }
    const std::vector<double> agent_adv_norm = normalized_advantages(agent_adv);

    const PpoParams pp{cfg.clip_ratio, cfg.value_coef, entropy_coef};
    auto agent_params = bundle.agent->params();

    std::vector<size_t> idx(agent_samples.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(idx);
        for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(cfg.minibatch)) {
            const size_t end = std::min(idx.size(), start + static_cast<size_t>(cfg.minibatch));
            std::vector<AgentBatchRef> batch;
            batch.reserve(end - start);
            for (size_t k = start; k < end; ++k)
                batch.push_back({agent_samples[idx[k]], agent_adv_norm[idx[k]]});
            for (Tensor* p : agent_params) p->zero_grad();
            const LossStats st = agent_loss(*bundle.agent, batch, pp, true);
            if (!std::isfinite(st.total) || !grads_finite(agent_params)) {
                diag.aborted = true;
                finalize(diag.agent, diag.agent_minibatches);
                return diag;
            }
            diag.agent_grad_norm += clip_grad_norm(agent_params, cfg.max_grad_norm);
            bundle.agent_opt.step(agent_params, cfg.lr_agent);
            accumulate(diag.agent, st);
            ++diag.agent_minibatches;
        }
    }
    finalize(diag.agent, diag.agent_minibatches);
    if (diag.agent_minibatches > 0) diag.agent_grad_norm /= diag.agent_minibatches;

    if (!update_planner || traj.planner_sample_count() == 0) return diag;

    std::vector<const PlannerSample*> planner_samples;
    std::vector<double> planner_adv;
    for (const EpisodeRollout& e : traj.episodes) {
        for (const PlannerSample& s : e.planner_samples) {
            planner_samples.push_back(&s);
            planner_adv.push_back(s.adv);
        }
    }
    const std::vector<double> planner_adv_norm = normalized_advantages(planner_adv);
    auto planner_params = bundle.planner->params();

    std::vector<size_t> pidx(planner_samples.size());
    for (size_t i = 0; i < pidx.size(); ++i) pidx[i] = i;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(pidx);
        for (size_t start = 0; start < pidx.size(); start += static_cast<size_t>(cfg.minibatch)) {
            const size_t end = std::min(pidx.size(), start + static_cast<size_t>(cfg.minibatch));
            std::vector<PlannerBatchRef> batch;
            batch.reserve(end - start);
            for (size_t k = start; k < end; ++k)
                batch.push_back({planner_samples[pidx[k]], planner_adv_norm[pidx[k]]});
            for (Tensor* p : planner_params) p->zero_grad();
            const LossStats st = planner_loss(*bundle.planner, batch, pp, true);
            if (!std::isfinite(st.total) || !grads_finite(planner_params)) {
                diag.aborted = true;
                finalize(diag.planner, diag.planner_minibatches);
                return diag;
            }
            diag.planner_grad_norm += clip_grad_norm(planner_params, cfg.max_grad_norm);
            bundle.planner_opt.step(planner_params, cfg.lr_planner);
            accumulate(diag.planner, st);
            ++diag.planner_minibatches;
        }
    }
    finalize(diag.planner, diag.planner_minibatches);
    if (diag.planner_minibatches > 0) diag.planner_grad_norm /= diag.planner_minibatches;
    return diag;
}

// ---------------------------------------------------------------------------
// Two-phase training
// ---------------------------------------------------------------------------

TrainResult train(const SimConfig& cfg, uint64_t seed, const std::string& out_dir,
                  const IterationCallback& callback) {
    const SimConfig norm = cfg.normalized();
    const TrainerConfig& tc = norm.trainer;

    TrainResult result{.curve = {}, .bundle = PolicyBundle::make(norm, derive_seed(seed, 0xB0)),
                       .iterations_run = 0};
    Rng update_rng(derive_seed(seed, 0xB1));

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    for (int iter = 0; iter < tc.iterations; ++iter) {
        const bool phase2 = iter >= tc.phase1_iters;
        double tax_scale = 0.0;
        if (phase2) {
            tax_scale = tc.anneal_iters > 0
                            ? std::min(1.0, static_cast<double>(iter - tc.phase1_iters + 1) /
                                                tc.anneal_iters)
                            : 1.0;
        }
        SimConfig rollout_cfg = norm;
        rollout_cfg.fiscal.taxes_enabled = norm.fiscal.taxes_enabled && phase2;
        rollout_cfg.fiscal.tax_rate_scale = tax_scale;

        Trajectories traj =
            collect_rollouts(rollout_cfg, result.bundle, tc.episodes_per_iter,
                             derive_seed(seed, 0xC00 + static_cast<uint64_t>(iter)), phase2,
                             tc.rollout_threads);

        const double entropy_coef =
            tc.entropy_coef *
            std::pow(tc.entropy_decay, static_cast<double>(iter / tc.entropy_decay_every));

        CurveRow row;
        row.iteration = iter;
        row.phase = phase2 ? 2 : 1;
        row.tax_scale = tax_scale;
        row.entropy_coef = entropy_coef;
        row.mean_agent_reward = traj.mean_agent_reward();
        row.mean_planner_reward = traj.mean_planner_reward();
        row.diag = policy_update(result.bundle, traj, tc, entropy_coef, update_rng, phase2);
        result.curve.push_back(row);
        result.iterations_run = iter + 1;

        if (!out_dir.empty() && tc.checkpoint_every > 0 && (iter + 1) % tc.checkpoint_every == 0)
            result.bundle.save(out_dir + "/checkpoint_" + std::to_string(iter + 1) + ".bin");

        if (callback && !callback(row)) break;
    }

    if (!out_dir.empty()) {
        result.bundle.save(out_dir + "/checkpoint.bin");
        write_curve_csv(result.curve, out_dir + "/training_curve.csv");
        write_checkpoint_manifest(norm, seed, result.iterations_run,
                                  out_dir + "/checkpoint_manifest.json");
    }
    return result;
}

void write_checkpoint_manifest(const SimConfig& cfg, uint64_t seed, int iterations,
                               const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint manifest: " + path);
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    out << "{\n"
        << "  \"format\": \"GTBPOL01\",\n"
        << "  \"config_hash\": \"" << hash_hex << "\",\n"
        << "  \"seed\": " << seed << ",\n"
        << "  \"iterations\": " << iterations << "\n"
        << "}\n";
}

void write_curve_csv(const std::vector<CurveRow>& curve, const std::string& path) {
    CsvWriter w(path,
                "iteration,phase,tax_scale,entropy_coef,mean_agent_reward,mean_planner_reward,"
                "agent_loss,agent_entropy,agent_clip_fraction,planner_loss,planner_entropy");
    for (const CurveRow& r : curve)
        w.row(r.iteration, r.phase, r.tax_scale, r.entropy_coef, r.mean_agent_reward,
              r.mean_planner_reward, r.diag.agent.total, r.diag.agent.entropy,
              r.diag.agent.clip_fraction, r.diag.planner.total, r.diag.planner.entropy);
}

}  // namespace gtb
