#include "gtb/policy.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace gtb {

// ---------------------------------------------------------------------------
// AgentNet
// ---------------------------------------------------------------------------

AgentNet::AgentNet(const AgentNetSizes& s, Rng& rng) : sizes_(s) {
    conv_ = Conv2d("agent.conv", s.channels, s.window, s.window, s.conv_filters, 3, 2, rng);
    spatial_feat_ = conv_.out_size();
    fc_vec_ = Dense("agent.fc_vec", s.vec_dim, s.hidden, rng);
    trunk_ = Dense("agent.trunk", spatial_feat_ + s.hidden, s.hidden, rng);
    const int head_in = s.recurrent ? s.recurrent_state : s.hidden;
    if (s.recurrent)
        rec_ = Dense("agent.rec", s.hidden + s.recurrent_state, s.recurrent_state, rng);
    pi_ = Dense("agent.pi", head_in, s.actions, rng);
    value_ = Dense("agent.value", head_in, 1, rng);
}

AgentNet::Out AgentNet::forward(const Mat& spatial, const Mat& vec, const Mat& hidden) {
    last_batch_ = spatial.cols();
    const Mat sp = conv_relu_.forward(conv_.forward(spatial));
    const Mat vf = vec_relu_.forward(fc_vec_.forward(vec));
    Mat joint(sp.rows() + vf.rows(), last_batch_);
    joint << sp, vf;
    Mat t = trunk_relu_.forward(trunk_.forward(joint));

    Out out;
    if (sizes_.recurrent) {
        require(hidden.rows() == sizes_.recurrent_state && hidden.cols() == last_batch_,
                "AgentNet: recurrent hidden state of wrong shape");
        Mat rec_in(t.rows() + hidden.rows(), last_batch_);
        rec_in << t, hidden;
        t = rec_tanh_.forward(rec_.forward(rec_in));
        out.hidden_next = t;
    }
    out.logits = pi_.forward(t);
    out.value = value_.forward(t).row(0).transpose();
    return out;
}

void AgentNet::backward(const Mat& dlogits, const Vec& dvalue) {
    Mat dt = pi_.backward(dlogits);
    dt += value_.backward(dvalue.transpose());
    if (sizes_.recurrent) {
        const Mat drec_in = rec_.backward(rec_tanh_.backward(dt));
        dt = drec_in.topRows(sizes_.hidden);  // hidden input is detached
    }
    const Mat djoint = trunk_.backward(trunk_relu_.backward(dt));
    const Mat dsp = djoint.topRows(spatial_feat_);
    const Mat dvf = djoint.bottomRows(sizes_.hidden);
    conv_.backward(conv_relu_.backward(dsp));
    fc_vec_.backward(vec_relu_.backward(dvf));
}

std::vector<Tensor*> AgentNet::params() {
    std::vector<Tensor*> ps;
    for (Tensor* p : conv_.params()) ps.push_back(p);
    for (Tensor* p : fc_vec_.params()) ps.push_back(p);
    for (Tensor* p : trunk_.params()) ps.push_back(p);
    if (sizes_.recurrent)
        for (Tensor* p : rec_.params()) ps.push_back(p);
    for (Tensor* p : pi_.params()) ps.push_back(p);
    for (Tensor* p : value_.params()) ps.push_back(p);
    return ps;
}

// ---------------------------------------------------------------------------
// PlannerNet
// ---------------------------------------------------------------------------

PlannerNet::PlannerNet(const PlannerNetSizes& s, Rng& rng) : sizes_(s) {
    conv_ = Conv2d("planner.conv", s.channels, s.map_h, s.map_w, s.conv_filters, 3, 2, rng);
    fc_vec_ = Dense("planner.fc_vec", s.vec_dim, s.hidden, rng);
    trunk_ = Dense("planner.trunk", conv_.out_size() + s.hidden, s.hidden, rng);
    pi_ = Dense("planner.pi", s.hidden, s.brackets * s.settings, rng);
    value_ = Dense("planner.value", s.hidden, 1, rng);
}

PlannerNet::Out PlannerNet::forward(const Mat& spatial, const Mat& vec) {
    const Mat sp = conv_relu_.forward(conv_.forward(spatial));
    const Mat vf = vec_relu_.forward(fc_vec_.forward(vec));
    Mat joint(sp.rows() + vf.rows(), spatial.cols());
    joint << sp, vf;
    const Mat t = trunk_relu_.forward(trunk_.forward(joint));
    Out out;
    out.logits = pi_.forward(t);
    out.value = value_.forward(t).row(0).transpose();
    return out;
}

void PlannerNet::backward(const Mat& dlogits, const Vec& dvalue) {
    Mat dt = pi_.backward(dlogits);
    dt += value_.backward(dvalue.transpose());
    const Mat djoint = trunk_.backward(trunk_relu_.backward(dt));
    const Mat dsp = djoint.topRows(conv_.out_size());
    const Mat dvf = djoint.bottomRows(sizes_.hidden);
    conv_.backward(conv_relu_.backward(dsp));
    fc_vec_.backward(vec_relu_.backward(dvf));
}

std::vector<Tensor*> PlannerNet::params() {
    std::vector<Tensor*> ps;
    for (Tensor* p : conv_.params()) ps.push_back(p);
    for (Tensor* p : fc_vec_.params()) ps.push_back(p);
    for (Tensor* p : trunk_.params()) ps.push_back(p);
    for (Tensor* p : pi_.params()) ps.push_back(p);
    for (Tensor* p : value_.params()) ps.push_back(p);
    return ps;
}

// ---------------------------------------------------------------------------
// Bundle
// ---------------------------------------------------------------------------

PolicyBundle PolicyBundle::make(const SimConfig& cfg, uint64_t seed) {
    SimConfig c = cfg.normalized();
    Rng rng(derive_seed(seed, 0x77));
    AgentNetSizes as;
    as.window = c.env.window;
    as.vec_dim = agent_vec_size(c.world.n_agents);
    as.conv_filters = c.trainer.conv_filters;
    as.hidden = c.trainer.hidden;
    as.recurrent = c.trainer.recurrent;
    as.recurrent_state = c.trainer.recurrent_state;
    PlannerNetSizes ps;
    ps.map_w = c.world.width;
    ps.map_h = c.world.height;
    ps.vec_dim = planner_vec_size(c.world.n_agents);
    ps.conv_filters = c.trainer.conv_filters;
    ps.hidden = c.trainer.hidden;

    PolicyBundle b;
    b.agent = std::make_unique<AgentNet>(as, rng);
    b.planner = std::make_unique<PlannerNet>(ps, rng);
    return b;
}

namespace {

constexpr char kCheckpointMagic[8] = {'G', 'T', 'B', 'P', 'O', 'L', '0', '1'};

void write_i32(std::ofstream& out, int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

int32_t read_i32(std::ifstream& in) {
    int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

void write_tensor(std::ofstream& out, const Tensor& t) {
    write_i32(out, static_cast<int32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_i32(out, static_cast<int32_t>(t.value.rows()));
    write_i32(out, static_cast<int32_t>(t.value.cols()));
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.value.size())));
}

void read_tensor(std::ifstream& in, Tensor& t) {
    const int32_t name_len = read_i32(in);
    std::string name(static_cast<size_t>(name_len), '\0');
    in.read(name.data(), name_len);
    const int32_t rows = read_i32(in);
    const int32_t cols = read_i32(in);
    require(name == t.name, "checkpoint: tensor name mismatch");
    require(rows == t.value.rows() && cols == t.value.cols(),
            "checkpoint: tensor shape mismatch");
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.value.size())));
}

void write_sizes(std::ofstream& out, const AgentNetSizes& a, const PlannerNetSizes& p) {
    write_i32(out, a.window);
    write_i32(out, a.channels);
    write_i32(out, a.vec_dim);
    write_i32(out, a.conv_filters);
    write_i32(out, a.hidden);
    write_i32(out, a.actions);
    write_i32(out, a.recurrent ? 1 : 0);
    write_i32(out, a.recurrent_state);
    write_i32(out, p.map_w);
    write_i32(out, p.map_h);
    write_i32(out, p.channels);
    write_i32(out, p.vec_dim);
    write_i32(out, p.conv_filters);
    write_i32(out, p.hidden);
    write_i32(out, p.brackets);
    write_i32(out, p.settings);
}

}  // namespace

void PolicyBundle::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    write_sizes(out, agent->sizes(), planner->sizes());
    auto ap = const_cast<AgentNet*>(agent.get())->params();
    auto pp = const_cast<PlannerNet*>(planner.get())->params();
    write_i32(out, static_cast<int32_t>(ap.size()));
    for (const Tensor* t : ap) write_tensor(out, *t);
    write_i32(out, static_cast<int32_t>(pp.size()));
    for (const Tensor* t : pp) write_tensor(out, *t);
}

PolicyBundle PolicyBundle::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    require(std::memcmp(magic, kCheckpointMagic, sizeof magic) == 0,
            "checkpoint: bad magic/version");
    AgentNetSizes as;
    PlannerNetSizes ps;
    as.window = read_i32(in);
    as.channels = read_i32(in);
    as.vec_dim = read_i32(in);
    as.conv_filters = read_i32(in);
    as.hidden = read_i32(in);
    as.actions = read_i32(in);
    as.recurrent = read_i32(in) != 0;
    as.recurrent_state = read_i32(in);
    ps.map_w = read_i32(in);
    ps.map_h = read_i32(in);
    ps.channels = read_i32(in);
    ps.vec_dim = read_i32(in);
    ps.conv_filters = read_i32(in);
    ps.hidden = read_i32(in);
    ps.brackets = read_i32(in);
    ps.settings = read_i32(in);

    PolicyBundle b;
    Rng rng(0);
    b.agent = std::make_unique<AgentNet>(as, rng);
    b.planner = std::make_unique<PlannerNet>(ps, rng);
    const int32_t an = read_i32(in);
    auto ap = b.agent->params();
    require(an == static_cast<int32_t>(ap.size()), "checkpoint: agent tensor count mismatch");
    for (Tensor* t : ap) read_tensor(in, *t);
    const int32_t pn = read_i32(in);
    auto pp = b.planner->params();
    require(pn == static_cast<int32_t>(pp.size()), "checkpoint: planner tensor count mismatch");
    for (Tensor* t : pp) read_tensor(in, *t);
    require(static_cast<bool>(in), "checkpoint: truncated file");
    return b;
}

// ---------------------------------------------------------------------------
// One-sample act helpers
// ---------------------------------------------------------------------------

Mat obs_to_col(const std::vector<double>& data) {
    Mat m(static_cast<Eigen::Index>(data.size()), 1);
    for (size_t i = 0; i < data.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = data[i];
    return m;
}

AgentDecision agent_act(AgentNet& net, const AgentObservation& obs,
                        const std::vector<uint8_t>& mask, const std::vector<double>& hidden,
                        bool greedy, Rng& rng) {
    Mat hidden_col;
    if (net.sizes().recurrent) hidden_col = obs_to_col(hidden);
    AgentNet::Out out = net.forward(obs_to_col(obs.spatial), obs_to_col(obs.vec), hidden_col);
    Mat mask_col(static_cast<Eigen::Index>(mask.size()), 1);
    for (size_t i = 0; i < mask.size(); ++i)
        mask_col(static_cast<Eigen::Index>(i), 0) = mask[i] ? 1.0 : 0.0;
    CategoricalBatch cat = masked_categorical(out.logits, mask_col);

    AgentDecision d;
    d.action = greedy ? argmax_categorical(cat.probs.col(0))
                      : sample_categorical(cat.probs.col(0), rng);
    d.logprob = cat.log_probs(d.action, 0);
    d.value = out.value[0];
    d.entropy = cat.entropy[0];
    if (net.sizes().recurrent) {
        d.hidden_next.assign(out.hidden_next.data(),
                             out.hidden_next.data() + out.hidden_next.rows());
    }
    return d;
}

PlannerDecision planner_act(PlannerNet& net, const PlannerObservation& obs, bool greedy,
                            Rng& rng) {
    PlannerNet::Out out = net.forward(obs_to_col(obs.spatial), obs_to_col(obs.vec));
    const int settings = net.sizes().settings;
    PlannerDecision d;
    d.value = out.value[0];
    Mat ones = Mat::Ones(settings, 1);
    for (int br = 0; br < net.sizes().brackets; ++br) {
        Mat logits = out.logits.block(br * settings, 0, settings, 1);
        CategoricalBatch cat = masked_categorical(logits, ones);
        int s = greedy ? argmax_categorical(cat.probs.col(0))
                       : sample_categorical(cat.probs.col(0), rng);
        d.settings.push_back(s);
        d.logprob += cat.log_probs(s, 0);
        d.entropy += cat.entropy[0];
    }
    return d;
}

// ---------------------------------------------------------------------------
// Scripted policies
// ---------------------------------------------------------------------------

int RandomAgentPolicy::act(const Environment& env, int agent_id, Rng& rng) {
    if (!use_mask_) return static_cast<int>(rng.uniform_int(0, kNumAgentActions - 1));
    const std::vector<uint8_t> mask = env.legal_actions(agent_id);
    std::vector<int> legal;
    legal.reserve(mask.size());
    for (int i = 0; i < static_cast<int>(mask.size()); ++i)
        if (mask[static_cast<size_t>(i)]) legal.push_back(i);
    return legal[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(legal.size()) - 1))];
}

void GathererBuilderPolicy::begin_episode(const Environment& env, Rng&) {
    const WorldState& w = env.world();
    const int n = static_cast<int>(w.agents.size());
    const int cd = cooldown_cfg_ >= 0 ? cooldown_cfg_ : env.config().scripted.build_cooldown;
    cooldown_cfg_ = cd;
    // staggered starts keep gathering waves from hitting the regen stock at
    // the same time
    cooldown_.assign(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i) cooldown_[static_cast<size_t>(i)] = i * cd / std::max(1, n);
    target_.clear();
    reachable_.clear();
    for (int i = 0; i < n; ++i) {
        const AgentState& a = w.agents[static_cast<size_t>(i)];
        // fixed per-agent target: the house type paying the most
        HouseType best = HouseType::Red;
        for (HouseType h : kAllHouseTypes)
            if (a.build_skill[static_cast<size_t>(h)] >
                a.build_skill[static_cast<size_t>(best)])
                best = h;
        target_.push_back(best);
        reachable_.push_back(reachable_from(w.layout, a.location));
    }
}

int GathererBuilderPolicy::move_toward(const Environment& env, int agent_id, Coord goal) const {
    const AgentState& a = env.world().agents[static_cast<size_t>(agent_id)];
    const std::vector<uint8_t> mask = env.legal_actions(agent_id);
    const int dx = goal.x - a.location.x;
    const int dy = goal.y - a.location.y;
    std::vector<Direction> prefs;
    const Direction horiz = dx > 0 ? Direction::Right : Direction::Left;
    const Direction vert = dy > 0 ? Direction::Down : Direction::Up;
    if (std::abs(dx) >= std::abs(dy)) {
        if (dx != 0) prefs.push_back(horiz);
        if (dy != 0) prefs.push_back(vert);
    } else {
        if (dy != 0) prefs.push_back(vert);
        if (dx != 0) prefs.push_back(horiz);
    }
    for (Direction d : prefs) {
        int idx = kFirstMoveAction + static_cast<int>(d);
        if (mask[static_cast<size_t>(idx)]) return idx;
    }
    return 0;
}

int GathererBuilderPolicy::act(const Environment& env, int agent_id, Rng&) {
    int& cd = cooldown_[static_cast<size_t>(agent_id)];
    if (cd > 0) {
        --cd;
        return 0;
    }
    const WorldState& w = env.world();
    const AgentState& a = w.agents[static_cast<size_t>(agent_id)];
    const HouseType house = target_[static_cast<size_t>(agent_id)];
    const auto rec = recipe(house);

    bool have_all = true;
    for (ResourceKind k : rec) have_all = have_all && a.inventory[static_cast<size_t>(k)] >= 1;

    if (have_all) {
        const std::vector<uint8_t> mask = env.legal_actions(agent_id);
        const int build_idx = kFirstBuildAction + static_cast<int>(house);
        if (mask[static_cast<size_t>(build_idx)]) {
            cd = cooldown_cfg_;
            return build_idx;
        }
        // current cell not buildable; walk to the nearest free ordinary cell
        Coord best{-1, -1};
        int best_d = 1 << 30;
        const auto& reach = reachable_[static_cast<size_t>(agent_id)];
        for (int y = 0; y < w.layout.height; ++y) {
            for (int x = 0; x < w.layout.width; ++x) {
                Coord c{x, y};
                if (!reach[static_cast<size_t>(y) * w.layout.width + x]) continue;
                if (w.regen_index(c) >= 0 || w.house_at(c) != nullptr) continue;
                if (w.agent_at(c) >= 0 && w.agent_at(c) != agent_id) continue;
                int d = std::abs(c.x - a.location.x) + std::abs(c.y - a.location.y);
                if (d > 0 && d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
        }
        return best.x >= 0 ? move_toward(env, agent_id, best) : 0;
    }

    // gather the nearest reachable unit of a still-missing kind
    Coord best{-1, -1};
    int best_d = 1 << 30;
    const auto& reach = reachable_[static_cast<size_t>(agent_id)];
    for (size_t i = 0; i < w.layout.regen_cells.size(); ++i) {
        if (w.resource_units[i] <= 0) continue;
        const auto& [c, kind] = w.layout.regen_cells[i];
        bool needed = false;
        for (ResourceKind k : rec)
            needed = needed || (k == kind && a.inventory[static_cast<size_t>(k)] < 1);
        if (!needed) continue;
        if (!reach[static_cast<size_t>(c.y) * w.layout.width + c.x]) continue;
        int d = std::abs(c.x - a.location.x) + std::abs(c.y - a.location.y);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best.x < 0) return 0;  // nothing reachable (isolated stripe): rest
    return move_toward(env, agent_id, best);
}

std::unique_ptr<IAgentPolicy> scripted_policy(ScriptedKind kind, int build_cooldown) {
    switch (kind) {
        case ScriptedKind::NoOp: return std::make_unique<NoOpPolicy>();
        case ScriptedKind::Random: return std::make_unique<RandomAgentPolicy>();
        case ScriptedKind::GathererBuilder:
            return std::make_unique<GathererBuilderPolicy>(build_cooldown);
    }
    return std::make_unique<NoOpPolicy>();
}

void NeuralAgentPolicy::begin_episode(const Environment& env, Rng&) {
    hidden_.assign(env.world().agents.size(),
                   std::vector<double>(
                       static_cast<size_t>(net_.sizes().recurrent ? net_.sizes().recurrent_state
                                                                  : 0),
                       0.0));
}

int NeuralAgentPolicy::act(const Environment& env, int agent_id, Rng& rng) {
    AgentDecision d = agent_act(net_, env.agent_observation(agent_id),
                                env.legal_actions(agent_id),
                                hidden_[static_cast<size_t>(agent_id)], greedy_, rng);
    if (net_.sizes().recurrent) hidden_[static_cast<size_t>(agent_id)] = d.hidden_next;
    return d.action;
}

PlannerAction NeuralPlannerPolicy::act(const Environment& env, Rng& rng) {
    return planner_act(net_, env.planner_observation(), greedy_, rng).settings;
}

}  // namespace gtb
