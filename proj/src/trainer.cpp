#include "arbmarl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "arbmarl/errors.hpp"

namespace arbmarl::train {

void TrainerConfig::validate() const {
    auto positive = [](double x, const char* name) {
        if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(name) + " must be positive");
    };
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
    if (!(bid_price_max >= 0.0)) throw ConfigError("bid_price_max must be >= 0");
    positive(critic_lr, "critic_lr");
    positive(actor_lr, "actor_lr");
    positive(reward_scale, "reward_scale");
    if (minibatch == 0) throw ConfigError("minibatch must be positive");
    if (buffer_capacity < minibatch) throw ConfigError("buffer_capacity must hold at least one minibatch");
    if (eval_every == 0) throw ConfigError("eval_every must be positive");
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
    for (int h : hidden)
        if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
}

WeekSplit WeekSplit::automatic(std::size_t weeks) {
    if (weeks < 2) throw ConfigError("automatic week split needs at least 2 weeks");
    WeekSplit s;
    const std::size_t eval = weeks - 1;
    s.eval.push_back(eval);
    for (std::size_t w = 0; w < eval; ++w) {
        if (w % 4 == 3)
            s.test.push_back(w);
        else
            s.train.push_back(w);
    }
    return s;
}

void WeekSplit::validate(std::size_t weeks) const {
    if (train.empty()) throw ConfigError("no training weeks");
    std::set<std::size_t> seen;
    for (const auto* set : {&train, &eval, &test})
        for (std::size_t w : *set) {
            if (w >= weeks) throw UnknownWeek("week " + std::to_string(w) + " is not in the dataset");
            if (!seen.insert(w).second) throw ConfigError("week " + std::to_string(w) + " appears in two sets");
        }
}

double td_residual(double r, double gamma, double target_q_next, double q, bool terminal) {
    return terminal ? r - q : r + gamma * target_q_next - q;
}

namespace {

nn::Mat stack(const nn::Mat& top, const nn::Mat& bottom) {
    nn::Mat m(top.rows() + bottom.rows(), top.cols());
    m << top, bottom;
    return m;
}

}  // namespace

double critic_gradient(SubAgent& agent, const std::vector<SubAgent*>& peers, const nn::Batch& batch, double gamma,
                       nn::Vec& grad) {
    const auto cols = batch.obs.cols();
    nn::Mat next_actions(batch.action.rows(), cols);
    for (const SubAgent* p : peers)
        next_actions.middleRows(p->act_offset, p->act_dim) =
            p->target_actor.predict(batch.next_obs.middleRows(p->obs_offset, p->obs_dim));
    const nn::Mat q_next = agent.target_critic.predict(stack(batch.next_obs, next_actions));
    const nn::Mat q = agent.critic.forward(stack(batch.obs, batch.action));

    nn::Vec zeta(cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        zeta[c] = td_residual(batch.reward[c], gamma, q_next(0, c), q(0, c), batch.not_terminal[c] == 0.0);
    const auto loss = nn::smooth_l1(zeta);
    agent.critic.backward(-loss.grad.transpose(), grad);
    return loss.loss;
}

double critic_update(SubAgent& agent, const std::vector<SubAgent*>& peers, const nn::Batch& batch, double gamma) {
    nn::Vec grad;
    const double loss = critic_gradient(agent, peers, batch, gamma, grad);
    agent.critic_opt.step(agent.critic.params(), grad);
    return loss;
}

double actor_gradient(SubAgent& agent, const nn::Batch& batch, nn::Vec& grad) {
    const auto cols = batch.obs.cols();
    const nn::Mat own = agent.actor.forward(batch.obs.middleRows(agent.obs_offset, agent.obs_dim));
    nn::Mat actions = batch.action;
    actions.middleRows(agent.act_offset, agent.act_dim) = own;
    const nn::Mat q = agent.critic.forward(stack(batch.obs, actions));

    nn::Vec unused;
    const nn::Mat dx = agent.critic.backward(nn::Mat::Constant(1, cols, 1.0 / static_cast<double>(cols)), unused);
    agent.actor.backward(dx.middleRows(batch.obs.rows() + agent.act_offset, agent.act_dim), grad);
    return q.mean();
}

double actor_update(SubAgent& agent, const nn::Batch& batch) {
    nn::Vec grad;
    const double objective = actor_gradient(agent, batch, grad);
    agent.actor_opt.step(agent.actor.params(), -grad);
    return objective;
}

WeekScores rollout(env::Environment& env, std::size_t week, const JointPolicy& policy, std::vector<env::HourLog>* log) {
    WeekScores out;
    out.week = week;
    out.agents.assign(env.num_agents(), {});
    auto obs = env.reset(week);
    for (std::size_t t = 0; t < env.episode_hours(); ++t) {
        const auto s1 = env.step_stage1(policy.stage1(obs, t));
        auto s2 = env.step_stage2(policy.stage2(s1.obs, t));
        for (std::size_t i = 0; i < env.num_agents(); ++i) {
            out.agents[i].stage1 += s1.r_lem[i];
            out.agents[i].stage2 += s2.r_lfm[i];
        }
        if (!s2.log.lfm_feasible) ++out.infeasible_hours;
        if (log) log->push_back(std::move(s2.log));
        obs = std::move(s2.next_obs);
    }
    return out;
}

JointPolicy truthful_policy(const MarketData& data) {
    const std::size_t n = data.aggregators.size();
    std::vector<env::FlexAction> bids;
    for (const auto& agg : data.aggregators) {
        const double p = std::clamp(agg.marginal_cost, 0.0, data.price_cap);
        bids.push_back({p, p});
    }
    JointPolicy policy;
    policy.stage1 = [n](const std::vector<env::StageOneObs>&, std::size_t) { return std::vector<double>(n, 1.0); };
    policy.stage2 = [bids](const std::vector<env::StageTwoObs>&, std::size_t) { return bids; };
    return policy;
}

Trainer::Trainer(std::shared_ptr<const MarketData> data, TrainerConfig config, WeekSplit split, std::uint64_t seed)
    : data_(std::move(data)), config_(std::move(config)), split_(std::move(split)), env_(data_) {
    config_.validate();
    split_.validate(data_->weeks());
    bid_max_ = config_.bid_price_max > 0.0 ? std::min(config_.bid_price_max, data_->price_cap) : data_->price_cap;

    const std::size_t n = data_->aggregators.size();
    if (n == 0) throw ConfigError("no aggregators to train");
    double p_im = 0.0, pos = 0.0, neg = 0.0;
    for (std::size_t h = 0; h < data_->prices.hours(); ++h) {
        p_im = std::max(p_im, std::abs(data_->prices.p_im[h]));
        pos = std::max(pos, std::abs(data_->prices.p_bal_pos[h]));
        neg = std::max(neg, std::abs(data_->prices.p_bal_neg[h]));
    }
    auto nonzero = [](double x) { return x > 0.0 ? x : 1.0; };
    scale1_.resize(static_cast<Eigen::Index>(n * env::kStageOneDim));
    scale2_.resize(static_cast<Eigen::Index>(n * env::kStageTwoDim));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& agg = data_->aggregators[i];
        double net = 0.0;
        for (std::size_t h = 0; h < agg.gen_cap.size(); ++h) net = std::max(net, std::abs(agg.gen_cap[h] - agg.demand[h]));
        scale1_.segment(static_cast<Eigen::Index>(i * env::kStageOneDim), 3) << 1.0, nonzero(net), nonzero(p_im);
        scale2_.segment(static_cast<Eigen::Index>(i * env::kStageTwoDim), 5) << 1.0, nonzero(net), 1.0, nonzero(pos),
            nonzero(neg);
    }
    build_agents(seed);
}

void Trainer::build_agents(std::uint64_t seed) {
    const std::size_t n = data_->aggregators.size();
    std::seed_seq seq{seed, std::uint64_t{0x5eed}};
    std::vector<std::uint64_t> seeds(4 * n + 2);
    seq.generate(seeds.begin(), seeds.end());
    week_rng_.seed(seeds[4 * n]);
    sample_rng_.seed(seeds[4 * n + 1]);

    auto make = [&](SubAgent& a, std::size_t i, std::size_t obs_dim, std::size_t act_dim, std::uint64_t s,
                    std::uint64_t noise_seed) {
        std::mt19937_64 rng(s);
        const auto joint_obs = n * obs_dim, joint_act = n * act_dim;
        std::vector<int> actor_sizes{static_cast<int>(obs_dim)}, critic_sizes{static_cast<int>(joint_obs + joint_act)};
        for (int h : config_.hidden) {
            actor_sizes.push_back(h);
            critic_sizes.push_back(h);
        }
        actor_sizes.push_back(static_cast<int>(act_dim));
        critic_sizes.push_back(1);
        a.actor = nn::Mlp(actor_sizes, nn::OutputKind::Logistic);
        a.critic = nn::Mlp(critic_sizes, nn::OutputKind::Linear);
        a.actor.init(rng);
        a.critic.init(rng);
        a.target_actor = a.actor;
        a.target_critic = a.critic;
        a.actor_opt = nn::Adam(a.actor.num_params(), config_.actor_lr);
        a.critic_opt = nn::Adam(a.critic.num_params(), config_.critic_lr);
        a.buffer = nn::ReplayBuffer(config_.buffer_capacity);
        a.noise = nn::NoiseProcess(config_.sigma, config_.kappa, noise_seed);
        a.obs_offset = i * obs_dim;
        a.obs_dim = obs_dim;
        a.act_offset = i * act_dim;
        a.act_dim = act_dim;
    };
    primary_.assign(n, {});
    secondary_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        make(primary_[i], i, env::kStageOneDim, 1, seeds[4 * i], seeds[4 * i + 2]);
        make(secondary_[i], i, env::kStageTwoDim, 2, seeds[4 * i + 1], seeds[4 * i + 3]);
    }
}

nn::Vec Trainer::joint_stage1(const std::vector<env::StageOneObs>& obs) const {
    nn::Vec v(scale1_.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t k = 0; k < env::kStageOneDim; ++k) v[static_cast<Eigen::Index>(i * env::kStageOneDim + k)] = obs[i][k];
    return v.cwiseQuotient(scale1_);
}

nn::Vec Trainer::joint_stage2(const std::vector<env::StageTwoObs>& obs) const {
    nn::Vec v(scale2_.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t k = 0; k < env::kStageTwoDim; ++k) v[static_cast<Eigen::Index>(i * env::kStageTwoDim + k)] = obs[i][k];
    return v.cwiseQuotient(scale2_);
}

std::vector<double> Trainer::act_stage1(const nn::Vec& joint, bool explore) {
    std::vector<double> a;
    for (auto& ag : primary_) {
        const double mu = ag.actor.predict(joint.segment(ag.obs_offset, ag.obs_dim))(0, 0);
        a.push_back(explore ? nn::noisy_action(mu, ag.noise.draw(), 0.0, 1.0) : mu);
    }
    return a;
}

std::vector<double> Trainer::act_stage2(const nn::Vec& joint, bool explore) {
    std::vector<double> u;
    for (auto& ag : secondary_) {
        const nn::Mat mu = ag.actor.predict(joint.segment(ag.obs_offset, ag.obs_dim));
        for (int k = 0; k < 2; ++k) u.push_back(explore ? nn::noisy_action(mu(k, 0), ag.noise.draw(), 0.0, 1.0) : mu(k, 0));
    }
    return u;
}

void Trainer::update_round() {
    auto update_role = [&](std::vector<SubAgent>& role) {
        std::vector<SubAgent*> peers;
        for (auto& a : role) peers.push_back(&a);
        for (auto& a : role) {
            if (a.buffer.size() < config_.minibatch) continue;
            const auto batch = a.buffer.sample(config_.minibatch, sample_rng_);
            critic_update(a, peers, batch, config_.gamma);
            actor_update(a, batch);
        }
        for (auto& a : role) {
            nn::soft_update(a.target_actor.params(), a.actor.params(), config_.tau);
            nn::soft_update(a.target_critic.params(), a.critic.params(), config_.tau);
        }
    };
    update_role(primary_);
    update_role(secondary_);
}

TrainResult Trainer::train(std::size_t episodes, const std::function<void(std::size_t)>& on_episode) {
    TrainResult result;
    const std::size_t n = num_agents();
    const std::size_t T = env_.episode_hours();
    std::uniform_int_distribution<std::size_t> pick(0, split_.train.size() - 1);

    std::vector<nn::Vec> j1(T + 1), j2(T + 1), a1(T), a2(T);
    std::vector<std::vector<double>> r1(T), r2(T);
    for (std::size_t e = 0; e < episodes; ++e) {
        const std::size_t week = split_.train[pick(week_rng_)];
        auto obs = env_.reset(week);
        for (std::size_t t = 0; t < T; ++t) {
            j1[t] = joint_stage1(obs);
            const auto a = act_stage1(j1[t], true);
            const auto s1 = env_.step_stage1(a);
            j2[t] = joint_stage2(s1.obs);
            const auto u = act_stage2(j2[t], true);
            std::vector<env::FlexAction> bids(n);
            for (std::size_t i = 0; i < n; ++i) bids[i] = {u[2 * i] * bid_max_, u[2 * i + 1] * bid_max_};
            auto s2 = env_.step_stage2(bids);
            if (!s2.log.lfm_feasible) ++result.infeasible_hours;

            a1[t].resize(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) a1[t][static_cast<Eigen::Index>(i)] = s2.log.agents[i].a_lem;
            a2[t].resize(static_cast<Eigen::Index>(2 * n));
            for (std::size_t i = 0; i < n; ++i) {
                a2[t][static_cast<Eigen::Index>(2 * i)] = s2.log.agents[i].up_price / bid_max_;
                a2[t][static_cast<Eigen::Index>(2 * i + 1)] = s2.log.agents[i].dw_price / bid_max_;
            }
            r1[t] = s2.primary_reward;
            r2[t] = s2.r_lfm;
            if (!s2.done) obs = std::move(s2.next_obs);
        }
        j1[T] = j1[T - 1];
        j2[T] = j2[T - 1];
        for (std::size_t t = 0; t < T; ++t) {
            const bool terminal = t + 1 == T;
            for (std::size_t i = 0; i < n; ++i) {
                primary_[i].buffer.push({j1[t], a1[t], config_.reward_scale * r1[t][i], j1[t + 1], terminal});
                secondary_[i].buffer.push({j2[t], a2[t], config_.reward_scale * r2[t][i], j2[t + 1], terminal});
            }
        }
        for (std::size_t k = 0; k < config_.updates_per_episode; ++k) update_round();
        for (auto& a : primary_) a.noise.decay();
        for (auto& a : secondary_) a.noise.decay();
        ++episodes_done_;

        if (episodes_done_ % config_.eval_every == 0 && !split_.eval.empty()) {
            const auto scores = evaluate(split_.eval);
            for (std::size_t i = 0; i < n; ++i) {
                double total = 0.0;
                for (const auto& w : scores) total += w.agents[i].total();
                result.curve.push_back({episodes_done_, static_cast<std::size_t>(data_->aggregators[i].id),
                                        total / static_cast<double>(scores.size())});
            }
        }
        if (on_episode) on_episode(episodes_done_);
    }
    return result;
}

JointPolicy Trainer::greedy_policy() const {
    JointPolicy p;
    p.stage1 = [this](const std::vector<env::StageOneObs>& obs, std::size_t) {
        const nn::Vec j = joint_stage1(obs);
        std::vector<double> a;
        for (const auto& ag : primary_) a.push_back(ag.actor.predict(j.segment(ag.obs_offset, ag.obs_dim))(0, 0));
        return a;
    };
    p.stage2 = [this](const std::vector<env::StageTwoObs>& obs, std::size_t) {
        const nn::Vec j = joint_stage2(obs);
        std::vector<env::FlexAction> bids;
        for (const auto& ag : secondary_) {
            const nn::Mat mu = ag.actor.predict(j.segment(ag.obs_offset, ag.obs_dim));
            bids.push_back({mu(0, 0) * bid_max_, mu(1, 0) * bid_max_});
        }
        return bids;
    };
    return p;
}

std::vector<WeekScores> Trainer::evaluate(const std::vector<std::size_t>& weeks) {
    env::Environment env(data_);
    const auto policy = greedy_policy();
    std::vector<WeekScores> out;
    for (std::size_t w : weeks) out.push_back(rollout(env, w, policy));
    return out;
}

namespace {

std::filesystem::path sub_agent_file(const std::filesystem::path& dir, int id, const char* role) {
    return dir / ("agent" + std::to_string(id) + "_" + role + ".bin");
}

void restore(SubAgent& a, const std::filesystem::path& file) {
    auto nets = nn::load_networks(file);
    if (nets.size() != 4) throw CheckpointError(file.string() + " does not hold four networks");
    const nn::Mlp* mine[4] = {&a.actor, &a.critic, &a.target_actor, &a.target_critic};
    for (int k = 0; k < 4; ++k)
        if (nets[k].sizes() != mine[k]->sizes() || nets[k].output_kind() != mine[k]->output_kind())
            throw CheckpointError(file.string() + " does not match the scenario's network shapes");
    a.actor = std::move(nets[0]);
    a.critic = std::move(nets[1]);
    a.target_actor = std::move(nets[2]);
    a.target_critic = std::move(nets[3]);
}

}  // namespace

void Trainer::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < num_agents(); ++i) {
        const int id = data_->aggregators[i].id;
        for (auto [a, role] : {std::pair{&primary_[i], "primary"}, std::pair{&secondary_[i], "secondary"}})
            nn::save_networks(sub_agent_file(dir, id, role), {&a->actor, &a->critic, &a->target_actor, &a->target_critic});
    }
}

void Trainer::load(const std::filesystem::path& dir) {
    for (std::size_t i = 0; i < num_agents(); ++i) {
        const int id = data_->aggregators[i].id;
        restore(primary_[i], sub_agent_file(dir, id, "primary"));
        restore(secondary_[i], sub_agent_file(dir, id, "secondary"));
    }
}

}  // namespace arbmarl::train
