#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "arbmarl/envgame.hpp"
#include "arbmarl/neural.hpp"

namespace arbmarl::train {

struct TrainerConfig {
    double gamma = 0.99;
    std::size_t minibatch = 35;
    std::size_t buffer_capacity = 50000;
    double critic_lr = 5e-4;
    double actor_lr = 1e-4;
    double tau = 0.001;
    std::size_t updates_per_episode = 5;
    double sigma = 0.3;   // exploration noise in normalised action units
    double kappa = 0.999; // per-episode noise decay
    std::size_t episodes = 5000;
    std::size_t eval_every = 50;
    std::vector<int> hidden{64, 64};
    double bid_price_max = 0.0;  // upper end of the flexibility bid range; 0 means the market price cap
    double reward_scale = 1.0;   // rewards are multiplied by this before entering the critics

    void validate() const;  // throws ConfigError
};

struct WeekSplit {
    std::vector<std::size_t> train, eval, test;

    /// The last week evaluates, every fourth week before it (3, 7, ...) is a
    /// test week, the rest train. Throws ConfigError for fewer than 2 weeks.
    static WeekSplit automatic(std::size_t weeks);
    void validate(std::size_t weeks) const;  // disjoint, in range, train non-empty
};

/// TD residual r + gamma * next_q - q; the bootstrap term is dropped at episode ends.
double td_residual(double r, double gamma, double target_q_next, double q, bool terminal = false);

/// Actor, critic, their targets, optimisers and replay of one decision stage
/// of one aggregator.
struct SubAgent {
    nn::Mlp actor, critic, target_actor, target_critic;
    nn::Adam actor_opt, critic_opt;
    nn::ReplayBuffer buffer{1};
    nn::NoiseProcess noise{0.0, 1.0, 0};
    std::size_t obs_offset = 0;  // slice of the joint observation seen by the actor
    std::size_t obs_dim = 0;
    std::size_t act_offset = 0;  // slice of the joint action chosen by the actor
    std::size_t act_dim = 0;
};

/// Smooth L1 loss of the TD residuals over the batch and its gradient with
/// respect to the critic parameters (written to `grad`).
double critic_gradient(SubAgent& agent, const std::vector<SubAgent*>& peers, const nn::Batch& batch, double gamma,
                       nn::Vec& grad);

/// Mean critic value with the agent's action slice replaced by its actor
/// output, and its gradient with respect to the actor parameters.
double actor_gradient(SubAgent& agent, const nn::Batch& batch, nn::Vec& grad);

/// One minibatch step of the critic against smooth L1 of the TD residuals.
/// Target actions come from every peer's target actor applied to its slice of
/// the next joint observation. Returns the loss before the step.
double critic_update(SubAgent& agent, const std::vector<SubAgent*>& peers, const nn::Batch& batch, double gamma);

/// One ascent step of the actor on the mean critic value with its own action
/// slice replaced by the actor output. Returns the objective before the step.
double actor_update(SubAgent& agent, const nn::Batch& batch);

struct StageScore {
    double stage1 = 0.0;  // sum of r_lem (truthful-reference form)
    double stage2 = 0.0;  // sum of r_lfm
    double total() const { return stage1 + stage2; }
};

struct WeekScores {
    std::size_t week = 0;
    std::vector<StageScore> agents;
    std::size_t infeasible_hours = 0;
};

struct JointPolicy {
    std::function<std::vector<double>(const std::vector<env::StageOneObs>&, std::size_t hour)> stage1;
    std::function<std::vector<env::FlexAction>(const std::vector<env::StageTwoObs>&, std::size_t hour)> stage2;
};

/// Plays one week with the given policy. Hour logs are appended to `log` if set.
WeekScores rollout(env::Environment& env, std::size_t week, const JointPolicy& policy,
                   std::vector<env::HourLog>* log = nullptr);

/// No withholding, flexibility offered at the aggregator's marginal cost.
JointPolicy truthful_policy(const MarketData& data);

struct CurvePoint {
    std::size_t episode = 0;
    std::size_t agent = 0;  // aggregator id
    double score = 0.0;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    std::size_t infeasible_hours = 0;
};

/// Hierarchical MADDPG over the two-stage game: each aggregator owns a
/// primary (withholding) and a secondary (flexibility price) sub-agent.
class Trainer {
public:
    Trainer(std::shared_ptr<const MarketData> data, TrainerConfig config, WeekSplit split, std::uint64_t seed);

    /// Runs `episodes` further training episodes. `on_episode` (optional) is
    /// called after each one with its index.
    TrainResult train(std::size_t episodes, const std::function<void(std::size_t)>& on_episode = {});
    TrainResult train() { return train(config_.episodes); }

    /// Noise-free rollouts with the current actors.
    std::vector<WeekScores> evaluate(const std::vector<std::size_t>& weeks);
    JointPolicy greedy_policy() const;

    std::size_t num_agents() const { return primary_.size(); }
    SubAgent& primary(std::size_t i) { return primary_[i]; }
    SubAgent& secondary(std::size_t i) { return secondary_[i]; }
    const TrainerConfig& config() const { return config_; }
    double sigma() const { return primary_.empty() ? 0.0 : primary_.front().noise.sigma(); }
    std::size_t episodes_done() const { return episodes_done_; }

    /// One file per aggregator and stage: actor, critic and both targets.
    void save(const std::filesystem::path& dir) const;
    void load(const std::filesystem::path& dir);

    /// Per-component divisors applied to observations before the networks.
    const nn::Vec& stage1_scale() const { return scale1_; }
    const nn::Vec& stage2_scale() const { return scale2_; }

private:
    void build_agents(std::uint64_t seed);
    nn::Vec joint_stage1(const std::vector<env::StageOneObs>& obs) const;
    nn::Vec joint_stage2(const std::vector<env::StageTwoObs>& obs) const;
    std::vector<double> act_stage1(const nn::Vec& joint, bool explore);
    std::vector<double> act_stage2(const nn::Vec& joint, bool explore);  // normalised prices, 2 per agent
    void update_round();

    std::shared_ptr<const MarketData> data_;
    TrainerConfig config_;
    WeekSplit split_;
    env::Environment env_;
    std::vector<SubAgent> primary_, secondary_;
    nn::Vec scale1_, scale2_;
    double bid_max_ = 0.0;
    std::size_t episodes_done_ = 0;
    std::mt19937_64 week_rng_, sample_rng_;
};

}  // namespace arbmarl::train
