#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "arbmarl/balancing.hpp"
#include "arbmarl/lem.hpp"
#include "arbmarl/lfm.hpp"
#include "arbmarl/market_data.hpp"

namespace arbmarl::env {

/// [t, capacity minus demand (MWh), import price]
using StageOneObs = std::array<double, 3>;
/// [t, capacity minus demand, withholding action, positive and negative imbalance price]
using StageTwoObs = std::array<double, 5>;

inline constexpr std::size_t kStageOneDim = 3;
inline constexpr std::size_t kStageTwoDim = 5;

struct FlexAction {
    double up_price = 0.0;
    double dw_price = 0.0;
};

/// Market outcome and rewards of one aggregator in one hour.
struct AgentHour {
    double a_lem = 0.0;
    double up_price = 0.0;
    double dw_price = 0.0;
    double schedule = 0.0;    // scheduled net injection after the LEM, MWh
    double generation = 0.0;  // scheduled generation
    double g_up = 0.0;
    double g_dw = 0.0;
    double dlmp = 0.0;
    double c_lem = 0.0;
    double c_lem_ref = 0.0;  // LEM cost under truthful bidding
    double c_flx = 0.0;
    double c_bal = 0.0;
    double r_lem = 0.0;  // c_lem_ref - c_lem
    double r_lfm = 0.0;  // -c_flx - c_bal
    double r_pr = 0.0;   // -c_lem - c_flx - c_bal
};

struct HourLog {
    std::size_t week = 0;
    std::size_t hour = 0;  // hour within the episode, from 0
    bool lfm_feasible = true;
    std::vector<AgentHour> agents;
};

struct StageOneResult {
    std::vector<lem::LemDispatch> dispatch;
    std::vector<double> r_lem;  // truthful-reference form, reported for every agent
    std::vector<StageTwoObs> obs;
};

struct StageTwoResult {
    lfm::FlexResult flex;
    std::vector<balancing::BalanceEntry> balance;
    std::vector<double> r_lfm;
    std::vector<double> r_pr;
    std::vector<double> primary_reward;  // r_lem for stand-alone aggregators, r_pr for arbitrageurs
    std::vector<StageOneObs> next_obs;   // empty once the episode is done
    bool done = false;
    HourLog log;
};

struct EnvOptions {
    lfm::ClearOptions lfm;
};

/// Hourly two-stage game over one week of the dataset: the LEM clears on the
/// withholding actions, then the flexibility market clears on the price bids
/// and deviations from the schedule are settled on the balancing market.
class Environment {
public:
    explicit Environment(std::shared_ptr<const MarketData> data, EnvOptions options = {});

    std::size_t num_agents() const { return data_->aggregators.size(); }
    std::size_t episode_hours() const { return data_->episode_hours; }
    const MarketData& data() const { return *data_; }

    /// Throws UnknownWeek.
    std::vector<StageOneObs> reset(std::size_t week);

    /// Actions are clipped to [0, 1]. Throws Error when called out of order.
    StageOneResult step_stage1(const std::vector<double>& a_lem);

    /// Prices are clipped to [0, price_cap]. An infeasible flexibility market
    /// is flagged in the log and settles without flexibility.
    StageTwoResult step_stage2(const std::vector<FlexAction>& bids);

    std::size_t hour() const { return t_; }
    std::size_t week() const { return week_; }
    bool done() const { return t_ >= data_->episode_hours; }

    std::vector<StageOneObs> observe_stage1() const;

private:
    std::size_t global_hour() const { return week_ * data_->episode_hours + t_; }
    lem::LemCell cell(std::size_t agent, double a) const;

    std::shared_ptr<const MarketData> data_;
    EnvOptions options_;
    std::vector<std::size_t> node_index_;
    std::size_t week_ = 0;
    std::size_t t_ = 0;
    bool started_ = false;
    bool stage_two_pending_ = false;
    std::vector<double> a_lem_;
    std::vector<lem::LemDispatch> dispatch_;
    std::vector<double> c_ref_;
};

}  // namespace arbmarl::env
