#include "arbmarl/envgame.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "arbmarl/errors.hpp"

namespace arbmarl::env {

namespace {

double clip(double x, double lo, double hi) {
    if (!std::isfinite(x)) throw NonFiniteValue("non-finite action");
    return std::clamp(x, lo, hi);
}

}  // namespace

Environment::Environment(std::shared_ptr<const MarketData> data, EnvOptions options)
    : data_(std::move(data)), options_(options) {
    if (!data_) throw ConfigError("environment needs market data");
    for (const auto& agg : data_->aggregators) node_index_.push_back(data_->network.index_of(agg.node));
    options_.lfm.mode = data_->settlement;
}

std::vector<StageOneObs> Environment::reset(std::size_t week) {
    if (week >= data_->weeks()) throw UnknownWeek("week " + std::to_string(week) + " is not in the dataset");
    week_ = week;
    t_ = 0;
    started_ = true;
    stage_two_pending_ = false;
    return observe_stage1();
}

std::vector<StageOneObs> Environment::observe_stage1() const {
    const std::size_t h = global_hour();
    const double t = static_cast<double>(t_ + 1) / static_cast<double>(data_->episode_hours);
    std::vector<StageOneObs> obs;
    obs.reserve(num_agents());
    for (const auto& agg : data_->aggregators)
        obs.push_back({t, agg.gen_cap[h] - agg.demand[h], data_->prices.p_im[h]});
    return obs;
}

lem::LemCell Environment::cell(std::size_t i, double a) const {
    const auto& agg = data_->aggregators[i];
    const std::size_t h = global_hour();
    lem::LemCell c;
    c.marginal_cost = agg.marginal_cost;
    c.demand = agg.demand[h];
    c.gen_cap = agg.gen_cap[h];
    c.apparent_cap = agg.s_cap[h];
    c.tan_theta = data_->network.nodes[node_index_[i]].tan_theta;
    c.withhold_factor = a;
    c.import_price = data_->prices.p_im[h];
    c.export_price = data_->prices.p_ex[h];
    return c;
}

StageOneResult Environment::step_stage1(const std::vector<double>& a_lem) {
    if (!started_ || done()) throw Error("step_stage1 called outside an episode");
    if (stage_two_pending_) throw Error("step_stage1 called twice in one hour");
    if (a_lem.size() != num_agents()) throw DimensionMismatch("one withholding action per aggregator expected");

    const std::size_t n = num_agents();
    const std::size_t h = global_hour();
    const double t = static_cast<double>(t_ + 1) / static_cast<double>(data_->episode_hours);
    StageOneResult out;
    a_lem_.resize(n);
    dispatch_.resize(n);
    c_ref_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        a_lem_[i] = clip(a_lem[i], 0.0, 1.0);
        const auto c = cell(i, a_lem_[i]);
        dispatch_[i] = lem::clear_cell(c);
        c_ref_[i] = lem::reference_cost(c);
        out.r_lem.push_back(c_ref_[i] - dispatch_[i].cost);
        const auto& agg = data_->aggregators[i];
        out.obs.push_back({t, agg.gen_cap[h] - agg.demand[h], a_lem_[i], data_->prices.p_bal_pos[h],
                           data_->prices.p_bal_neg[h]});
    }
    out.dispatch = dispatch_;
    stage_two_pending_ = true;
    return out;
}

StageTwoResult Environment::step_stage2(const std::vector<FlexAction>& bids) {
    if (!stage_two_pending_) throw Error("step_stage2 called before step_stage1");
    if (bids.size() != num_agents()) throw DimensionMismatch("one flexibility bid per aggregator expected");

    const std::size_t n = num_agents();
    const std::size_t h = global_hour();
    const auto& net = data_->network;
    const double cap = data_->price_cap;

    lfm::LfmInput in;
    in.schedule.assign(1, std::vector<double>(net.nodes.size(), 0.0));
    in.generation.assign(1, std::vector<double>(net.nodes.size(), 0.0));
    in.first_hour = t_;
    in.price_cap = cap;
    std::vector<FlexAction> clipped(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& agg = data_->aggregators[i];
        const auto& d = dispatch_[i];
        clipped[i] = {clip(bids[i].up_price, 0.0, cap), clip(bids[i].dw_price, 0.0, cap)};
        in.schedule[0][node_index_[i]] = d.net_injection();
        in.generation[0][node_index_[i]] = d.generation;
        lfm::FlexBid bid;
        bid.node = agg.node;
        bid.hour = 0;
        bid.up_price = clipped[i].up_price;
        bid.dw_price = clipped[i].dw_price;
        bid.up_cap = (1.0 - a_lem_[i]) * agg.gen_cap[h];
        bid.dw_cap = std::max(0.0, d.generation);
        in.bids.push_back(bid);
    }

    StageTwoResult out;
    out.flex = lfm::clear_lfm(net, data_->topo, in, options_.lfm);
    const bool feasible = out.flex.feasible();

    std::vector<double> scheduled(n), actual(n);
    std::vector<balancing::BalancePrices> prices(n, {data_->prices.p_bal_pos[h], data_->prices.p_bal_neg[h]});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = node_index_[i];
        scheduled[i] = in.schedule[0][k];
        actual[i] = feasible ? scheduled[i] + out.flex.up[0][k] - out.flex.dw[0][k] : scheduled[i];
    }
    out.balance = balancing::settle_imbalance(scheduled, actual, prices);

    out.log.week = week_;
    out.log.hour = t_;
    out.log.lfm_feasible = feasible;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = node_index_[i];
        AgentHour a;
        a.a_lem = a_lem_[i];
        a.up_price = clipped[i].up_price;
        a.dw_price = clipped[i].dw_price;
        a.schedule = scheduled[i];
        a.generation = dispatch_[i].generation;
        if (feasible) {
            a.g_up = out.flex.up[0][k];
            a.g_dw = out.flex.dw[0][k];
            a.dlmp = out.flex.dlmp[0][k];
            a.c_flx = out.flex.settlement[k];
        }
        a.c_lem = dispatch_[i].cost;
        a.c_lem_ref = c_ref_[i];
        a.c_bal = out.balance[i].settlement;
        a.r_lem = a.c_lem_ref - a.c_lem;
        a.r_lfm = -a.c_flx - a.c_bal;
        a.r_pr = -a.c_lem - a.c_flx - a.c_bal;
        out.r_lfm.push_back(a.r_lfm);
        out.r_pr.push_back(a.r_pr);
        out.primary_reward.push_back(data_->aggregators[i].strategy == Strategy::Arbitrage ? a.r_pr : a.r_lem);
        out.log.agents.push_back(a);
    }

    stage_two_pending_ = false;
    ++t_;
    out.done = done();
    if (!out.done) out.next_obs = observe_stage1();
    return out;
}

}  // namespace arbmarl::env
