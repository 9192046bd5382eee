#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "arbmarl/envgame.hpp"
#include "arbmarl/errors.hpp"
#include "support/markets.hpp"

using namespace arbmarl;
using namespace arbmarl::env;

namespace {

std::vector<FlexAction> bids_at(const MarketData& d, double scale = 1.0) {
    std::vector<FlexAction> b;
    for (const auto& a : d.aggregators) b.push_back({scale * a.marginal_cost, scale * a.marginal_cost});
    return b;
}

}  // namespace

TEST_CASE("reset returns one three-component observation per aggregator") {
    auto data = testnet::varied_three_bus(2, 24);
    Environment env(data);
    const auto obs = env.reset(1);
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].size() == kStageOneDim);
    CHECK(obs[0][0] == doctest::Approx(1.0 / 24.0));
    CHECK(obs[1][2] == data->prices.p_im[24]);
    CHECK(obs[1][1] == data->aggregators[1].gen_cap[24] - data->aggregators[1].demand[24]);
    CHECK_THROWS_AS(env.reset(2), UnknownWeek);
}

TEST_CASE("time component starts at 1/168 on weekly episodes") {
    Environment env(testnet::flat_two_bus());
    CHECK(env.reset(0)[0][0] == doctest::Approx(1.0 / 168.0));
    CHECK(env.episode_hours() == 168);
}

TEST_CASE("stage-one reward compares against truthful bidding") {
    Environment env(testnet::flat_two_bus());
    env.reset(0);
    auto truthful = env.step_stage1({1.0});
    CHECK(truthful.r_lem[0] == 0.0);
    CHECK(truthful.obs[0][2] == 1.0);
    env.step_stage2({{10.0, 10.0}});

    auto withheld = env.step_stage1({0.0});
    CHECK(withheld.dispatch[0].cost == doctest::Approx(100.0));
    CHECK(withheld.r_lem[0] == doctest::Approx(-185.0));
    CHECK(withheld.obs[0][2] == 0.0);
    CHECK(withheld.obs.size() == 1);
    CHECK(withheld.obs[0].size() == kStageTwoDim);
    CHECK(withheld.obs[0][3] == 40.0);
    CHECK(withheld.obs[0][4] == 60.0);
}

TEST_CASE("actions are clipped and non-finite actions rejected") {
    Environment env(testnet::flat_two_bus());
    env.reset(0);
    auto s1 = env.step_stage1({1.7});
    CHECK(s1.obs[0][2] == 1.0);
    auto s2 = env.step_stage2({{-5.0, 5000.0}});
    CHECK(s2.log.agents[0].up_price == 0.0);
    CHECK(s2.log.agents[0].dw_price == 1000.0);
    CHECK_THROWS_AS(env.step_stage1({std::numeric_limits<double>::quiet_NaN()}), NonFiniteValue);
}

TEST_CASE("stages must alternate") {
    Environment env(testnet::flat_two_bus());
    CHECK_THROWS_AS(env.step_stage1({1.0}), Error);
    env.reset(0);
    CHECK_THROWS_AS(env.step_stage2({{10.0, 10.0}}), Error);
    env.step_stage1({1.0});
    CHECK_THROWS_AS(env.step_stage1({1.0}), Error);
    CHECK_THROWS_AS(env.step_stage2({}), DimensionMismatch);
}

TEST_CASE("uncongested truthful hour costs nothing in the second stage") {
    Environment env(testnet::flat_two_bus());
    env.reset(0);
    env.step_stage1({1.0});
    const auto s2 = env.step_stage2({{10.0, 10.0}});
    CHECK(s2.log.lfm_feasible);
    CHECK(s2.r_lfm[0] == 0.0);
    CHECK(s2.log.agents[0].c_flx == 0.0);
    CHECK(s2.log.agents[0].c_bal == 0.0);
    CHECK(s2.log.agents[0].schedule == doctest::Approx(3.0));
    CHECK(s2.primary_reward[0] == 0.0);
    REQUIRE(s2.next_obs.size() == 1);
    CHECK(s2.next_obs[0][0] == doctest::Approx(2.0 / 168.0));
}

TEST_CASE("congestion buys down-regulation and settles the deviation") {
    testnet::FlatMarket f;
    f.line_rating = 2.0;
    f.strategy = Strategy::Arbitrage;
    Environment env(testnet::flat_two_bus(f));
    env.reset(0);
    env.step_stage1({1.0});
    const auto s2 = env.step_stage2({{10.0, 10.0}});
    REQUIRE(s2.log.lfm_feasible);
    const auto& a = s2.log.agents[0];
    CHECK(a.g_dw > 0.9);
    CHECK(a.g_up == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(a.c_bal == doctest::Approx(60.0 * a.g_dw));
    CHECK(a.r_lfm == -a.c_flx - a.c_bal);
    CHECK(a.r_pr == -a.c_lem - a.c_flx - a.c_bal);
    CHECK(s2.primary_reward[0] == a.r_pr);
}

TEST_CASE("an episode is one transition per hour and ends with no next observation") {
    auto data = testnet::varied_three_bus(1, 24);
    Environment env(data);
    env.reset(0);
    std::size_t steps = 0;
    StageTwoResult last;
    while (!env.done()) {
        env.step_stage1({1.0, 1.0});
        last = env.step_stage2(bids_at(*data));
        ++steps;
    }
    CHECK(steps == 24);
    CHECK(last.done);
    CHECK(last.next_obs.empty());
    CHECK_THROWS_AS(env.step_stage1({1.0, 1.0}), Error);
}

TEST_CASE("reward identities hold and replays are bit-identical") {
    auto data = testnet::varied_three_bus(1, 24, 1.2);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> a1;
    std::vector<std::vector<FlexAction>> a2;
    for (int t = 0; t < 24; ++t) {
        a1.push_back({u(rng), u(rng)});
        a2.push_back({{100 * u(rng), 100 * u(rng)}, {100 * u(rng), 100 * u(rng)}});
    }
    auto play = [&]() {
        Environment env(data);
        env.reset(0);
        std::vector<HourLog> logs;
        for (int t = 0; t < 24; ++t) {
            env.step_stage1(a1[t]);
            logs.push_back(env.step_stage2(a2[t]).log);
        }
        return logs;
    };
    const auto first = play();
    const auto second = play();
    bool any_flex = false;
    for (std::size_t t = 0; t < first.size(); ++t) {
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& a = first[t].agents[i];
            const auto& b = second[t].agents[i];
            CHECK(a.r_pr == -a.c_lem - a.c_flx - a.c_bal);
            CHECK(a.r_lfm == -a.c_flx - a.c_bal);
            CHECK(a.r_lem == a.c_lem_ref - a.c_lem);
            CHECK(a.r_lem <= 1e-12);
            CHECK(a.r_pr == b.r_pr);
            CHECK(a.r_lem == b.r_lem);
            CHECK(a.dlmp == b.dlmp);
            any_flex = any_flex || a.g_up + a.g_dw > 1e-6;
        }
    }
    CHECK(any_flex);
}
