#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arbmarl/grid.hpp"
#include "arbmarl/lfm.hpp"

namespace arbmarl {

/// Hourly prices in EUR/MWh over the whole dataset.
struct PriceSeries {
    std::vector<double> p_im, p_ex, p_bal_pos, p_bal_neg;

    std::size_t hours() const { return p_im.size(); }
    /// Throws NonFiniteValue, BadLength or SchemaError.
    void validate() const;
};

enum class Strategy { StandAlone, Arbitrage };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// One aggregator managing the resources of one node. Series are hourly over
/// the whole dataset, in MWh (MVA for apparent capacity).
struct Aggregator {
    int id = 0;
    int node = 0;
    double marginal_cost = 0.0;
    Strategy strategy = Strategy::StandAlone;
    std::vector<double> gen_cap, demand, s_cap;
};

struct MarketData {
    grid::Network network;
    grid::TopologyOrder topo;
    PriceSeries prices;
    std::vector<Aggregator> aggregators;  // ordered by id
    std::size_t episode_hours = 168;
    double price_cap = 1000.0;
    lfm::SettlementMode settlement = lfm::SettlementMode::Margin;

    std::size_t weeks() const { return episode_hours ? prices.hours() / episode_hours : 0; }

    /// Orients the network and checks consistency: one aggregator per non-slack
    /// node, series lengths, a whole number of episodes. Throws ConfigError,
    /// BadLength or the grid errors.
    void finalize();
};

}  // namespace arbmarl
