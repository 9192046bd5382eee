#include "arbmarl/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "arbmarl/errors.hpp"

namespace arbmarl {

void PriceSeries::validate() const {
    const std::size_t n = p_im.size();
    if (p_ex.size() != n || p_bal_pos.size() != n || p_bal_neg.size() != n)
        throw SchemaError("price columns differ in length");
    for (const auto* col : {&p_im, &p_ex, &p_bal_pos, &p_bal_neg})
        for (double x : *col)
            if (!std::isfinite(x)) throw NonFiniteValue("non-finite price");
}

const char* to_string(Strategy s) { return s == Strategy::Arbitrage ? "arbitrage" : "stand_alone"; }

Strategy strategy_from_string(const std::string& s) {
    if (s == "arbitrage") return Strategy::Arbitrage;
    if (s == "stand_alone") return Strategy::StandAlone;
    throw ConfigError("unknown strategy '" + s + "' (expected stand_alone or arbitrage)");
}

void MarketData::finalize() {
    topo = grid::validate_and_order(network);
    prices.validate();
    if (episode_hours == 0) throw ConfigError("episode length must be positive");
    if (prices.hours() == 0 || prices.hours() % episode_hours != 0)
        throw BadLength("price series length " + std::to_string(prices.hours()) + " is not a multiple of " +
                        std::to_string(episode_hours));
    if (!(price_cap > 0.0)) throw ConfigError("price cap must be positive");

    std::sort(aggregators.begin(), aggregators.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::set<int> ids, nodes;
    for (auto& agg : aggregators) {
        if (!ids.insert(agg.id).second) throw ConfigError("duplicate aggregator id " + std::to_string(agg.id));
        if (!network.has_node(agg.node)) throw ConfigError("aggregator on unknown node " + std::to_string(agg.node));
        if (agg.node == network.slack) throw ConfigError("no aggregator may sit on the slack node");
        if (!nodes.insert(agg.node).second) throw ConfigError("two aggregators on node " + std::to_string(agg.node));
        if (!std::isfinite(agg.marginal_cost)) throw NonFiniteValue("non-finite marginal cost");
        if (agg.s_cap.empty()) agg.s_cap = agg.gen_cap;
        for (const auto* s : {&agg.gen_cap, &agg.demand, &agg.s_cap}) {
            if (s->size() != prices.hours())
                throw BadLength("aggregator " + std::to_string(agg.id) + " series does not match the price series");
            for (double x : *s)
                if (!std::isfinite(x) || x < 0.0) throw NonFiniteValue("aggregator series must be finite and >= 0");
        }
        for (std::size_t t = 0; t < agg.gen_cap.size(); ++t)
            if (agg.s_cap[t] < agg.gen_cap[t]) throw ConfigError("apparent capacity below generation capacity");
    }
    for (const auto& node : network.nodes)
        if (node.id != network.slack && !nodes.count(node.id))
            throw ConfigError("node " + std::to_string(node.id) + " has no aggregator");
}

}  // namespace arbmarl
