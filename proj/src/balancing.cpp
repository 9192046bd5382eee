#include "arbmarl/balancing.hpp"

#include "arbmarl/errors.hpp"

namespace arbmarl::balancing {

double settle_imbalance(double scheduled, double actual, const BalancePrices& prices) {
    if (actual <= scheduled) return prices.neg_price * (scheduled - actual);
    return -prices.pos_price * (actual - scheduled);
}

std::vector<BalanceEntry> settle_imbalance(const std::vector<double>& scheduled, const std::vector<double>& actual,
                                           const std::vector<BalancePrices>& prices) {
    if (scheduled.size() != actual.size() || scheduled.size() != prices.size())
        throw InvalidMarketInput("balancing inputs differ in length");
    std::vector<BalanceEntry> out(scheduled.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(prices[i].pos_price >= 0.0) || !(prices[i].neg_price >= 0.0))
            throw InvalidMarketInput("balancing prices must be >= 0");
        out[i].deviation = actual[i] - scheduled[i];
        out[i].settlement = settle_imbalance(scheduled[i], actual[i], prices[i]);
    }
    return out;
}

}  // namespace arbmarl::balancing
