#pragma once

#include <vector>

namespace arbmarl::balancing {

/// Imbalance prices of one hour, EUR/MWh.
struct BalancePrices {
    double pos_price = 0.0;  // paid to an aggregator delivering more than scheduled
    double neg_price = 0.0;  // charged to an aggregator delivering less than scheduled
};

struct BalanceEntry {
    double deviation = 0.0;   // actual minus scheduled net injection, MWh
    double settlement = 0.0;  // EUR, positive when the aggregator pays
};

/// Signed imbalance cost of one aggregator-hour: shortfalls pay neg_price,
/// surpluses receive pos_price.
double settle_imbalance(double scheduled, double actual, const BalancePrices& prices);

/// Element-wise settlement over aggregators (or hours); all vectors must have
/// the same length. Throws InvalidMarketInput on negative prices or a length mismatch.
std::vector<BalanceEntry> settle_imbalance(const std::vector<double>& scheduled, const std::vector<double>& actual,
                                           const std::vector<BalancePrices>& prices);

}  // namespace arbmarl::balancing
