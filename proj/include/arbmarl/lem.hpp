#pragma once

#include <cstddef>
#include <vector>

namespace arbmarl::lem {

/// Bid and market data of one aggregator for one hour. Energies in MWh,
/// prices in EUR/MWh.
struct LemCell {
    double marginal_cost = 0.0;
    double demand = 0.0;
    double gen_cap = 0.0;
    double apparent_cap = 0.0;
    double tan_theta = 0.0;
    double withhold_factor = 1.0;  // offered share of gen_cap, in [0, 1]
    double import_price = 0.0;
    double export_price = 0.0;
};

struct LemDispatch {
    double generation = 0.0;
    double reactive = 0.0;
    double import_ = 0.0;
    double export_ = 0.0;
    double demand = 0.0;
    double cost = 0.0;

    /// Local physical net injection (generation minus demand); grid
    /// exchange materialises at the slack.
    double net_injection() const { return generation - demand; }
};

/// Cells indexed [aggregator][hour].
using LemInput = std::vector<std::vector<LemCell>>;

struct LemResult {
    std::vector<std::vector<LemDispatch>> dispatch;
    double system_cost = 0.0;
};

/// Checks the cell invariants; throws InvalidBid, NegativeCapacity or
/// InvalidMarketInput.
void validate(const LemCell& cell);

/// Cost-minimal dispatch of one cell. The market has no cross-aggregator
/// constraint, so the system optimum separates per (aggregator, hour).
LemDispatch clear_cell(const LemCell& cell);

LemResult clear_lem(const LemInput& input);

/// Cost of the cell under truthful bidding (withhold_factor forced to 1).
double reference_cost(const LemCell& cell);

std::vector<std::vector<double>> reference_costs(const LemInput& input);

}  // namespace arbmarl::lem
