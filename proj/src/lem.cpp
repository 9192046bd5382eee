#include "arbmarl/lem.hpp"

#include <algorithm>
#include <cmath>

#include "arbmarl/errors.hpp"

namespace arbmarl::lem {

void validate(const LemCell& c) {
    if (!(c.withhold_factor >= 0.0 && c.withhold_factor <= 1.0))
        throw InvalidBid("withhold factor must lie in [0, 1]");
    if (!(c.gen_cap >= 0.0)) throw NegativeCapacity("generation capacity must be >= 0");
    if (!(c.apparent_cap >= c.gen_cap)) throw InvalidMarketInput("apparent capacity below active capacity");
    if (!(c.demand >= 0.0)) throw InvalidMarketInput("demand must be >= 0");
    if (!(c.tan_theta >= 0.0)) throw InvalidMarketInput("tan_theta must be >= 0");
    if (!std::isfinite(c.marginal_cost) || !std::isfinite(c.import_price) || !std::isfinite(c.export_price))
        throw InvalidMarketInput("prices must be finite");
    // an export price above the import price makes the clearing unbounded
    if (c.export_price > c.import_price) throw InvalidMarketInput("export price exceeds import price");
}

LemDispatch clear_cell(const LemCell& c) {
    validate(c);
    const double cap = c.withhold_factor * c.gen_cap;
    LemDispatch d;
    d.demand = c.demand;
    // ties go to the smaller generation
    if (c.marginal_cost < c.export_price) {
        d.generation = cap;
    } else if (c.marginal_cost < c.import_price) {
        d.generation = std::min(cap, c.demand);
    } else {
        d.generation = 0.0;
    }
    d.import_ = std::max(0.0, c.demand - d.generation);
    d.export_ = std::max(0.0, d.generation - c.demand);
    d.reactive = 0.0;
    d.cost = c.marginal_cost * d.generation + c.import_price * d.import_ - c.export_price * d.export_;
    return d;
}

LemResult clear_lem(const LemInput& input) {
    LemResult result;
    result.dispatch.reserve(input.size());
    for (const auto& row : input) {
        auto& out = result.dispatch.emplace_back();
        out.reserve(row.size());
        for (const auto& cell : row) {
            out.push_back(clear_cell(cell));
            result.system_cost += out.back().cost;
        }
    }
    return result;
}

double reference_cost(const LemCell& cell) {
    LemCell truthful = cell;
    truthful.withhold_factor = 1.0;
    return clear_cell(truthful).cost;
}

std::vector<std::vector<double>> reference_costs(const LemInput& input) {
    std::vector<std::vector<double>> out;
    out.reserve(input.size());
    for (const auto& row : input) {
        auto& r = out.emplace_back();
        for (const auto& cell : row) r.push_back(reference_cost(cell));
    }
    return out;
}

}  // namespace arbmarl::lem
