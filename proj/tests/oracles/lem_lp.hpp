#pragma once

// The local energy market of one aggregator-hour written as a generic LP
// (generation, reactive output, import, export) and solved with the tableau
// simplex. Used to cross-check the closed-form clearing rule.

#include <cmath>

#include "arbmarl/lem.hpp"
#include "arbmarl/lp.hpp"
#include "simplex.hpp"

namespace oracle {

struct LemLpResult {
    double cost = 0.0;
    double generation = 0.0;
};

inline LemLpResult lem_lp(const arbmarl::lem::LemCell& c) {
    using namespace arbmarl::lp;
    LpProblem p;
    const double cap = c.withhold_factor * c.gen_cap;
    const int g = p.add_variable(c.marginal_cost, 0.0, cap);
    const int q = p.add_variable(0.0, -kInf, kInf);
    const int im = p.add_variable(c.import_price, 0.0, kInf);
    const int ex = p.add_variable(-c.export_price, 0.0, kInf);
    // energy balance
    p.add_row({{g, 1.0}, {im, 1.0}, {ex, -1.0}}, Sense::Equal, c.demand);
    // apparent power as a box on (g, q) and the reactive band
    p.add_row({{g, 1.0}}, Sense::LessEqual, c.apparent_cap);
    p.add_row({{q, 1.0}, {g, -c.tan_theta}}, Sense::LessEqual, 0.0);
    p.add_row({{q, -1.0}, {g, -c.tan_theta}}, Sense::LessEqual, 0.0);
    const auto r = simplex_solve(p);
    return {r.objective, r.x.empty() ? 0.0 : r.x[static_cast<std::size_t>(g)]};
}

}  // namespace oracle
