#pragma once

#include <cstddef>
#include <vector>

#include "arbmarl/grid.hpp"
#include "arbmarl/lp.hpp"

namespace arbmarl::lfm {

/// Flexibility offer of the aggregator at one node for one hour. Prices in
/// EUR/MWh, capacities in MWh.
struct FlexBid {
    int node = 0;  // node id
    int hour = 0;  // index into the horizon of the LfmInput
    double up_price = 0.0;
    double dw_price = 0.0;
    double up_cap = 0.0;
    double dw_cap = 0.0;
};

/// Market input over a horizon of hours. Per-node vectors are indexed
/// [hour][node index] and given in MW.
struct LfmInput {
    std::vector<std::vector<double>> schedule;    // scheduled net injection
    std::vector<std::vector<double>> generation;  // scheduled local generation; empty means max(0, schedule)
    std::vector<FlexBid> bids;                    // one per non-slack node and hour
    std::size_t first_hour = 0;                   // hour of week of horizon hour 0 (reactive demand lookup)
    double price_cap = 1000.0;

    std::size_t hours() const { return schedule.size(); }
};

inline constexpr int kPolygonSides = 16;

/// Variable and row indices of the LP built for an LfmInput.
struct LfmModel {
    lp::LpProblem problem;
    double base_mva = 1.0;
    // [hour][node index]; -1 where a node has no such variable (the slack has no bids)
    std::vector<std::vector<int>> up, dw, qp, g, q, v;
    // injection definition row at every non-slack node, active balance row at the slack
    std::vector<std::vector<int>> dlmp_row;
    // [hour][line index]; -1 for open lines
    std::vector<std::vector<int>> p_flow, q_flow;
};

struct BuildOptions {
    bool names = false;  // attach variable and row names (for LP text dumps)
};

/// Builds the flexibility-market LP over the LinDistFlow model. The nodal
/// and line apparent-power discs are replaced by inscribed kPolygonSides-gons.
/// Throws MissingBid, InvalidMarketInput or the grid validation errors.
LfmModel build_lfm(const grid::Network& network, const grid::TopologyOrder& topo, const LfmInput& input,
                   const BuildOptions& options = {});

/// Nodal DLMPs in EUR/MWh, [hour][node index]: the change of the optimal
/// flexibility cost per unit increase of the scheduled injection at the node.
/// This is the active balance multiplier except where the node's own
/// apparent-power limit binds, which the schedule sensitivity also prices.
/// Throws NotOptimal.
std::vector<std::vector<double>> extract_dlmp(const LfmModel& model, const lp::LpSolution& solution);

enum class SettlementMode { Margin, Literal };

/// Net flexibility cost of the aggregator (negative is revenue). Margin mode
/// pays the DLMP magnitude per cleared MWh minus the bid price; literal mode
/// multiplies the price margins by the bid prices.
double settle_flex(double dlmp, const FlexBid& bid, double g_up, double g_dw,
                   SettlementMode mode = SettlementMode::Margin);

struct FlexResult {
    lp::LpStatus status = lp::LpStatus::Optimal;
    bool fast_path = false;  // cleared without an LP solve (no flexibility needed)
    // [hour][node index], MW or EUR/MWh
    std::vector<std::vector<double>> up, dw, dlmp, v, g, q, qp;
    std::vector<std::vector<bool>> dlmp_degenerate;
    // [hour][line index]; zero for open lines
    std::vector<std::vector<double>> p_flow, q_flow;
    std::vector<double> settlement;  // per node index, summed over hours
    double objective = 0.0;          // system flexibility cost, EUR

    bool feasible() const { return status == lp::LpStatus::Optimal; }
};

struct ClearOptions {
    SettlementMode mode = SettlementMode::Margin;
    bool fast_path = true;      // skip the LP when the schedule is strictly feasible without flexibility
    bool verify_dlmp = false;   // flag DLMPs that disagree with a finite-difference re-solve
    double verify_step = 1e-4;  // MW
    bool lazy_facets = true;    // solve with the polygon facets near the operating point, add violated ones
    lp::LpOptions lp;
};

/// Builds, solves and settles the market. An infeasible or unsolved LP is
/// reported through FlexResult::status with zero flexibility, not thrown.
FlexResult clear_lfm(const grid::Network& network, const grid::TopologyOrder& topo, const LfmInput& input,
                     const ClearOptions& options = {});

}  // namespace arbmarl::lfm
