#include "arbmarl/lfm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "arbmarl/errors.hpp"

namespace arbmarl::lfm {

using lp::kInf;
using lp::RowKind;
using lp::RowTag;
using lp::Sense;

namespace {

constexpr double kMinFlexCost = 1e-2;  // €/MWh
const double kFacetCos = std::cos(std::numbers::pi / kPolygonSides);

double facet_angle(int k) { return (2.0 * k + 1.0) * std::numbers::pi / kPolygonSides; }

std::string node_label(const grid::Network& net, std::size_t n, std::size_t h) {
    return std::to_string(net.nodes[n].id) + "_" + std::to_string(h);
}

double generation_of(const LfmInput& in, std::size_t h, std::size_t n) {
    if (!in.generation.empty()) return in.generation[h][n];
    return std::max(0.0, in.schedule[h][n]);
}

void check_input(const grid::Network& net, const grid::TopologyOrder& topo, const LfmInput& in) {
    const std::size_t nn = net.nodes.size();
    if (topo.order.size() != nn) throw InvalidNetwork("topology does not match the network");
    if (in.hours() == 0) throw InvalidMarketInput("flexibility market needs at least one hour");
    for (const auto& row : in.schedule) {
        if (row.size() != nn) throw InvalidMarketInput("schedule row does not cover every node");
        for (double x : row)
            if (!std::isfinite(x)) throw InvalidMarketInput("non-finite schedule");
    }
    if (!in.generation.empty()) {
        if (in.generation.size() != in.hours()) throw InvalidMarketInput("generation horizon mismatch");
        for (const auto& row : in.generation) {
            if (row.size() != nn) throw InvalidMarketInput("generation row does not cover every node");
            for (double x : row)
                if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidMarketInput("generation must be finite and >= 0");
        }
    }
}

// bid lookup [hour][node index]; null where absent
std::vector<std::vector<const FlexBid*>> index_bids(const grid::Network& net, const grid::TopologyOrder& topo,
                                                    const LfmInput& in) {
    std::vector<std::vector<const FlexBid*>> table(in.hours(),
                                                   std::vector<const FlexBid*>(net.nodes.size(), nullptr));
    for (const auto& bid : in.bids) {
        if (bid.hour < 0 || static_cast<std::size_t>(bid.hour) >= in.hours())
            throw InvalidMarketInput("bid hour outside the horizon");
        const std::size_t n = net.index_of(bid.node);
        if (n == topo.slack) throw InvalidMarketInput("the slack node does not bid");
        const bool prices_ok = bid.up_price >= 0.0 && bid.up_price <= in.price_cap && bid.dw_price >= 0.0 &&
                               bid.dw_price <= in.price_cap;
        if (!prices_ok) throw InvalidMarketInput("bid price outside [0, price_cap]");
        if (!(bid.up_cap >= 0.0) || !(bid.dw_cap >= 0.0) || !std::isfinite(bid.up_cap) || !std::isfinite(bid.dw_cap))
            throw InvalidMarketInput("bid capacities must be finite and >= 0");
        auto& slot = table[static_cast<std::size_t>(bid.hour)][n];
        if (slot) throw InvalidMarketInput("duplicate bid for node " + std::to_string(bid.node));
        slot = &bid;
    }
    for (std::size_t h = 0; h < in.hours(); ++h)
        for (std::size_t n = 0; n < net.nodes.size(); ++n)
            if (n != topo.slack && !table[h][n])
                throw MissingBid("no bid for node " + std::to_string(net.nodes[n].id) + " in hour " +
                                 std::to_string(h));
    return table;
}

void add_polygon(lp::LpProblem& p, int a, int b, double s_max, RowTag tag, const std::string& label) {
    if (std::isinf(s_max)) return;
    for (int k = 0; k < kPolygonSides; ++k) {
        const double phi = facet_angle(k);
        p.add_row({{a, std::cos(phi)}, {b, std::sin(phi)}}, Sense::LessEqual, s_max * kFacetCos, tag,
                  label.empty() ? std::string{} : label + "_" + std::to_string(k));
    }
}

bool inside_polygon(double a, double b, double s_max, double margin) {
    if (std::isinf(s_max)) return true;
    for (int k = 0; k < kPolygonSides; ++k) {
        const double phi = facet_angle(k);
        if (std::cos(phi) * a + std::sin(phi) * b > s_max * kFacetCos - margin) return false;
    }
    return true;
}

// Dispatch with no flexibility and no reactive support, propagated through the tree (per unit).
struct ZeroFlexState {
    std::vector<double> g, q, v, p_flow, q_flow;
    bool strictly_feasible = false;
};

ZeroFlexState zero_flex_state(const grid::Network& net, const grid::TopologyOrder& topo,
                              const std::vector<double>& schedule_pu, std::size_t hour_of_week) {
    constexpr double margin = 1e-9;
    const std::size_t nn = net.nodes.size();
    ZeroFlexState st;
    st.g.assign(nn, 0.0);
    st.q.assign(nn, 0.0);
    st.p_flow.assign(net.lines.size(), 0.0);
    st.q_flow.assign(net.lines.size(), 0.0);
    const double base = net.base_mva;

    std::vector<double> sub_g(nn, 0.0), sub_q(nn, 0.0);
    for (std::size_t n = 0; n < nn; ++n) {
        if (n == topo.slack) continue;
        st.g[n] = schedule_pu[n];
        st.q[n] = -net.nodes[n].reactive_demand(hour_of_week) / base;
        sub_g[n] = st.g[n];
        sub_q[n] = st.q[n];
    }
    for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
        const std::size_t n = *it;
        if (n == topo.slack) continue;
        const auto parent = static_cast<std::size_t>(topo.parent_node[n]);
        const auto line = static_cast<std::size_t>(topo.parent_line[n]);
        st.p_flow[line] = -sub_g[n];
        st.q_flow[line] = -sub_q[n];
        sub_g[parent] += sub_g[n];
        sub_q[parent] += sub_q[n];
    }
    st.g[topo.slack] = -sub_g[topo.slack];
    st.q[topo.slack] = -sub_q[topo.slack];

    bool ok = true;
    for (std::size_t n = 0; n < nn && ok; ++n) {
        const auto& node = net.nodes[n];
        if (std::isfinite(node.g_max) && std::abs(st.g[n]) >= node.g_max - margin) ok = false;
        if (!inside_polygon(st.g[n], st.q[n], node.s_max, margin)) ok = false;
    }
    for (std::size_t l : topo.closed_lines) {
        if (!inside_polygon(st.p_flow[l], st.q_flow[l], net.lines[l].s_max, margin)) ok = false;
    }

    // voltages relative to the slack, then place the slack voltage inside the feasible interval
    const auto drops = grid::propagate_voltages(net, topo, 0.0, st.p_flow, st.q_flow);
    const auto& sn = net.nodes[topo.slack];
    double lo = sn.v_min, hi = sn.v_max;
    for (std::size_t n = 0; n < nn; ++n) {
        if (n == topo.slack) continue;
        lo = std::max(lo, net.nodes[n].v_min - drops[n]);
        hi = std::min(hi, net.nodes[n].v_max - drops[n]);
    }
    const bool slack_fixed = sn.v_min == sn.v_max;
    const double v_slack = slack_fixed ? sn.v_min : 0.5 * (lo + hi);
    st.v.assign(nn, 0.0);
    for (std::size_t n = 0; n < nn; ++n) {
        st.v[n] = v_slack + drops[n];
        if (n == topo.slack) continue;
        const auto& node = net.nodes[n];
        if (st.v[n] <= node.v_min + margin || st.v[n] >= node.v_max - margin) ok = false;
    }
    if (!slack_fixed && !(hi - lo > 2.0 * margin)) ok = false;
    st.strictly_feasible = ok;
    return st;
}

LfmInput single_hour(const LfmInput& in, std::size_t h) {
    LfmInput one;
    one.schedule = {in.schedule[h]};
    if (!in.generation.empty()) one.generation = {in.generation[h]};
    for (const auto& bid : in.bids) {
        if (static_cast<std::size_t>(bid.hour) != h) continue;
        FlexBid b = bid;
        b.hour = 0;
        one.bids.push_back(b);
    }
    one.first_hour = in.first_hour + h;
    one.price_cap = in.price_cap;
    return one;
}

}  // namespace

LfmModel build_lfm(const grid::Network& net, const grid::TopologyOrder& topo, const LfmInput& in,
                   const BuildOptions& options) {
    check_input(net, topo, in);
    const auto bids = index_bids(net, topo, in);
    const std::size_t nn = net.nodes.size();
    const std::size_t nl = net.lines.size();
    const std::size_t hours = in.hours();
    const double base = net.base_mva;
    const bool named = options.names;

    LfmModel m;
    m.base_mva = base;
    auto grid_of = [&](std::size_t cols) { return std::vector<std::vector<int>>(hours, std::vector<int>(cols, -1)); };
    m.up = m.dw = m.qp = m.g = m.q = m.v = m.dlmp_row = grid_of(nn);
    m.p_flow = m.q_flow = grid_of(nl);
    auto& p = m.problem;

    auto var = [&](double cost, double lo, double hi, const char* what, const std::string& label) {
        return p.add_variable(cost, lo, hi, named ? std::string(what) + "_" + label : std::string{});
    };
    auto name = [&](const char* what, const std::string& label) {
        return named ? std::string(what) + "_" + label : std::string{};
    };

    for (std::size_t h = 0; h < hours; ++h) {
        const std::size_t hw = in.first_hour + h;
        for (std::size_t n = 0; n < nn; ++n) {
            const auto& node = net.nodes[n];
            const std::string label = named ? node_label(net, n, h) : std::string{};
            const double gmax = node.g_max;
            if (n != topo.slack) {
                const FlexBid& bid = *bids[h][n];
                // a free bid would leave the dispatched quantity undetermined; the floor picks the smallest
                m.up[h][n] = var(std::max(bid.up_price, kMinFlexCost) * base, 0.0, bid.up_cap / base, "up", label);
                m.dw[h][n] = var(std::max(bid.dw_price, kMinFlexCost) * base, 0.0, bid.dw_cap / base, "dw", label);
                m.qp[h][n] = var(0.0, -kInf, kInf, "qp", label);
            }
            m.g[h][n] = var(0.0, -gmax, gmax, "g", label);
            m.q[h][n] = var(0.0, -kInf, kInf, "q", label);
            m.v[h][n] = var(0.0, node.v_min, node.v_max, "v", label);
        }
        for (std::size_t l : topo.closed_lines) {
            const std::string label =
                named ? std::to_string(net.lines[l].from) + "_" + std::to_string(net.lines[l].to) + "_" +
                            std::to_string(h)
                      : std::string{};
            m.p_flow[h][l] = var(0.0, -kInf, kInf, "pl", label);
            m.q_flow[h][l] = var(0.0, -kInf, kInf, "ql", label);
        }

        const int hi = static_cast<int>(h);
        for (std::size_t n = 0; n < nn; ++n) {
            const auto& node = net.nodes[n];
            const int ni = static_cast<int>(n);
            const std::string label = named ? node_label(net, n, h) : std::string{};
            if (n != topo.slack) {
                m.dlmp_row[h][n] =
                    p.add_row({{m.g[h][n], 1.0}, {m.up[h][n], -1.0}, {m.dw[h][n], 1.0}}, Sense::Equal,
                              in.schedule[h][n] / base, {RowKind::InjectionDefinition, ni, -1, hi, true},
                              name("inj", label));
                p.add_row({{m.q[h][n], 1.0}, {m.qp[h][n], -1.0}}, Sense::Equal,
                          -node.reactive_demand(hw) / base, {RowKind::ReactiveDefinition, ni, -1, hi, false},
                          name("qdef", label));
            }
            std::vector<std::pair<int, double>> act{{m.g[h][n], -1.0}}, rea{{m.q[h][n], -1.0}};
            for (std::size_t l : topo.child_lines[n]) {
                act.push_back({m.p_flow[h][l], 1.0});
                rea.push_back({m.q_flow[h][l], 1.0});
            }
            if (topo.parent_line[n] != grid::kNoParent) {
                const auto l = static_cast<std::size_t>(topo.parent_line[n]);
                act.push_back({m.p_flow[h][l], -1.0});
                rea.push_back({m.q_flow[h][l], -1.0});
            }
            const bool slack = n == topo.slack;
            const int balance = p.add_row(std::move(act), Sense::Equal, 0.0, {RowKind::ActiveBalance, ni, -1, hi, slack},
                                          name("pbal", label));
            if (slack) m.dlmp_row[h][n] = balance;
            p.add_row(std::move(rea), Sense::Equal, 0.0, {RowKind::ReactiveBalance, ni, -1, hi, false},
                      name("qbal", label));
            add_polygon(p, m.g[h][n], m.q[h][n], node.s_max / base, {RowKind::NodeApparentLimit, ni, -1, hi, false},
                        name("snode", label));
            if (n != topo.slack) {
                const double t = node.tan_theta;
                const double gen = generation_of(in, h, n) / base;
                for (double side : {1.0, -1.0}) {
                    p.add_row({{m.qp[h][n], side}, {m.up[h][n], -t}, {m.dw[h][n], t}}, Sense::LessEqual, t * gen,
                              {RowKind::ReactiveBand, ni, -1, hi, false},
                              name(side > 0 ? "qband_hi" : "qband_lo", label));
                }
            }
        }
        for (std::size_t l : topo.closed_lines) {
            const auto& line = net.lines[l];
            const int li = static_cast<int>(l);
            const std::string label =
                named ? std::to_string(line.from) + "_" + std::to_string(line.to) + "_" + std::to_string(h)
                      : std::string{};
            add_polygon(p, m.p_flow[h][l], m.q_flow[h][l], line.s_max / base,
                        {RowKind::LineApparentLimit, -1, li, hi, false}, name("sline", label));
            const auto parent = static_cast<std::size_t>(topo.line_parent[l]);
            const auto child = static_cast<std::size_t>(topo.line_child[l]);
            p.add_row({{m.v[h][child], 1.0},
                       {m.v[h][parent], -1.0},
                       {m.p_flow[h][l], 2.0 * line.r},
                       {m.q_flow[h][l], 2.0 * line.x}},
                      Sense::Equal, 0.0, {RowKind::VoltageDrop, -1, li, hi, false}, name("vdrop", label));
        }
    }
    return m;
}

std::vector<std::vector<double>> extract_dlmp(const LfmModel& model, const lp::LpSolution& solution) {
    if (!solution.optimal()) throw NotOptimal("DLMPs need an optimal solution");
    if (solution.row_duals.size() != model.problem.num_rows()) throw NotOptimal("solution does not match the model");
    std::vector<std::vector<double>> eta(model.dlmp_row.size());
    for (std::size_t h = 0; h < eta.size(); ++h) {
        for (int row : model.dlmp_row[h])
            eta[h].push_back(solution.row_duals[static_cast<std::size_t>(row)] / model.base_mva);
    }
    return eta;
}

double settle_flex(double dlmp, const FlexBid& bid, double g_up, double g_dw, SettlementMode mode) {
    if (mode == SettlementMode::Literal)
        return (dlmp - bid.up_price) * bid.up_price + (dlmp - bid.dw_price) * bid.dw_price;
    const double price = std::abs(dlmp);
    return -((price - bid.up_price) * g_up + (price - bid.dw_price) * g_dw);
}

namespace {

enum class HourOutcome { FastPath, Solved, Failed };

bool is_facet(const lp::Row& row) {
    return row.tag.kind == RowKind::NodeApparentLimit || row.tag.kind == RowKind::LineApparentLimit;
}

double activity(const lp::Row& row, const std::vector<double>& x) {
    double s = 0.0;
    for (const auto& [j, c] : row.coeffs) s += c * x[static_cast<std::size_t>(j)];
    return s;
}

// Solves the model with the polygon facets that are close to binding at `guess`,
// then adds every facet the relaxed optimum violates until none is. The result is
// expressed over the full row set, omitted facets carrying zero duals.
lp::LpSolution solve_with_facet_screening(const lp::LpProblem& full, const std::vector<double>& guess,
                                          const lp::LpOptions& options) {
    constexpr double kNearBinding = 0.6;
    constexpr double kViolation = 1e-9;
    const std::size_t m = full.num_rows();
    std::vector<char> active(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = full.rows[i];
        active[i] = !is_facet(row) || activity(row, guess) >= kNearBinding * row.rhs;
    }
    while (true) {
        lp::LpProblem reduced;
        reduced.cost = full.cost;
        reduced.lower = full.lower;
        reduced.upper = full.upper;
        std::vector<std::size_t> kept;
        for (std::size_t i = 0; i < m; ++i) {
            if (!active[i]) continue;
            reduced.rows.push_back(full.rows[i]);
            kept.push_back(i);
        }
        auto sol = lp::solve_lp(reduced, options);
        if (!sol.optimal()) return sol;

        bool added = false;
        for (std::size_t i = 0; i < m; ++i) {
            if (active[i] || activity(full.rows[i], sol.x) <= full.rows[i].rhs + kViolation) continue;
            // facets of one polygon are consecutive, so pull in the neighbours as well
            for (std::size_t j : {i - 1, i, i + 1}) {
                if (j < m && is_facet(full.rows[j]) && full.rows[j].tag.node == full.rows[i].tag.node &&
                    full.rows[j].tag.line == full.rows[i].tag.line)
                    active[j] = 1;
            }
            added = true;
        }
        if (added) continue;

        std::vector<double> duals(m, 0.0);
        for (std::size_t k = 0; k < kept.size(); ++k) duals[kept[k]] = sol.row_duals[k];
        sol.row_duals = std::move(duals);
        return sol;
    }
}

// Clears one hour and fills row h of `out`.
HourOutcome clear_hour(const grid::Network& net, const grid::TopologyOrder& topo, const LfmInput& one,
                const ClearOptions& opt, std::size_t h, FlexResult& out) {
    const std::size_t nn = net.nodes.size();
    const double base = net.base_mva;
    std::vector<double> sched_pu(nn);
    for (std::size_t n = 0; n < nn; ++n) sched_pu[n] = one.schedule[0][n] / base;
    const ZeroFlexState zero = zero_flex_state(net, topo, sched_pu, one.first_hour);

    auto fill_zero = [&]() {
        for (std::size_t n = 0; n < nn; ++n) {
            out.g[h][n] = zero.g[n] * base;
            out.q[h][n] = zero.q[n] * base;
            out.v[h][n] = zero.v[n];
        }
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
            out.p_flow[h][l] = zero.p_flow[l] * base;
            out.q_flow[h][l] = zero.q_flow[l] * base;
        }
    };

    if (opt.fast_path && zero.strictly_feasible) {
        fill_zero();
        return HourOutcome::FastPath;
    }

    const LfmModel model = build_lfm(net, topo, one);
    lp::LpSolution sol;
    if (opt.lazy_facets) {
        std::vector<double> guess(model.problem.num_vars(), 0.0);
        for (std::size_t n = 0; n < nn; ++n) {
            guess[static_cast<std::size_t>(model.g[0][n])] = zero.g[n];
            guess[static_cast<std::size_t>(model.q[0][n])] = zero.q[n];
        }
        for (std::size_t l : topo.closed_lines) {
            guess[static_cast<std::size_t>(model.p_flow[0][l])] = zero.p_flow[l];
            guess[static_cast<std::size_t>(model.q_flow[0][l])] = zero.q_flow[l];
        }
        sol = solve_with_facet_screening(model.problem, guess, opt.lp);
    } else {
        sol = lp::solve_lp(model.problem, opt.lp);
    }
    if (!sol.optimal()) {
        out.status = sol.status;
        fill_zero();
        return HourOutcome::Failed;
    }
    const auto eta = extract_dlmp(model, sol);
    for (std::size_t n = 0; n < nn; ++n) {
        auto value = [&](int idx) { return idx < 0 ? 0.0 : sol.x[static_cast<std::size_t>(idx)]; };
        out.up[h][n] = value(model.up[0][n]) * base;
        out.dw[h][n] = value(model.dw[0][n]) * base;
        out.qp[h][n] = value(model.qp[0][n]) * base;
        out.g[h][n] = value(model.g[0][n]) * base;
        out.q[h][n] = value(model.q[0][n]) * base;
        out.v[h][n] = value(model.v[0][n]);
        out.dlmp[h][n] = eta[0][n];
    }
    for (std::size_t l : topo.closed_lines) {
        out.p_flow[h][l] = sol.x[static_cast<std::size_t>(model.p_flow[0][l])] * base;
        out.q_flow[h][l] = sol.x[static_cast<std::size_t>(model.q_flow[0][l])] * base;
    }
    if (!opt.verify_dlmp) return HourOutcome::Solved;
    for (std::size_t n = 0; n < nn; ++n) {
        auto objective_at = [&](double shift) {
            LfmInput moved = one;
            moved.schedule[0][n] += shift;
            const auto s = lp::solve_lp(build_lfm(net, topo, moved).problem, opt.lp);
            return s.optimal() ? s.objective : kInf;
        };
        const double eps = opt.verify_step;
        const double right = (objective_at(eps) - sol.objective) / eps;
        const double left = (sol.objective - objective_at(-eps)) / eps;
        const double tol = 1e-3 * std::max(1.0, std::abs(eta[0][n]));
        const bool agree = std::abs(right - eta[0][n]) <= tol && std::abs(left - eta[0][n]) <= tol;
        out.dlmp_degenerate[h][n] = !agree;
    }
    return HourOutcome::Solved;
}

}  // namespace

FlexResult clear_lfm(const grid::Network& net, const grid::TopologyOrder& topo, const LfmInput& input,
                     const ClearOptions& opt) {
    check_input(net, topo, input);
    const auto bids = index_bids(net, topo, input);
    const std::size_t hours = input.hours();
    const std::size_t nn = net.nodes.size();
    const std::size_t nl = net.lines.size();

    FlexResult out;
    auto zeros = [&](std::size_t cols) { return std::vector<std::vector<double>>(hours, std::vector<double>(cols, 0.0)); };
    out.up = out.dw = out.dlmp = out.v = out.g = out.q = out.qp = zeros(nn);
    out.p_flow = out.q_flow = zeros(nl);
    out.dlmp_degenerate.assign(hours, std::vector<bool>(nn, false));
    out.settlement.assign(nn, 0.0);
    out.fast_path = true;

    std::vector<bool> solved(hours, false);
    for (std::size_t h = 0; h < hours; ++h) {
        const auto outcome = clear_hour(net, topo, single_hour(input, h), opt, h, out);
        solved[h] = outcome != HourOutcome::Failed;
        if (outcome != HourOutcome::FastPath) out.fast_path = false;
    }
    for (std::size_t h = 0; h < hours; ++h) {
        if (!solved[h]) continue;
        for (std::size_t n = 0; n < nn; ++n) {
            if (n == topo.slack) continue;
            const FlexBid& bid = *bids[h][n];
            out.objective += bid.up_price * out.up[h][n] + bid.dw_price * out.dw[h][n];
            out.settlement[n] += settle_flex(out.dlmp[h][n], bid, out.up[h][n], out.dw[h][n], opt.mode);
        }
    }
    return out;
}

}  // namespace arbmarl::lfm
