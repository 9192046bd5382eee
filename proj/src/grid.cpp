#include "arbmarl/grid.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <string>
#include <unordered_map>

#include "arbmarl/errors.hpp"
#include "json_util.hpp"

namespace arbmarl::grid {

std::size_t Network::index_of(int node_id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == node_id) return i;
    throw InvalidNetwork("unknown node id " + std::to_string(node_id));
}

bool Network::has_node(int node_id) const {
    for (const auto& n : nodes)
        if (n.id == node_id) return true;
    return false;
}

namespace {

void check_parameters(const Network& net) {
    if (net.nodes.empty()) throw InvalidNetwork("network has no nodes");
    if (!(net.base_mva > 0.0)) throw InvalidNetwork("base_mva must be positive");
    std::unordered_map<int, int> seen;
    for (const auto& n : net.nodes) {
        const std::string where = "node " + std::to_string(n.id);
        if (!seen.emplace(n.id, 1).second) throw InvalidNetwork("duplicate " + where);
        if (!(n.s_max >= 0.0)) throw InvalidNetwork(where + ": s_max must be >= 0");
        if (!(n.g_max >= 0.0)) throw InvalidNetwork(where + ": g_max must be >= 0");
        if (!(n.tan_theta >= 0.0)) throw InvalidNetwork(where + ": tan_theta must be >= 0");
        if (!(n.v_min > 0.0) || !(n.v_min <= n.v_max))
            throw InvalidNetwork(where + ": require 0 < v_min <= v_max");
        for (double q : n.q_demand)
            if (!std::isfinite(q)) throw InvalidNetwork(where + ": non-finite q_demand");
    }
    if (!seen.count(net.slack)) throw InvalidNetwork("slack node " + std::to_string(net.slack) + " not found");
    for (const auto& l : net.lines) {
        const std::string where = "line (" + std::to_string(l.from) + "," + std::to_string(l.to) + ")";
        if (!seen.count(l.from) || !seen.count(l.to)) throw InvalidNetwork(where + ": unknown endpoint");
        if (l.from == l.to) throw InvalidNetwork(where + ": self loop");
        if (!(l.r >= 0.0) || !(l.x >= 0.0)) throw InvalidNetwork(where + ": r and x must be >= 0");
        if (l.closed && !(l.s_max > 0.0)) throw InvalidNetwork(where + ": closed line needs s_max > 0");
    }
}

}  // namespace

TopologyOrder validate_and_order(const Network& network) {
    check_parameters(network);
    const std::size_t n = network.nodes.size();

    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[network.nodes[i].id] = i;

    // adjacency over closed lines, file order keeps the traversal deterministic
    std::vector<std::vector<std::size_t>> incident(n);
    TopologyOrder topo;
    topo.line_parent.assign(network.lines.size(), kNoParent);
    topo.line_child.assign(network.lines.size(), kNoParent);
    for (std::size_t l = 0; l < network.lines.size(); ++l) {
        const auto& line = network.lines[l];
        if (!line.closed) continue;
        topo.closed_lines.push_back(l);
        incident[index[line.from]].push_back(l);
        incident[index[line.to]].push_back(l);
    }

    topo.slack = index[network.slack];
    topo.parent_line.assign(n, kNoParent);
    topo.parent_node.assign(n, kNoParent);
    topo.child_lines.assign(n, {});
    topo.depth.assign(n, 0);
    std::vector<bool> visited(n, false);
    std::vector<bool> line_used(network.lines.size(), false);

    std::queue<std::size_t> frontier;
    frontier.push(topo.slack);
    visited[topo.slack] = true;
    while (!frontier.empty()) {
        const std::size_t u = frontier.front();
        frontier.pop();
        topo.order.push_back(u);
        for (std::size_t l : incident[u]) {
            if (line_used[l]) continue;
            line_used[l] = true;
            const auto& line = network.lines[l];
            const std::size_t v = index[line.from] == u ? index[line.to] : index[line.from];
            if (visited[v]) {
                throw CycleDetected("closed lines form a loop through line (" + std::to_string(line.from) +
                                    "," + std::to_string(line.to) + ")");
            }
            visited[v] = true;
            topo.parent_line[v] = static_cast<int>(l);
            topo.parent_node[v] = static_cast<int>(u);
            topo.depth[v] = topo.depth[u] + 1;
            topo.child_lines[u].push_back(l);
            topo.line_parent[l] = static_cast<int>(u);
            topo.line_child[l] = static_cast<int>(v);
            frontier.push(v);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!visited[i])
            throw Disconnected("node " + std::to_string(network.nodes[i].id) + " is not reachable from the slack");
    }
    return topo;
}

double downstream_voltage(double v_parent, const LineSpec& line, double p_flow, double q_flow) {
    return v_parent - 2.0 * line.r * p_flow - 2.0 * line.x * q_flow;
}

std::vector<double> propagate_voltages(const Network& network, const TopologyOrder& topo, double v_slack,
                                       const std::vector<double>& p_flow, const std::vector<double>& q_flow) {
    std::vector<double> v(network.nodes.size(), 0.0);
    v[topo.slack] = v_slack;
    for (std::size_t u : topo.order) {
        if (u == topo.slack) continue;
        const auto l = static_cast<std::size_t>(topo.parent_line[u]);
        v[u] = downstream_voltage(v[static_cast<std::size_t>(topo.parent_node[u])], network.lines[l], p_flow[l],
                                  q_flow[l]);
    }
    return v;
}

Network network_from_json(const nlohmann::json& doc) {
    using namespace detail;
    check_keys<InvalidNetwork>(doc, {"nodes", "lines", "slack", "base_mva", "description"}, "network");
    Network net;
    net.slack = required<int, InvalidNetwork>(doc, "slack", "network");
    net.base_mva = optional<double, InvalidNetwork>(doc, "base_mva", 1.0, "network");
    net.description = optional<std::string, InvalidNetwork>(doc, "description", "", "network");

    if (!doc.contains("nodes") || !doc.contains("lines")) throw InvalidNetwork("network: 'nodes' and 'lines' are required");
    const auto& nodes = doc.at("nodes");
    if (!nodes.is_array()) throw InvalidNetwork("network: 'nodes' must be an array");
    for (const auto& jn : nodes) {
        check_keys<InvalidNetwork>(jn, {"id", "s_max", "g_max", "tan_theta", "v_min", "v_max", "q_demand"},
                                   "network node");
        NodeSpec n;
        n.id = required<int, InvalidNetwork>(jn, "id", "node");
        n.s_max = limit_or_inf<InvalidNetwork>(jn, "s_max", "node");
        n.g_max = limit_or_inf<InvalidNetwork>(jn, "g_max", "node");
        n.tan_theta = required<double, InvalidNetwork>(jn, "tan_theta", "node");
        n.v_min = required<double, InvalidNetwork>(jn, "v_min", "node");
        n.v_max = required<double, InvalidNetwork>(jn, "v_max", "node");
        n.q_demand = optional<std::vector<double>, InvalidNetwork>(jn, "q_demand", {}, "node");
        net.nodes.push_back(std::move(n));
    }
    const auto& lines = doc.at("lines");
    if (!lines.is_array()) throw InvalidNetwork("network: 'lines' must be an array");
    for (const auto& jl : lines) {
        check_keys<InvalidNetwork>(jl, {"from", "to", "r", "x", "s_max", "closed"}, "network line");
        LineSpec l;
        l.from = required<int, InvalidNetwork>(jl, "from", "line");
        l.to = required<int, InvalidNetwork>(jl, "to", "line");
        l.r = required<double, InvalidNetwork>(jl, "r", "line");
        l.x = required<double, InvalidNetwork>(jl, "x", "line");
        l.s_max = limit_or_inf<InvalidNetwork>(jl, "s_max", "line");
        l.closed = optional<bool, InvalidNetwork>(jl, "closed", true, "line");
        net.lines.push_back(l);
    }
    return net;
}

nlohmann::json network_to_json(const Network& net) {
    using detail::limit_to_json;
    nlohmann::json doc;
    if (!net.description.empty()) doc["description"] = net.description;
    doc["base_mva"] = net.base_mva;
    doc["slack"] = net.slack;
    doc["nodes"] = nlohmann::json::array();
    for (const auto& n : net.nodes) {
        nlohmann::json jn = {{"id", n.id},
                             {"s_max", limit_to_json(n.s_max)},
                             {"g_max", limit_to_json(n.g_max)},
                             {"tan_theta", n.tan_theta},
                             {"v_min", n.v_min},
                             {"v_max", n.v_max}};
        if (!n.q_demand.empty()) jn["q_demand"] = n.q_demand;
        doc["nodes"].push_back(std::move(jn));
    }
    doc["lines"] = nlohmann::json::array();
    for (const auto& l : net.lines) {
        doc["lines"].push_back({{"from", l.from},
                                {"to", l.to},
                                {"r", l.r},
                                {"x", l.x},
                                {"s_max", limit_to_json(l.s_max)},
                                {"closed", l.closed}});
    }
    return doc;
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidNetwork("cannot open network file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidNetwork("network file " + path.string() + ": " + ex.what());
    }
    return network_from_json(doc);
}

void save_network(const Network& network, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidNetwork("cannot write network file " + path.string());
    out << network_to_json(network).dump(2) << '\n';
}

}  // namespace arbmarl::grid
