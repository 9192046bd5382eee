#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace arbmarl::grid {

/// Bus of the distribution grid. All electrical quantities are per unit on
/// the network's base power; voltage bounds are on the squared magnitude.
struct NodeSpec {
    int id = 0;
    double s_max = 0.0;      // apparent-power limit of the nodal injection
    double g_max = 0.0;      // bound on |active injection|
    double tan_theta = 0.0;  // reactive/active ratio bound of the local resource
    double v_min = 0.81;
    double v_max = 1.21;
    std::vector<double> q_demand;  // reactive demand per hour of week, cycled; empty means 0

    double reactive_demand(std::size_t hour) const {
        return q_demand.empty() ? 0.0 : q_demand[hour % q_demand.size()];
    }
};

struct LineSpec {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double s_max = 0.0;
    bool closed = true;
};

struct Network {
    std::vector<NodeSpec> nodes;
    std::vector<LineSpec> lines;
    int slack = 0;
    double base_mva = 1.0;
    std::string description;

    /// Index of the node with the given id in `nodes`; throws InvalidNetwork.
    std::size_t index_of(int node_id) const;
    bool has_node(int node_id) const;
};

inline constexpr int kNoParent = -1;

/// Radial orientation of the closed part of a network. Node and line
/// references are indices into Network::nodes / Network::lines.
struct TopologyOrder {
    std::size_t slack = 0;
    std::vector<std::size_t> order;                    // breadth-first from the slack
    std::vector<int> parent_line;                      // kNoParent for the slack
    std::vector<int> parent_node;                      // kNoParent for the slack
    std::vector<std::vector<std::size_t>> child_lines; // lines leaving each node
    std::vector<std::size_t> depth;
    std::vector<std::size_t> closed_lines;             // indices of closed lines, file order
    std::vector<int> line_parent;                      // oriented upstream end, kNoParent if open
    std::vector<int> line_child;                       // oriented downstream end, kNoParent if open
};

/// Checks parameter invariants and orients the closed lines away from the
/// slack. Throws CycleDetected, Disconnected or InvalidNetwork.
TopologyOrder validate_and_order(const Network& network);

/// Squared voltage at the downstream end of a line carrying (p_flow, q_flow)
/// from parent to child.
double downstream_voltage(double v_parent, const LineSpec& line, double p_flow, double q_flow);

/// Squared voltages of every node obtained by propagating downstream_voltage
/// from the slack along the tree. Flows are indexed by line (open lines ignored).
std::vector<double> propagate_voltages(const Network& network, const TopologyOrder& topo,
                                       double v_slack, const std::vector<double>& p_flow,
                                       const std::vector<double>& q_flow);

Network network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const Network& network);
Network load_network(const std::filesystem::path& path);
void save_network(const Network& network, const std::filesystem::path& path);

}  // namespace arbmarl::grid
