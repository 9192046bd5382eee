#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace arbmarl::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEqual, GreaterEqual, Equal };

/// What a constraint row represents in the flexibility-market model.
enum class RowKind {
    Generic,
    InjectionDefinition,  // g = schedule + up - down
    ReactiveDefinition,   // q = qP - qD
    ActiveBalance,        // nodal active flow conservation; its dual is the DLMP
    ReactiveBalance,
    NodeApparentLimit,    // one polygon facet of the nodal apparent-power disc
    LineApparentLimit,    // one polygon facet of the line apparent-power disc
    ReactiveBand,
    VoltageDrop,
};

const char* to_string(RowKind kind);

struct RowTag {
    RowKind kind = RowKind::Generic;
    int node = -1;  // node index, -1 if not applicable
    int line = -1;  // line index, -1 if not applicable
    int hour = -1;
    bool dlmp_source = false;
};

struct Row {
    std::vector<std::pair<int, double>> coeffs;
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
    RowTag tag;
    std::string name;
};

/// min c'x subject to sparse rows and variable bounds (infinite bounds allowed).
struct LpProblem {
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::string> var_names;
    std::vector<Row> rows;

    int add_variable(double cost, double lower, double upper, std::string name = {});
    int add_row(std::vector<std::pair<int, double>> coeffs, Sense sense, double rhs, RowTag tag = {},
                std::string name = {});

    std::size_t num_vars() const { return cost.size(); }
    std::size_t num_rows() const { return rows.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(LpStatus status);

/// Duals are shadow prices: row_duals[i] is d(objective)/d(rhs_i), and the
/// bound duals are d(objective)/d(bound). At an optimum a binding <= row has
/// a non-positive shadow price and a binding >= row a non-negative one.
struct LpSolution {
    LpStatus status = LpStatus::IterationLimit;
    std::vector<double> x;
    std::vector<double> row_duals;
    std::vector<double> lower_duals;
    std::vector<double> upper_duals;
    double objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;  // max violation of rows and bounds by x
    double dual_residual = 0.0;    // max |c - A'duals| over variables
    double complementarity = 0.0;  // max |slack * dual| over inequality rows and bounds

    bool optimal() const { return status == LpStatus::Optimal; }
    double duality_gap() const;  // |primal - dual| / max(1, |primal|)
};

struct LpOptions {
    double feasibility_tol = 1e-8;
    double gap_tol = 1e-10;
    int max_iterations = 100;
};

/// Primal-dual interior point method on the homogeneous self-dual embedding
/// with Mehrotra predictor-corrector steps. Infeasible and unbounded
/// problems are detected from the embedding's certificates. Dense
/// factorisation; deterministic for a fixed problem.
LpSolution solve_lp(const LpProblem& problem, const LpOptions& options = {});

/// Writes the problem in CPLEX LP text format for cross-checking with
/// external solvers.
void write_lp_format(const LpProblem& problem, std::ostream& out);

}  // namespace arbmarl::lp
