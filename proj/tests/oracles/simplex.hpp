#pragma once

// Dense two-phase tableau simplex with Bland's rule. Slow and simple on
// purpose: it shares no code with the interior point solver and is used only
// as a reference in tests.

#include <cmath>
#include <limits>
#include <vector>

#include "arbmarl/lp.hpp"

namespace oracle {

enum class SimplexStatus { Optimal, Infeasible, Unbounded };

struct SimplexResult {
    SimplexStatus status = SimplexStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

namespace detail {

class Tableau {
public:
    // rows: m constraint rows + 1 objective row; columns: variables + rhs
    Tableau(int m, int n) : m_(m), n_(n), t_((m + 1) * (n + 1), 0.0), basis_(m, -1) {}
    double& at(int r, int c) { return t_[r * (n_ + 1) + c]; }
    double& rhs(int r) { return at(r, n_); }
    int& basis(int r) { return basis_[r]; }
    int rows() const { return m_; }
    int cols() const { return n_; }

    void pivot(int pr, int pc) {
        const double p = at(pr, pc);
        for (int c = 0; c <= n_; ++c) at(pr, c) /= p;
        for (int r = 0; r <= m_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (int c = 0; c <= n_; ++c) at(r, c) -= f * at(pr, c);
        }
        basis_[pr] = pc;
    }

    // Minimises the objective row over columns with allowed[c]. Returns false if unbounded.
    bool run(const std::vector<bool>& allowed, double eps) {
        for (int guard = 0; guard < 100000; ++guard) {
            int enter = -1;
            for (int c = 0; c < n_; ++c) {
                if (allowed[c] && at(m_, c) < -eps) {
                    enter = c;
                    break;
                }
            }
            if (enter < 0) return true;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m_; ++r) {
                const double a = at(r, enter);
                if (a <= eps) continue;
                const double ratio = rhs(r) / a;
                if (ratio < best - 1e-12 || (leave >= 0 && std::abs(ratio - best) <= 1e-12 && basis_[r] < basis_[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        return true;
    }

private:
    int m_, n_;
    std::vector<double> t_;
    std::vector<int> basis_;
};

}  // namespace detail

/// Solves min c'x over rows and bounds of an LpProblem.
inline SimplexResult simplex_solve(const arbmarl::lp::LpProblem& p, double eps = 1e-10) {
    using arbmarl::lp::Sense;
    const int nv = static_cast<int>(p.cost.size());

    // x_j = offset_j + sum_k sign * y_k with y >= 0
    struct Map {
        double offset = 0.0;
        int pos = -1, neg = -1;
    };
    std::vector<Map> vmap(nv);
    int ny = 0;
    struct DenseRow {
        std::vector<double> a;
        Sense sense;
        double rhs;
    };
    std::vector<DenseRow> rows;
    std::vector<std::pair<int, double>> ub_rows;  // (y index, bound)
    for (int j = 0; j < nv; ++j) {
        const double lo = p.lower[j], up = p.upper[j];
        if (std::isfinite(lo)) {
            vmap[j].offset = lo;
            vmap[j].pos = ny++;
            if (std::isfinite(up)) ub_rows.push_back({vmap[j].pos, up - lo});
        } else if (std::isfinite(up)) {
            vmap[j].offset = up;
            vmap[j].neg = ny++;
        } else {
            vmap[j].pos = ny++;
            vmap[j].neg = ny++;
        }
    }
    std::vector<double> cy(ny, 0.0);
    for (int j = 0; j < nv; ++j) {
        if (vmap[j].pos >= 0) cy[vmap[j].pos] += p.cost[j];
        if (vmap[j].neg >= 0) cy[vmap[j].neg] -= p.cost[j];
    }
    for (const auto& row : p.rows) {
        DenseRow d{std::vector<double>(ny, 0.0), row.sense, row.rhs};
        for (const auto& [j, a] : row.coeffs) {
            d.rhs -= a * vmap[j].offset;
            if (vmap[j].pos >= 0) d.a[vmap[j].pos] += a;
            if (vmap[j].neg >= 0) d.a[vmap[j].neg] -= a;
        }
        rows.push_back(std::move(d));
    }
    for (const auto& [k, bound] : ub_rows) {
        DenseRow d{std::vector<double>(ny, 0.0), Sense::LessEqual, bound};
        d.a[k] = 1.0;
        rows.push_back(std::move(d));
    }
    for (auto& d : rows) {
        if (d.rhs < 0.0) {
            for (double& a : d.a) a = -a;
            d.rhs = -d.rhs;
            if (d.sense == Sense::LessEqual)
                d.sense = Sense::GreaterEqual;
            else if (d.sense == Sense::GreaterEqual)
                d.sense = Sense::LessEqual;
        }
    }

    const int m = static_cast<int>(rows.size());
    int n_slack = 0, n_art = 0;
    for (const auto& d : rows) {
        if (d.sense != Sense::Equal) ++n_slack;
        if (d.sense != Sense::LessEqual) ++n_art;
    }
    const int n = ny + n_slack + n_art;
    const int art0 = ny + n_slack;
    detail::Tableau t(m, n);
    int si = ny, ai = art0;
    for (int r = 0; r < m; ++r) {
        const auto& d = rows[r];
        for (int k = 0; k < ny; ++k) t.at(r, k) = d.a[k];
        t.rhs(r) = d.rhs;
        if (d.sense == Sense::LessEqual) {
            t.at(r, si) = 1.0;
            t.basis(r) = si++;
        } else {
            if (d.sense == Sense::GreaterEqual) t.at(r, si++) = -1.0;
            t.at(r, ai) = 1.0;
            t.basis(r) = ai++;
        }
    }

    SimplexResult result;
    // phase 1: minimise the sum of artificials
    for (int c = art0; c < n; ++c) t.at(m, c) = 1.0;
    for (int r = 0; r < m; ++r) {
        if (t.basis(r) >= art0)
            for (int c = 0; c <= n; ++c) t.at(m, c) -= t.at(r, c);
    }
    std::vector<bool> allowed(n, true);
    t.run(allowed, eps);
    if (-t.rhs(m) > 1e-7) {
        result.status = SimplexStatus::Infeasible;
        return result;
    }
    // drive remaining (zero-valued) artificials out of the basis
    for (int r = 0; r < m; ++r) {
        if (t.basis(r) < art0) continue;
        for (int c = 0; c < art0; ++c) {
            if (std::abs(t.at(r, c)) > 1e-9) {
                t.pivot(r, c);
                break;
            }
        }
    }
    for (int c = art0; c < n; ++c) allowed[c] = false;

    // phase 2
    for (int c = 0; c <= n; ++c) t.at(m, c) = 0.0;
    for (int k = 0; k < ny; ++k) t.at(m, k) = cy[k];
    for (int r = 0; r < m; ++r) {
        const int bcol = t.basis(r);
        const double f = t.at(m, bcol);
        if (f != 0.0)
            for (int c = 0; c <= n; ++c) t.at(m, c) -= f * t.at(r, c);
    }
    if (!t.run(allowed, eps)) {
        result.status = SimplexStatus::Unbounded;
        return result;
    }
    std::vector<double> y(ny, 0.0);
    for (int r = 0; r < m; ++r)
        if (t.basis(r) < ny) y[t.basis(r)] = t.rhs(r);
    result.x.assign(nv, 0.0);
    double obj = 0.0;
    for (int j = 0; j < nv; ++j) {
        double v = vmap[j].offset;
        if (vmap[j].pos >= 0) v += y[vmap[j].pos];
        if (vmap[j].neg >= 0) v -= y[vmap[j].neg];
        result.x[j] = v;
        obj += p.cost[j] * v;
    }
    result.objective = obj;
    result.status = SimplexStatus::Optimal;
    return result;
}

}  // namespace oracle
