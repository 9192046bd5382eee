#include "arbmarl/lp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "arbmarl/errors.hpp"

namespace arbmarl::lp {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

const char* to_string(RowKind kind) {
    switch (kind) {
        case RowKind::Generic: return "generic";
        case RowKind::InjectionDefinition: return "injection_definition";
        case RowKind::ReactiveDefinition: return "reactive_definition";
        case RowKind::ActiveBalance: return "active_balance";
        case RowKind::ReactiveBalance: return "reactive_balance";
        case RowKind::NodeApparentLimit: return "node_apparent_limit";
        case RowKind::LineApparentLimit: return "line_apparent_limit";
        case RowKind::ReactiveBand: return "reactive_band";
        case RowKind::VoltageDrop: return "voltage_drop";
    }
    return "unknown";
}

const char* to_string(LpStatus status) {
    switch (status) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

int LpProblem::add_variable(double c, double lo, double up, std::string name) {
    cost.push_back(c);
    lower.push_back(lo);
    upper.push_back(up);
    var_names.push_back(std::move(name));
    return static_cast<int>(cost.size()) - 1;
}

int LpProblem::add_row(std::vector<std::pair<int, double>> coeffs, Sense sense, double rhs, RowTag tag,
                       std::string name) {
    rows.push_back(Row{std::move(coeffs), sense, rhs, tag, std::move(name)});
    return static_cast<int>(rows.size()) - 1;
}

double LpSolution::duality_gap() const {
    return std::abs(objective - dual_objective) / std::max(1.0, std::abs(objective));
}

namespace {

// Where a row of the internal (A, b) or (G, h) system came from.
enum class Origin { RowEq, RowLe, RowGe, Lower, Upper, Fixed };

struct Source {
    Origin origin;
    int index;  // row or variable index in the user problem
};

struct StandardForm {
    SparseMat A, G;
    VectorXd b, h, c;
    std::vector<Source> eq_src, ineq_src;
    std::vector<int> dropped_rows;  // linearly dependent equality rows (consistent)
};

void check_problem(const LpProblem& p) {
    const std::size_t n = p.cost.size();
    if (p.lower.size() != n || p.upper.size() != n) throw LpError("bound vectors do not match the cost vector");
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(p.cost[j])) throw LpError("non-finite cost");
        if (std::isnan(p.lower[j]) || std::isnan(p.upper[j]) || p.lower[j] > p.upper[j] ||
            p.lower[j] == kInf || p.upper[j] == -kInf)
            throw LpError("invalid bounds on variable " + std::to_string(j));
    }
    for (const auto& row : p.rows) {
        if (!std::isfinite(row.rhs)) throw LpError("non-finite right-hand side");
        for (const auto& [j, a] : row.coeffs) {
            if (j < 0 || static_cast<std::size_t>(j) >= n) throw LpError("row references unknown variable");
            if (!std::isfinite(a)) throw LpError("non-finite coefficient");
        }
    }
}

// Returns false if an empty row is inconsistent.
bool to_standard_form(const LpProblem& p, StandardForm& sf) {
    const int n = static_cast<int>(p.cost.size());
    std::vector<std::map<int, double>> eq_rows, ineq_rows;
    std::vector<double> b, h;

    auto dense_row = [&](const Row& row) {
        std::map<int, double> r;
        for (const auto& [j, a] : row.coeffs) r[j] += a;
        for (auto it = r.begin(); it != r.end();) it = it->second == 0.0 ? r.erase(it) : std::next(it);
        return r;
    };

    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const Row& row = p.rows[i];
        auto coeffs = dense_row(row);
        const int idx = static_cast<int>(i);
        if (coeffs.empty()) {
            const bool ok = row.sense == Sense::Equal          ? row.rhs == 0.0
                            : row.sense == Sense::LessEqual    ? row.rhs >= 0.0
                                                               : row.rhs <= 0.0;
            if (!ok) return false;
            continue;
        }
        switch (row.sense) {
            case Sense::Equal:
                eq_rows.push_back(std::move(coeffs));
                b.push_back(row.rhs);
                sf.eq_src.push_back({Origin::RowEq, idx});
                break;
            case Sense::LessEqual:
                ineq_rows.push_back(std::move(coeffs));
                h.push_back(row.rhs);
                sf.ineq_src.push_back({Origin::RowLe, idx});
                break;
            case Sense::GreaterEqual:
                for (auto& [j, a] : coeffs) a = -a;
                ineq_rows.push_back(std::move(coeffs));
                h.push_back(-row.rhs);
                sf.ineq_src.push_back({Origin::RowGe, idx});
                break;
        }
    }
    for (int j = 0; j < n; ++j) {
        const double lo = p.lower[static_cast<std::size_t>(j)];
        const double up = p.upper[static_cast<std::size_t>(j)];
        if (lo == up) {
            eq_rows.push_back({{j, 1.0}});
            b.push_back(lo);
            sf.eq_src.push_back({Origin::Fixed, j});
            continue;
        }
        if (std::isfinite(lo)) {
            ineq_rows.push_back({{j, -1.0}});
            h.push_back(-lo);
            sf.ineq_src.push_back({Origin::Lower, j});
        }
        if (std::isfinite(up)) {
            ineq_rows.push_back({{j, 1.0}});
            h.push_back(up);
            sf.ineq_src.push_back({Origin::Upper, j});
        }
    }

    auto fill = [n](const std::vector<std::map<int, double>>& rows, SparseMat& M) {
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (const auto& [j, a] : rows[i]) trips.emplace_back(static_cast<int>(i), j, a);
        M.resize(static_cast<Eigen::Index>(rows.size()), n);
        M.setFromTriplets(trips.begin(), trips.end());
    };
    fill(eq_rows, sf.A);
    fill(ineq_rows, sf.G);
    sf.b = Eigen::Map<VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    sf.h = Eigen::Map<VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    sf.c = Eigen::Map<const VectorXd>(p.cost.data(), n);
    return true;
}

// Removes linearly dependent equality rows. Returns false if they are inconsistent.
bool drop_dependent_rows(StandardForm& sf) {
    const Eigen::Index p = sf.A.rows();
    if (p == 0) return true;
    const MatrixXd dense = MatrixXd(sf.A);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(dense.transpose());
    qr.setThreshold(1e-11);
    const Eigen::Index rank = qr.rank();
    if (rank == p) return true;

    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < rank; ++k) keep.push_back(qr.colsPermutation().indices()(k));
    std::sort(keep.begin(), keep.end());

    MatrixXd A(static_cast<Eigen::Index>(keep.size()), dense.cols());
    VectorXd b(static_cast<Eigen::Index>(keep.size()));
    std::vector<Source> src;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        A.row(static_cast<Eigen::Index>(k)) = dense.row(keep[k]);
        b(static_cast<Eigen::Index>(k)) = sf.b(keep[k]);
        src.push_back(sf.eq_src[static_cast<std::size_t>(keep[k])]);
    }
    // a dependent row must equal the same combination of the kept right-hand sides
    const MatrixXd At = A.transpose();
    Eigen::HouseholderQR<MatrixXd> kept(At);
    for (Eigen::Index i = 0; i < p; ++i) {
        if (std::binary_search(keep.begin(), keep.end(), i)) continue;
        const VectorXd alpha = kept.solve(VectorXd(dense.row(i).transpose()));
        const double scale = 1.0 + std::abs(sf.b(i)) + b.cwiseAbs().maxCoeff();
        if (std::abs(alpha.dot(b) - sf.b(i)) > 1e-9 * scale) return false;
        sf.dropped_rows.push_back(static_cast<int>(i));
    }
    sf.A = A.sparseView();
    sf.b = std::move(b);
    sf.eq_src = std::move(src);
    return true;
}

// Newton systems
//   [0 A' G'; A 0 0; G 0 -W^{-1}] [dx; dy; dz] = [r1; r2; r3]
// solved on the null space of A: dx = dx_p + N dw with A dx_p = r2.
class KktSolver {
public:
    KktSolver(const SparseMat& A, const SparseMat& G) : A_(A), G_(G) {
        const Eigen::Index n = A.cols();
        const Eigen::Index p = A.rows();
        if (p > 0) {
            Eigen::HouseholderQR<MatrixXd> qr(MatrixXd(A.transpose()));
            const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
            Q1_ = Q.leftCols(p);
            N_ = Q.rightCols(n - p);
            R_ = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        } else {
            N_ = MatrixXd::Identity(n, n);
        }
        GN_ = G * N_;
    }

    bool factor(const VectorXd& w) {
        w_ = w;
        // refinement only pays off once the scaling has become badly conditioned
        refine_ = w.size() > 0 && w.maxCoeff() > 1e6 * w.minCoeff();
        const Eigen::Index k = N_.cols();
        const MatrixXd S = w.cwiseSqrt().asDiagonal() * GN_;
        MatrixXd M = MatrixXd::Zero(k, k);
        M.selfadjointView<Eigen::Lower>().rankUpdate(S.transpose());
        M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
        llt_.compute(M);
        if (llt_.info() == Eigen::Success) return true;
        const double scale = std::max(1e-300, M.diagonal().cwiseAbs().maxCoeff());
        for (double reg = 1e-14; reg <= 1e-6; reg *= 100.0) {
            llt_.compute(M + reg * scale * MatrixXd::Identity(k, k));
            if (llt_.info() == Eigen::Success) return true;
        }
        return false;
    }

    void solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& dx, VectorXd& dy,
               VectorXd& dz) const {
        solve_once(r1, r2, r3, dx, dy, dz);
        if (!refine_) return;
        // one step of iterative refinement against the unreduced system
        const VectorXd e1 = r1 - A_.transpose() * dy - G_.transpose() * dz;
        const VectorXd e2 = r2 - A_ * dx;
        const VectorXd e3 = r3 - G_ * dx + dz.cwiseQuotient(w_);
        VectorXd cx, cy, cz;
        solve_once(e1, e2, e3, cx, cy, cz);
        dx += cx;
        dy += cy;
        dz += cz;
    }

private:
    VectorXd apply_h(const VectorXd& v) const { return G_.transpose() * w_.cwiseProduct(G_ * v); }

    void solve_once(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& dx, VectorXd& dy,
                    VectorXd& dz) const {
        const VectorXd f = r1 + G_.transpose() * w_.cwiseProduct(r3);
        VectorXd dxp = VectorXd::Zero(A_.cols());
        if (A_.rows() > 0) dxp = Q1_ * R_.transpose().triangularView<Eigen::Lower>().solve(r2);
        dx = dxp;
        if (N_.cols() > 0) {
            const VectorXd rhs = N_.transpose() * (f - apply_h(dxp));
            dx += N_ * llt_.solve(rhs);
        }
        if (A_.rows() > 0)
            dy = R_.triangularView<Eigen::Upper>().solve(Q1_.transpose() * (f - apply_h(dx)));
        else
            dy.resize(0);
        dz = w_.cwiseProduct(G_ * dx - r3);
    }

    const SparseMat& A_;
    const SparseMat& G_;
    MatrixXd Q1_, N_, R_, GN_;
    VectorXd w_;
    bool refine_ = false;
    Eigen::LLT<MatrixXd> llt_;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
    double a = kInf;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    return a;
}

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void fill_solution(const LpProblem& p, const StandardForm& sf, const VectorXd& x, const VectorXd& y,
                   const VectorXd& z, LpSolution& out) {
    const std::size_t n = p.cost.size();
    out.x.assign(x.data(), x.data() + x.size());
    out.row_duals.assign(p.rows.size(), 0.0);
    out.lower_duals.assign(n, 0.0);
    out.upper_duals.assign(n, 0.0);
    for (std::size_t k = 0; k < sf.eq_src.size(); ++k) {
        const auto& src = sf.eq_src[k];
        const double v = -y(static_cast<Eigen::Index>(k));
        if (src.origin == Origin::Fixed)
            out.lower_duals[static_cast<std::size_t>(src.index)] = v;
        else
            out.row_duals[static_cast<std::size_t>(src.index)] = v;
    }
    for (std::size_t k = 0; k < sf.ineq_src.size(); ++k) {
        const auto& src = sf.ineq_src[k];
        const double zk = z(static_cast<Eigen::Index>(k));
        const auto idx = static_cast<std::size_t>(src.index);
        switch (src.origin) {
            case Origin::RowLe: out.row_duals[idx] = -zk; break;
            case Origin::RowGe: out.row_duals[idx] = zk; break;
            case Origin::Lower: out.lower_duals[idx] = zk; break;
            case Origin::Upper: out.upper_duals[idx] = -zk; break;
            default: break;
        }
    }

    // residuals measured on the user's problem
    double obj = 0.0, dobj = 0.0, pres = 0.0, comp = 0.0;
    std::vector<double> reduced(p.cost);
    for (std::size_t j = 0; j < n; ++j) {
        obj += p.cost[j] * out.x[j];
        const double lo = p.lower[j], up = p.upper[j];
        if (std::isfinite(lo)) {
            pres = std::max(pres, lo - out.x[j]);
            dobj += out.lower_duals[j] * lo;
            if (lo != up) comp = std::max(comp, std::abs(out.lower_duals[j] * (out.x[j] - lo)));
        }
        if (std::isfinite(up)) {
            pres = std::max(pres, out.x[j] - up);
            if (lo != up) {
                dobj += out.upper_duals[j] * up;
                comp = std::max(comp, std::abs(out.upper_duals[j] * (up - out.x[j])));
            }
        }
        reduced[j] -= out.lower_duals[j] + out.upper_duals[j];
    }
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const Row& row = p.rows[i];
        double ax = 0.0;
        for (const auto& [j, a] : row.coeffs) {
            ax += a * out.x[static_cast<std::size_t>(j)];
            reduced[static_cast<std::size_t>(j)] -= out.row_duals[i] * a;
        }
        const double lam = out.row_duals[i];
        dobj += lam * row.rhs;
        switch (row.sense) {
            case Sense::Equal: pres = std::max(pres, std::abs(ax - row.rhs)); break;
            case Sense::LessEqual:
                pres = std::max(pres, ax - row.rhs);
                comp = std::max(comp, std::abs(lam * (row.rhs - ax)));
                break;
            case Sense::GreaterEqual:
                pres = std::max(pres, row.rhs - ax);
                comp = std::max(comp, std::abs(lam * (ax - row.rhs)));
                break;
        }
    }
    double dres = 0.0;
    for (double r : reduced) dres = std::max(dres, std::abs(r));
    out.objective = obj;
    out.dual_objective = dobj;
    out.primal_residual = std::max(0.0, pres);
    out.dual_residual = dres;
    out.complementarity = comp;
}

}  // namespace

LpSolution solve_lp(const LpProblem& problem, const LpOptions& opt) {
    check_problem(problem);
    LpSolution result;
    StandardForm sf;
    if (!to_standard_form(problem, sf) || !drop_dependent_rows(sf)) {
        result.status = LpStatus::Infeasible;
        return result;
    }
    const SparseMat& A = sf.A;
    const SparseMat& G = sf.G;
    const VectorXd& b = sf.b;
    const VectorXd& h = sf.h;
    const VectorXd& c = sf.c;
    const Eigen::Index n = c.size();
    const Eigen::Index m = h.size();

    KktSolver kkt(A, G);
    VectorXd x, y, z, s;

    // starting point: least-norm slacks and duals with unit scaling, shifted into the interior
    if (!kkt.factor(VectorXd::Ones(m))) throw LpError("singular initial system");
    {
        VectorXd dx, dy, dz;
        kkt.solve(VectorXd::Zero(n), b, h, dx, dy, dz);
        x = dx;
        s = -dz;
        kkt.solve(-c, VectorXd::Zero(b.size()), VectorXd::Zero(m), dx, dy, dz);
        y = dy;
        z = dz;
        const double sp = m ? -s.minCoeff() : -1.0;
        if (sp >= 0.0) s.array() += 1.0 + sp;
        const double zp = m ? -z.minCoeff() : -1.0;
        if (zp >= 0.0) z.array() += 1.0 + zp;
    }
    double tau = 1.0, kappa = 1.0;

    const double bnorm = 1.0 + std::max(inf_norm(b), inf_norm(h));
    const double cnorm = 1.0 + inf_norm(c);
    const double mu_den = static_cast<double>(m) + 1.0;

    struct Status {
        double pres, dres, pobj, dobj, gap;
    };
    auto measure = [&]() {
        Status st;
        st.pres = std::max(inf_norm(A * x - b * tau), inf_norm(G * x + s - h * tau)) / tau / bnorm;
        st.dres = inf_norm(A.transpose() * y + G.transpose() * z + c * tau) / tau / cnorm;
        st.pobj = c.dot(x) / tau;
        st.dobj = -(b.dot(y) + h.dot(z)) / tau;
        st.gap = s.dot(z) / (tau * tau);
        return st;
    };
    auto converged = [&](const Status& st, double feas, double gap) {
        const double scale = std::max(1.0, std::abs(st.pobj));
        return st.pres <= feas && st.dres <= feas && st.gap <= gap * scale &&
               std::abs(st.pobj - st.dobj) <= gap * scale;
    };

    LpStatus status = LpStatus::IterationLimit;
    int it = 0;
    int stalls = 0;
    for (; it < opt.max_iterations; ++it) {
        const Status st = measure();
        if (converged(st, opt.feasibility_tol, opt.gap_tol)) {
            status = LpStatus::Optimal;
            break;
        }
        // certificates of infeasibility from the embedding
        const double by_hz = b.dot(y) + h.dot(z);
        if (by_hz < 0.0) {
            const double ratio = inf_norm(A.transpose() * y + G.transpose() * z) / -by_hz;
            if (ratio <= opt.feasibility_tol * cnorm && tau < 1e-6 * kappa) {
                status = LpStatus::Infeasible;
                break;
            }
        }
        const double cx = c.dot(x);
        if (cx < 0.0) {
            const double ratio = std::max(inf_norm(A * x), inf_norm(G * x + s)) / -cx;
            if (ratio <= opt.feasibility_tol * bnorm && tau < 1e-6 * kappa) {
                status = LpStatus::Unbounded;
                break;
            }
        }

        const VectorXd rx = A.transpose() * y + G.transpose() * z + c * tau;
        const VectorXd ry = A * x - b * tau;
        const VectorXd rz = G * x + s - h * tau;
        const double rt = kappa + cx + b.dot(y) + h.dot(z);
        const double mu = (s.dot(z) + tau * kappa) / mu_den;

        const VectorXd w = z.cwiseQuotient(s);
        if (!kkt.factor(w)) break;

        VectorXd xb, yb, zb;
        kkt.solve(-c, b, h, xb, yb, zb);
        const double denom_b = c.dot(xb) + b.dot(yb) + h.dot(zb);

        struct Dir {
            VectorXd dx, dy, dz, ds;
            double dtau, dkappa;
        };
        auto direction = [&](double eta, const VectorXd& rs, double rk) {
            Dir d;
            VectorXd xa, ya, za;
            kkt.solve(-eta * rx, -eta * ry, -eta * rz - rs.cwiseQuotient(z), xa, ya, za);
            d.dtau = (-eta * rt - rk / tau - (c.dot(xa) + b.dot(ya) + h.dot(za))) / (denom_b - kappa / tau);
            d.dx = xa + d.dtau * xb;
            d.dy = ya + d.dtau * yb;
            d.dz = za + d.dtau * zb;
            d.ds = (rs - s.cwiseProduct(d.dz)).cwiseQuotient(z);
            d.dkappa = (rk - kappa * d.dtau) / tau;
            return d;
        };
        auto step_to_boundary = [&](const Dir& d) {
            double a = std::min(max_step(s, d.ds), max_step(z, d.dz));
            if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        const VectorXd sz = s.cwiseProduct(z);
        const Dir aff = direction(1.0, -sz, -tau * kappa);
        const double alpha_aff = std::min(1.0, step_to_boundary(aff));
        const double sigma = std::pow(1.0 - alpha_aff, 3);

        const VectorXd rs = -sz + VectorXd::Constant(m, sigma * mu) - aff.ds.cwiseProduct(aff.dz);
        const double rk = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
        const Dir d = direction(1.0 - sigma, rs, rk);
        const double alpha = std::min(1.0, 0.99 * step_to_boundary(d));

        x += alpha * d.dx;
        y += alpha * d.dy;
        z += alpha * d.dz;
        s += alpha * d.ds;
        tau += alpha * d.dtau;
        kappa += alpha * d.dkappa;

        stalls = alpha < 1e-8 ? stalls + 1 : 0;
        if (stalls >= 3) break;
    }
    result.iterations = it;

    if (status == LpStatus::IterationLimit) {
        // a stalled run that is optimal to a looser tolerance is still reported as optimal
        const Status st = measure();
        if (converged(st, 10.0 * opt.feasibility_tol, 1e-8)) status = LpStatus::Optimal;
    }
    result.status = status;
    if (status == LpStatus::Optimal || status == LpStatus::IterationLimit)
        fill_solution(problem, sf, x / tau, y / tau, z / tau, result);
    return result;
}

void write_lp_format(const LpProblem& problem, std::ostream& out) {
    auto name_of = [&](std::size_t j) {
        const auto& nm = j < problem.var_names.size() ? problem.var_names[j] : std::string{};
        return nm.empty() ? "x" + std::to_string(j) : nm;
    };
    auto term = [&](double a, std::size_t j, bool first) {
        std::string sgn = a < 0.0 ? "- " : (first ? "" : "+ ");
        out << ' ' << sgn << std::abs(a) << ' ' << name_of(j);
    };
    out.precision(17);
    out << "\\ written by arbmarl\nMinimize\n obj:";
    bool first = true;
    for (std::size_t j = 0; j < problem.cost.size(); ++j) {
        if (problem.cost[j] == 0.0) continue;
        term(problem.cost[j], j, first);
        first = false;
    }
    if (first) out << " 0 " << name_of(0);
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
        const Row& row = problem.rows[i];
        out << ' ' << (row.name.empty() ? "r" + std::to_string(i) : row.name) << ':';
        first = true;
        for (const auto& [j, a] : row.coeffs) {
            term(a, static_cast<std::size_t>(j), first);
            first = false;
        }
        if (first) out << " 0 " << name_of(0);
        out << (row.sense == Sense::Equal ? " = " : row.sense == Sense::LessEqual ? " <= " : " >= ") << row.rhs
            << '\n';
    }
    out << "Bounds\n";
    for (std::size_t j = 0; j < problem.cost.size(); ++j) {
        const double lo = problem.lower[j], up = problem.upper[j];
        const std::string nm = name_of(j);
        if (lo == up)
            out << ' ' << nm << " = " << lo << '\n';
        else if (std::isinf(lo) && std::isinf(up))
            out << ' ' << nm << " free\n";
        else {
            out << ' ';
            if (std::isinf(lo)) out << "-inf"; else out << lo;
            out << " <= " << nm << " <= ";
            if (std::isinf(up)) out << "+inf"; else out << up;
            out << '\n';
        }
    }
    out << "End\n";
}

}  // namespace arbmarl::lp
