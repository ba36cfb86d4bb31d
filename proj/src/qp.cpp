#include "ccplan/qp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace ccplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Mat mat_from_json(const nlohmann::json& rows, int cols_hint = 0) {
    if (rows.empty()) return Mat(0, cols_hint);
    Mat m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j].get<double>();
    return m;
}

nlohmann::json vec_to_json(const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) {
        if (std::isinf(v[i])) {
            a.push_back(v[i] > 0 ? "inf" : "-inf");
        } else {
            a.push_back(v[i]);
        }
    }
    return a;
}

Vec vec_from_json(const nlohmann::json& a) {
    Vec v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& e = a[i];
        if (e.is_string()) {
            v[static_cast<int>(i)] = e.get<std::string>() == "inf" ? kInf : -kInf;
        } else {
            v[static_cast<int>(i)] = e.get<double>();
        }
    }
    return v;
}

}  // namespace

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::IterationLimit: return "iteration-limit";
    }
    return "?";
}

void QPProblem::validate() const {
    const int n = vars();
    if (P.rows() != n || P.cols() != n) throw std::invalid_argument("qp: P must be n x n");
    if (!P.isApprox(P.transpose(), 1e-9)) throw std::invalid_argument("qp: P must be symmetric");
    if (E.rows() != e.size() || (E.rows() > 0 && E.cols() != n))
        throw std::invalid_argument("qp: equality block dimension mismatch");
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
        throw std::invalid_argument("qp: inequality block dimension mismatch");
    if (lb.size() != 0 && lb.size() != n) throw std::invalid_argument("qp: lb size mismatch");
    if (ub.size() != 0 && ub.size() != n) throw std::invalid_argument("qp: ub size mismatch");
    for (int i = 0; i < std::min<int>(lb.size(), ub.size()); ++i) {
        if (lb[i] > ub[i]) throw std::invalid_argument("qp: lb > ub");
    }
}

std::string QPProblem::to_json() const {
    nlohmann::json j;
    j["P"] = mat_to_json(P);
    j["q"] = vec_to_json(q);
    j["E"] = mat_to_json(E);
    j["e"] = vec_to_json(e);
    j["A"] = mat_to_json(A);
    j["b"] = vec_to_json(b);
    j["lb"] = vec_to_json(lb);
    j["ub"] = vec_to_json(ub);
    return j.dump(2);
}

QPProblem QPProblem::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    QPProblem p;
    p.q = vec_from_json(j.at("q"));
    const int n = p.vars();
    p.P = mat_from_json(j.at("P"), n);
    p.E = mat_from_json(j.at("E"), n);
    p.e = vec_from_json(j.at("e"));
    p.A = mat_from_json(j.at("A"), n);
    p.b = vec_from_json(j.at("b"));
    p.lb = vec_from_json(j.at("lb"));
    p.ub = vec_from_json(j.at("ub"));
    p.validate();
    return p;
}

void QPProblem::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write qp file: " + path);
    out << to_json() << "\n";
}

QPProblem QPProblem::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qp file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

namespace {

// Internal stacked form:  minimize 1/2 x' H x + g' x  s.t.  l <= C x <= u,
// where H = 2 P and equality rows have l = u.
struct Stacked {
    Mat H;
    Vec g;
    Mat C;
    Vec l, u;
    int n = 0, m = 0;
    int eq_rows = 0;  // first eq_rows rows of C are equalities
};

Stacked stack(const QPProblem& p) {
    const int n = p.vars();
    std::vector<int> box_rows;
    const bool has_lb = p.lb.size() == n, has_ub = p.ub.size() == n;
    for (int i = 0; i < n; ++i) {
        const double lo = has_lb ? p.lb[i] : -kInf;
        const double hi = has_ub ? p.ub[i] : kInf;
        if (std::isfinite(lo) || std::isfinite(hi)) box_rows.push_back(i);
    }
    const int me = static_cast<int>(p.E.rows());
    const int mi = static_cast<int>(p.A.rows());
    const int mb = static_cast<int>(box_rows.size());

    Stacked s;
    s.n = n;
    s.m = me + mi + mb;
    s.eq_rows = me;
    s.H = 2.0 * 0.5 * (p.P + p.P.transpose());
    s.g = p.q;
    s.C = Mat::Zero(s.m, n);
    s.l = Vec::Constant(s.m, -kInf);
    s.u = Vec::Constant(s.m, kInf);
    if (me > 0) {
        s.C.topRows(me) = p.E;
        s.l.head(me) = p.e;
        s.u.head(me) = p.e;
    }
    if (mi > 0) {
        s.C.middleRows(me, mi) = p.A;
        s.u.segment(me, mi) = p.b;
    }
    for (int k = 0; k < mb; ++k) {
        const int i = box_rows[k];
        s.C(me + mi + k, i) = 1.0;
        if (has_lb) s.l[me + mi + k] = p.lb[i];
        if (has_ub) s.u[me + mi + k] = p.ub[i];
    }
    return s;
}

struct Scaling {
    Vec d;      // variable scaling, x = d .* x_scaled
    Vec e;      // constraint scaling
    double c = 1.0;  // cost scaling
};

// Modified Ruiz equilibration on [H C'; C 0] plus cost normalization.
Scaling equilibrate(Stacked& s, int iters = 10) {
    Scaling sc;
    sc.d = Vec::Ones(s.n);
    sc.e = Vec::Ones(s.m);
    for (int it = 0; it < iters; ++it) {
        Vec dj(s.n);
        for (int j = 0; j < s.n; ++j) {
            double norm = s.H.col(j).lpNorm<Eigen::Infinity>();
            if (s.m > 0) norm = std::max(norm, s.C.col(j).lpNorm<Eigen::Infinity>());
            dj[j] = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
        }
        Vec ei(std::max(s.m, 1));
        for (int i = 0; i < s.m; ++i) {
            const double norm = s.C.row(i).lpNorm<Eigen::Infinity>();
            ei[i] = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
        }
        s.H = dj.asDiagonal() * s.H * dj.asDiagonal();
        s.g = dj.asDiagonal() * s.g;
        if (s.m > 0) {
            s.C = ei.head(s.m).asDiagonal() * s.C * dj.asDiagonal();
            s.l = ei.head(s.m).asDiagonal() * s.l;
            s.u = ei.head(s.m).asDiagonal() * s.u;
            sc.e = sc.e.cwiseProduct(ei.head(s.m));
        }
        sc.d = sc.d.cwiseProduct(dj);

        double mean_col = 0.0;
        for (int j = 0; j < s.n; ++j) mean_col += s.H.col(j).lpNorm<Eigen::Infinity>();
        mean_col /= s.n;
        const double gn = s.g.lpNorm<Eigen::Infinity>();
        const double denom = std::max(std::max(mean_col, gn), 1e-12);
        const double gamma = 1.0 / denom;
        s.H *= gamma;
        s.g *= gamma;
        sc.c *= gamma;
    }
    // Infinities stay infinite under scaling; fix any NaN from 0 * inf.
    for (int i = 0; i < s.m; ++i) {
        if (std::isnan(s.l[i])) s.l[i] = -kInf;
        if (std::isnan(s.u[i])) s.u[i] = kInf;
    }
    return sc;
}

struct KKTSolver {
    Eigen::LDLT<Mat> ldlt;
    bool ok = false;
    void factor(const Mat& H, double sigma, const Mat& C, const Vec& rho) {
        Mat K = H;
        K.diagonal().array() += sigma;
        if (C.rows() > 0) K.noalias() += C.transpose() * rho.asDiagonal() * C;
        ldlt.compute(K);
        ok = ldlt.info() == Eigen::Success;
    }
    Vec solve(const Vec& rhs) const { return ldlt.solve(rhs); }
};

struct PolishOutcome {
    bool ok = false;
    Vec x, y;
};

// Equality-constrained KKT solve on a working set, with delta regularization
// and iterative refinement against the unregularized system.
struct WorkingSetSolve {
    Vec x;
    Vec y_act;  // multipliers aligned with the working set
};

WorkingSetSolve solve_working_set(const Stacked& s, const std::vector<int>& act,
                                  const std::vector<int>& side) {
    const int ma = static_cast<int>(act.size());
    const int dim = s.n + ma;
    Mat K = Mat::Zero(dim, dim);
    K.topLeftCorner(s.n, s.n) = s.H;
    K.topLeftCorner(s.n, s.n).diagonal().array() += 1e-9;
    K.bottomRightCorner(ma, ma).diagonal().array() -= 1e-9;
    Vec rhs(dim);
    rhs.head(s.n) = -s.g;
    for (int k = 0; k < ma; ++k) {
        K.block(s.n + k, 0, 1, s.n) = s.C.row(act[k]);
        K.block(0, s.n + k, s.n, 1) = s.C.row(act[k]).transpose();
        rhs[s.n + k] = side[k] < 0 ? s.l[act[k]] : s.u[act[k]];
        if (side[k] == 0) rhs[s.n + k] = s.l[act[k]];
    }
    Eigen::PartialPivLU<Mat> lu(K);
    Vec sol = lu.solve(rhs);
    for (int r = 0; r < 2; ++r) {
        Vec resid = rhs;
        resid.head(s.n) -= s.H * sol.head(s.n);
        for (int k = 0; k < ma; ++k) {
            resid.head(s.n) -= s.C.row(act[k]).transpose() * sol[s.n + k];
            resid[s.n + k] -= s.C.row(act[k]).dot(sol.head(s.n));
        }
        sol += lu.solve(resid);
    }
    WorkingSetSolve out;
    out.x = sol.head(s.n);
    out.y_act = sol.tail(ma);
    return out;
}

// Active-set refinement seeded by the ADMM duals: drop the worst wrong-sign
// member, add the worst violated row, until the KKT conditions verify or the
// iteration budget runs out. Used both as the final polish and as an early
// exit, since a verified KKT point is optimal for a convex QP.
PolishOutcome polish(const Stacked& s, const Vec& x_admm, const Vec& y_admm) {
    std::vector<int> act;
    std::vector<int> side;  // -1 lower, +1 upper, 0 equality
    std::vector<int> member(s.m, -1);
    auto add_row = [&](int i, int sd) {
        member[i] = static_cast<int>(act.size());
        act.push_back(i);
        side.push_back(sd);
    };
    // Seed from the duals and from primal near-activity; dual signs alone
    // miss the right PWL piece rows and the refinement then swaps them in
    // one expensive KKT solve at a time.
    const Vec cx_admm = s.C * x_admm;
    for (int i = 0; i < s.m; ++i) {
        if (i < s.eq_rows || s.l[i] == s.u[i]) {
            add_row(i, 0);
        } else if (y_admm[i] < -1e-10 && std::isfinite(s.l[i])) {
            add_row(i, -1);
        } else if (y_admm[i] > 1e-10 && std::isfinite(s.u[i])) {
            add_row(i, +1);
        } else if (std::isfinite(s.u[i]) && s.u[i] - cx_admm[i] < 1e-3) {
            add_row(i, +1);
        } else if (std::isfinite(s.l[i]) && cx_admm[i] - s.l[i] < 1e-3) {
            add_row(i, -1);
        }
    }

    PolishOutcome out;
    constexpr int kMaxIters = 200;
    for (int iter = 0; iter < kMaxIters; ++iter) {
        const WorkingSetSolve ws = solve_working_set(s, act, side);

        // Smallest-index wrong-sign member (Bland's rule; the worst-first
        // choice cycles on dual-degenerate vertices). Equalities excluded.
        int drop = -1;
        for (int i = 0; i < s.m && drop < 0; ++i) {
            const int k = member[i];
            if (k < 0 || side[k] == 0) continue;
            const double v = side[k] < 0 ? -ws.y_act[k] : ws.y_act[k];
            if (v < -1e-9) drop = k;
        }
        if (drop >= 0) {
            member[act[drop]] = -1;
            act.erase(act.begin() + drop);
            side.erase(side.begin() + drop);
            for (std::size_t k = 0; k < act.size(); ++k) member[act[k]] = static_cast<int>(k);
            continue;
        }

        // Smallest-index violated non-member.
        const Vec cx = s.C * ws.x;
        int add = -1, add_side = 0;
        for (int i = 0; i < s.m && add < 0; ++i) {
            if (member[i] >= 0) continue;
            if (std::isfinite(s.l[i]) && s.l[i] - cx[i] > 1e-9) {
                add = i;
                add_side = -1;
            } else if (std::isfinite(s.u[i]) && cx[i] - s.u[i] > 1e-9) {
                add = i;
                add_side = +1;
            }
        }
        if (add >= 0) {
            add_row(add, add_side);
            continue;
        }

        // KKT verified up to tolerances?
        out.x = ws.x;
        out.y = Vec::Zero(s.m);
        for (std::size_t k = 0; k < act.size(); ++k) out.y[act[k]] = ws.y_act[k];
        const Vec dual_res = s.H * out.x + s.g + s.C.transpose() * out.y;
        double viol = 0.0;
        for (int i = 0; i < s.m; ++i) {
            viol = std::max(viol, s.l[i] - cx[i]);
            viol = std::max(viol, cx[i] - s.u[i]);
        }
        out.ok = viol < 1e-8 && dual_res.lpNorm<Eigen::Infinity>() < 1e-8;
        return out;
    }
    return out;
}

}  // namespace

SolveResult solve_qp(const QPProblem& problem, const QPSettings& settings) {
    problem.validate();
    Stacked s = stack(problem);
    const Scaling sc = equilibrate(s);

    SolveResult res;
    const int n = s.n, m = s.m;

    if (m == 0) {
        // Unconstrained: stationary point of the (regularized) quadratic.
        Mat H = s.H;
        H.diagonal().array() += 1e-12;
        const Vec xs = Eigen::LDLT<Mat>(H).solve(-s.g);
        res.x = sc.d.cwiseProduct(xs);
        res.status = SolveStatus::Optimal;
        res.objective = res.x.dot(problem.P * res.x) + problem.q.dot(res.x);
        return res;
    }

    Vec rho = Vec::Constant(m, settings.rho);
    for (int i = 0; i < m; ++i) {
        if (s.l[i] == s.u[i]) rho[i] = settings.rho * 1e3;
    }

    KKTSolver kkt;
    kkt.factor(s.H, settings.sigma, s.C, rho);

    Vec x = Vec::Zero(n);
    if (settings.warm_x && settings.warm_x->size() == n) {
        x = settings.warm_x->cwiseQuotient(sc.d);
    }
    Vec z = (s.C * x).cwiseMax(s.l).cwiseMin(s.u);
    Vec y = Vec::Zero(m);

    const double eps_abs = 1e-9, eps_rel = 1e-9;
    int it = 0;
    int last_rho_update = 0;
    bool converged = false;
    bool polished_early = false;
    Vec x_polished, y_polished;

    Vec x_prev = x, y_prev = y;
    for (it = 1; it <= settings.max_iter; ++it) {
        x_prev = x;
        y_prev = y;
        // x update through the reduced KKT system.
        Vec rhs = settings.sigma * x - s.g;
        rhs.noalias() += s.C.transpose() * (rho.cwiseProduct(z) - y);
        const Vec x_tilde = kkt.solve(rhs);
        const Vec z_tilde = s.C * x_tilde;
        // Over-relaxed updates.
        x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
        const Vec z_interp = settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
        const Vec z_new = (z_interp + y.cwiseQuotient(rho)).cwiseMax(s.l).cwiseMin(s.u);
        y += rho.cwiseProduct(z_interp - z_new);
        z = z_new;

        // A verified KKT point is optimal for a convex QP, so a successful
        // polish ends the iteration regardless of the ADMM residuals.
        if (it == 250 || it % 1000 == 0) {
            const PolishOutcome early = polish(s, x, y);
            if (early.ok) {
                x_polished = early.x;
                y_polished = early.y;
                polished_early = true;
                break;
            }
        }

        if (it % 10 != 0 && it != settings.max_iter) continue;

        // Unscaled residuals.
        const Vec cx = s.C * x;
        const Vec prim_res_vec = sc.e.cwiseInverse().cwiseProduct(cx - z);
        const Vec dual_res_vec =
            sc.d.cwiseProduct(s.H * x + s.g + s.C.transpose() * y) / sc.c;
        const double r_prim = prim_res_vec.lpNorm<Eigen::Infinity>();
        const double r_dual = dual_res_vec.lpNorm<Eigen::Infinity>();
        const double prim_scale = std::max(
            sc.e.cwiseInverse().cwiseProduct(cx).lpNorm<Eigen::Infinity>(),
            sc.e.cwiseInverse().cwiseProduct(z).lpNorm<Eigen::Infinity>());
        const double dual_scale =
            std::max({sc.d.cwiseProduct(s.H * x).lpNorm<Eigen::Infinity>() / sc.c,
                      sc.d.cwiseProduct(s.C.transpose() * y).lpNorm<Eigen::Infinity>() / sc.c,
                      sc.d.cwiseProduct(s.g).lpNorm<Eigen::Infinity>() / sc.c});
        if (r_prim <= eps_abs + eps_rel * prim_scale &&
            r_dual <= eps_abs + eps_rel * dual_scale) {
            converged = true;
            break;
        }

        // Primal infeasibility certificate from the dual direction.
        const Vec dy = y - y_prev;
        const double dy_norm = sc.e.cwiseProduct(dy).lpNorm<Eigen::Infinity>() / sc.c;
        if (dy_norm > 1e-12) {
            const double eps_inf = 1e-8 * dy_norm;
            const double atdy =
                sc.d.cwiseProduct(s.C.transpose() * dy).lpNorm<Eigen::Infinity>() / sc.c;
            double support = 0.0;
            bool bounded_support = true;
            for (int i = 0; i < m; ++i) {
                const double dyi = dy[i] / sc.c;
                const double ui = s.u[i] / sc.e[i], li = s.l[i] / sc.e[i];
                const double dyi_un = dyi * sc.e[i];
                if (dyi_un > 0) {
                    if (!std::isfinite(ui)) { bounded_support = dyi_un <= eps_inf; if (!bounded_support) break; }
                    else support += ui * dyi_un;
                } else if (dyi_un < 0) {
                    if (!std::isfinite(li)) { bounded_support = -dyi_un <= eps_inf; if (!bounded_support) break; }
                    else support += li * dyi_un;
                }
            }
            if (bounded_support && atdy <= eps_inf && support <= -eps_inf) {
                res.status = SolveStatus::Infeasible;
                res.x = sc.d.cwiseProduct(x);
                res.iterations = it;
                res.objective = res.x.dot(problem.P * res.x) + problem.q.dot(res.x);
                Vec viol = (problem.A.rows() > 0) ? Vec(problem.A * res.x - problem.b) : Vec();
                res.max_violation = viol.size() > 0 ? std::max(0.0, viol.maxCoeff()) : 0.0;
                return res;
            }
        }

        // Adaptive penalty.
        if (it - last_rho_update >= 100) {
            const double num = r_prim / std::max(prim_scale, 1e-12);
            const double den = r_dual / std::max(dual_scale, 1e-12);
            const double ratio = std::sqrt(num / std::max(den, 1e-16));
            if (ratio > 5.0 || ratio < 0.2) {
                const double factor = std::clamp(ratio, 1e-3, 1e3);
                rho *= factor;
                for (int i = 0; i < m; ++i) rho[i] = std::clamp(rho[i], 1e-8, 1e8);
                kkt.factor(s.H, settings.sigma, s.C, rho);
                last_rho_update = it;
            }
        }
    }
    it = std::min(it, settings.max_iter);

    // Final polish; accept if it verifies.
    PolishOutcome pol;
    if (polished_early) {
        pol.ok = true;
        pol.x = x_polished;
        pol.y = y_polished;
    } else {
        pol = polish(s, x, y);
    }
    Vec xs = pol.ok ? pol.x : x;

    res.x = sc.d.cwiseProduct(xs);
    res.iterations = it;
    res.objective = res.x.dot(problem.P * res.x) + problem.q.dot(res.x);

    double viol = 0.0;
    if (problem.E.rows() > 0)
        viol = std::max(viol, (problem.E * res.x - problem.e).lpNorm<Eigen::Infinity>());
    if (problem.A.rows() > 0)
        viol = std::max(viol, std::max(0.0, (problem.A * res.x - problem.b).maxCoeff()));
    for (int i = 0; i < res.x.size(); ++i) {
        if (problem.lb.size() > 0) viol = std::max(viol, problem.lb[i] - res.x[i]);
        if (problem.ub.size() > 0) viol = std::max(viol, res.x[i] - problem.ub[i]);
    }
    res.max_violation = viol;

    if (pol.ok || converged) {
        res.status = viol <= settings.feas_tol ? SolveStatus::Optimal : SolveStatus::IterationLimit;
    } else {
        res.status = SolveStatus::IterationLimit;
    }
    return res;
}

}  // namespace ccplan
