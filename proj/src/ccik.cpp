#include "ccplan/ccik.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ccplan/normal.hpp"

namespace ccplan {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

NeuralDistanceModel::NeuralDistanceModel(const std::string& checkpoint_path) {
    auto [cfg, params] = load_model(checkpoint_path);
    cfg_ = std::move(cfg);
    params_ = std::move(params);
}

DistancePrediction AnalyticDistanceModel::predict(const Vec& q, const Vec& x, bool want_grad) const {
    DistancePrediction pred;
    pred.mu = link_point_distances(chain_, q, x);
    pred.sigma = Vec::Constant(chain_.joints(), sigma_);
    if (want_grad) {
        pred.grad_mu_q = link_point_distance_gradients(chain_, q, x);
        pred.has_grad = true;
    }
    return pred;
}

std::vector<ActiveConstraint> gather_constraints(const CCIKInput& input) {
    const auto& scene = *input.scene;
    const int K = input.model->links();
    std::vector<ActiveConstraint> out;
    for (int r = 0; r < scene.size(); ++r) {
        const auto& pt = scene.points[r];
        const DistancePrediction pred = input.model->predict(input.q_current, pt.center, true);
        for (int k = 0; k < K; ++k) {
            const double mu = pred.mu[k] - pt.radius;
            if (input.config.prune_distance >= 0.0 && mu > input.config.prune_distance) continue;
            ActiveConstraint c;
            c.link = k;
            c.point = r;
            c.mu = mu;
            c.sigma = pred.sigma[k];
            c.gradient = -pred.grad_mu_q.row(k).transpose();
            out.push_back(std::move(c));
        }
    }
    return out;
}

AssembledCCIK assemble(const CCIKInput& input, const std::vector<ActiveConstraint>& constraints) {
    const KinematicChain& chain = *input.chain;
    const CCIKConfig& cfg = input.config;
    const int n = chain.joints();
    const int full_pose = chain.pose_dim();
    const int pd = cfg.position_only ? chain.dim : full_pose;
    const int C = static_cast<int>(constraints.size());

    if (input.q_current.size() != n) throw std::invalid_argument("ccik: q dimension mismatch");
    if (input.target_pose.size() != full_pose) throw std::invalid_argument("ccik: target pose dimension mismatch");

    AssembledCCIK a;
    a.n = n;
    a.pose_rows = pd;
    a.constraint_count = C;
    a.z_offset = n + pd;
    a.alloc_offset = n + pd + C;
    a.gamma_offset = n + pd;
    a.effective_budget = C > 0 ? std::min(input.budget, 0.5 * C) : input.budget;
    a.pwl = default_logit_pwl(cfg.pwl_segments);
    if (cfg.gamma_bar_max < a.pwl.hi() - 1e-12) {
        a.pwl = build_secant_pwl([](double p) { return logit_bound(p); },
                                 geometric_breakpoints(0.5, cfg.gamma_bar_max, cfg.pwl_segments));
    }
    const int pieces = a.pwl.segments();
    const double z_max = a.pwl.breakpoint_value(pieces);

    // Linearized pose tracking with slack: J dq - slack = target - current.
    const Mat J = jacobian(chain, input.q_current);
    const Vec current = ee_pose_vector(chain, input.q_current);
    Vec b = input.target_pose - current;
    if (!cfg.position_only && chain.dim == 2) b[2] = wrap_angle(b[2]);

    const Mat Qm = cfg.Q_motion.size() > 0 ? cfg.Q_motion : Mat(Mat::Identity(n, n));
    const Mat Ds = cfg.D_slack.size() > 0 ? cfg.D_slack : Mat(10.0 * Mat::Identity(pd, pd));

    // ---- Convex form over [dq; slack; z; a] ----
    {
        const int nv = n + pd + 2 * C;
        QPProblem& qp = a.qp;
        qp.P = Mat::Zero(nv, nv);
        qp.P.topLeftCorner(n, n) = Qm;
        qp.P.block(n, n, pd, pd) = Ds;
        qp.q = Vec::Zero(nv);
        for (int j = 0; j < C; ++j) qp.q[a.alloc_offset + j] = cfg.h_risk;

        qp.E = Mat::Zero(pd, nv);
        qp.E.topLeftCorner(pd, n) = J.topRows(pd);
        qp.E.block(0, n, pd, pd) = -Mat::Identity(pd, pd);
        qp.e = b.head(pd);

        // Rows: per constraint the collision row  grad' dq + sigma z_j <= mu,
        // per PWL piece the epigraph row  a_j >= (1 - t_i) - (z_j - y_i)/m_i,
        // plus the budget row  sum a <= delta.
        qp.A = Mat::Zero(C * (1 + pieces) + (C > 0 ? 1 : 0), nv);
        qp.b = Vec::Zero(qp.A.rows());
        int row = 0;
        for (int j = 0; j < C; ++j) {
            const auto& con = constraints[j];
            qp.A.row(row).head(n) = con.gradient.transpose();
            qp.A(row, a.z_offset + j) = con.sigma;
            qp.b[row] = con.mu;
            ++row;
            for (int i = 0; i < pieces; ++i) {
                const double inv_m = 1.0 / a.pwl.slope[i];
                qp.A(row, a.alloc_offset + j) = -1.0;
                qp.A(row, a.z_offset + j) = -inv_m;
                qp.b[row] = -(1.0 - a.pwl.breakpoints[i]) - a.pwl.breakpoint_value(i) * inv_m;
                ++row;
            }
        }
        if (C > 0) {
            for (int j = 0; j < C; ++j) qp.A(row, a.alloc_offset + j) = 1.0;
            qp.b[row] = a.effective_budget;
        }

        qp.lb = Vec::Constant(nv, -kInf);
        qp.ub = Vec::Constant(nv, kInf);
        for (int i = 0; i < n; ++i) {
            qp.lb[i] = std::max(-cfg.step_bound, chain.lower[i] - input.q_current[i]);
            qp.ub[i] = std::min(cfg.step_bound, chain.upper[i] - input.q_current[i]);
            if (qp.lb[i] > qp.ub[i]) qp.lb[i] = qp.ub[i];  // pinned at a violated limit
        }
        for (int j = 0; j < C; ++j) {
            qp.lb[a.z_offset + j] = 0.0;
            qp.ub[a.z_offset + j] = z_max;
            // No box on the allocation block: the epigraph rows already pin
            // it to [1 - pwl.hi(), 0.5] at any optimum, and a coinciding box
            // would make the active set degenerate.
        }
    }

    // ---- MIP form over [dq; slack; gamma_bar] ----
    {
        const int nv = n + pd + C;
        MIPProblem& mip = a.mip;
        mip.base.P = Mat::Zero(nv, nv);
        mip.base.P.topLeftCorner(n, n) = Qm;
        mip.base.P.block(n, n, pd, pd) = Ds;
        mip.base.q = Vec::Zero(nv);
        for (int j = 0; j < C; ++j) mip.base.q[a.gamma_offset + j] = -cfg.h_risk;

        mip.base.E = Mat::Zero(pd, nv);
        mip.base.E.topLeftCorner(pd, n) = J.topRows(pd);
        mip.base.E.block(0, n, pd, pd) = -Mat::Identity(pd, pd);
        mip.base.e = b.head(pd);

        mip.base.A = Mat::Zero(C + (C > 0 ? 1 : 0), nv);
        mip.base.b = Vec::Zero(mip.base.A.rows());
        for (int j = 0; j < C; ++j) {
            const auto& con = constraints[j];
            mip.base.A.row(j).head(n) = con.gradient.transpose();
            mip.base.b[j] = con.mu;
            PWLConstraintBlock blk;
            blk.var = a.gamma_offset + j;
            blk.breakpoints = a.pwl.breakpoints;
            blk.values = a.pwl.values;
            blk.rows.emplace_back(j, con.sigma);
            mip.blocks.push_back(std::move(blk));
        }
        if (C > 0) {
            // Budget: sum(1 - gb) <= delta  <=>  -sum(gb) <= delta - C.
            for (int j = 0; j < C; ++j) mip.base.A(C, a.gamma_offset + j) = -1.0;
            mip.base.b[C] = a.effective_budget - C;
        }

        mip.base.lb = Vec::Constant(nv, -kInf);
        mip.base.ub = Vec::Constant(nv, kInf);
        mip.base.lb.head(n) = a.qp.lb.head(n);
        mip.base.ub.head(n) = a.qp.ub.head(n);
        for (int j = 0; j < C; ++j) {
            mip.base.lb[a.gamma_offset + j] = 0.5;
            mip.base.ub[a.gamma_offset + j] = cfg.gamma_bar_max;
        }
    }
    return a;
}

namespace {

CCIKSolution solve_assembled(const CCIKInput& input, const std::vector<ActiveConstraint>& constraints,
                             const AssembledCCIK& a) {
    const bool mip_mode = input.config.use_mip && a.constraint_count > 0;
    SolveResult r;
    int nodes = 0;
    if (mip_mode) {
        MIPSettings ms;
        ms.qp = input.config.qp;
        MIPResult mr = solve_mip(a.mip, ms);
        r = mr.result;
        nodes = mr.nodes;
    } else {
        r = solve_qp(a.qp, input.config.qp);
    }

    CCIKSolution sol;
    sol.status = r.status;
    sol.constraints = constraints;
    sol.iterations = std::max(r.iterations, nodes);
    if (r.status != SolveStatus::Optimal) return sol;

    sol.delta_q = r.x.head(a.n);
    sol.slack = r.x.segment(a.n, a.pose_rows);
    sol.gamma_bar.resize(a.constraint_count);
    sol.allocated_total = 0.0;
    for (int j = 0; j < a.constraint_count; ++j) {
        // Charged allocation per constraint; the convex form carries it as an
        // explicit epigraph variable, the MIP form as 1 - gamma_bar.
        const double alloc = mip_mode ? 1.0 - r.x[a.gamma_offset + j]
                                      : r.x[a.alloc_offset + j];
        sol.gamma_bar[j] = 1.0 - alloc;
        sol.allocated_total += alloc;
    }
    // Report the objective in the  motion + slack + h' allocation  form;
    // the MIP's -h' gamma_bar differs from it by the constant h'1.
    sol.objective = mip_mode ? r.objective + input.config.h_risk * a.constraint_count
                             : r.objective;
    return sol;
}

}  // namespace

CCIKSolution ccikopt(const CCIKInput& input) {
    if (!(input.budget > 0.0)) throw std::invalid_argument("ccikopt: budget must be positive");
    const std::vector<ActiveConstraint> constraints = gather_constraints(input);
    const AssembledCCIK a = assemble(input, constraints);
    CCIKSolution sol = solve_assembled(input, constraints, a);
    if (sol.status == SolveStatus::Optimal || !input.config.retry_half_step) return sol;

    // Linearization over a long step is the usual cause of infeasibility.
    CCIKInput retry = input;
    retry.config.step_bound = input.config.step_bound * 0.5;
    retry.config.retry_half_step = false;
    const AssembledCCIK a2 = assemble(retry, constraints);
    CCIKSolution sol2 = solve_assembled(retry, constraints, a2);
    sol2.used_half_step = true;
    return sol2.status == SolveStatus::Optimal ? sol2 : sol;
}

std::string ccik_debug_json(const CCIKSolution& sol, int waypoint, double budget) {
    nlohmann::json j;
    j["waypoint"] = waypoint;
    j["budget"] = budget;
    j["active_constraints"] = sol.constraints.size();
    j["allocated_total"] = sol.allocated_total;
    j["status"] = to_string(sol.status);
    j["objective"] = sol.objective;
    j["half_step"] = sol.used_half_step;
    return j.dump();
}

}  // namespace ccplan
