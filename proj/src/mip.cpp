#include "ccplan/mip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace ccplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
    std::vector<std::pair<int, int>> range;  // allowed breakpoint index range per block
    double bound = -kInf;
    Vec relax_x;       // relaxation solution (extended vector)
    long order = 0;    // insertion order for deterministic tie-break
};

struct NodeCmp {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
        return a.order > b.order;
    }
};

// Extended QP over [x; lambda...] for a given node range.
QPProblem build_relaxation(const MIPProblem& mp, const std::vector<std::pair<int, int>>& range) {
    const QPProblem& base = mp.base;
    const int n = base.vars();
    int total = n;
    std::vector<int> offset(mp.blocks.size());
    for (std::size_t k = 0; k < mp.blocks.size(); ++k) {
        offset[k] = total;
        total += static_cast<int>(mp.blocks[k].breakpoints.size());
    }

    QPProblem ext;
    ext.P = Mat::Zero(total, total);
    ext.P.topLeftCorner(n, n) = base.P;
    ext.q = Vec::Zero(total);
    ext.q.head(n) = base.q;

    const int me = static_cast<int>(base.E.rows());
    const int extra_eq = 2 * static_cast<int>(mp.blocks.size());
    ext.E = Mat::Zero(me + extra_eq, total);
    ext.e = Vec::Zero(me + extra_eq);
    if (me > 0) {
        ext.E.topLeftCorner(me, n) = base.E;
        ext.e.head(me) = base.e;
    }
    for (std::size_t k = 0; k < mp.blocks.size(); ++k) {
        const auto& blk = mp.blocks[k];
        const int nb = static_cast<int>(blk.breakpoints.size());
        const int r0 = me + 2 * static_cast<int>(k);
        for (int i = 0; i < nb; ++i) {
            ext.E(r0, offset[k] + i) = 1.0;                    // sum lambda = 1
            ext.E(r0 + 1, offset[k] + i) = blk.breakpoints[i]; // sum lambda t = x_var
        }
        ext.E(r0 + 1, blk.var) = -1.0;
        ext.e[r0] = 1.0;
        ext.e[r0 + 1] = 0.0;
    }

    const int mi = static_cast<int>(base.A.rows());
    ext.A = Mat::Zero(mi, total);
    ext.b = base.b;
    if (mi > 0) ext.A.topLeftCorner(mi, n) = base.A;
    for (std::size_t k = 0; k < mp.blocks.size(); ++k) {
        const auto& blk = mp.blocks[k];
        for (const auto& [ri, w] : blk.rows) {
            if (ri < 0 || ri >= mi) throw std::invalid_argument("solve_mip: block row out of range");
            for (int i = 0; i < blk.breakpoints.size(); ++i) {
                ext.A(ri, offset[k] + i) += w * blk.values[i];
            }
        }
    }

    ext.lb = Vec::Constant(total, -kInf);
    ext.ub = Vec::Constant(total, kInf);
    if (base.lb.size() == n) ext.lb.head(n) = base.lb;
    if (base.ub.size() == n) ext.ub.head(n) = base.ub;
    for (std::size_t k = 0; k < mp.blocks.size(); ++k) {
        const auto [a, b] = range[k];
        for (int i = 0; i < mp.blocks[k].breakpoints.size(); ++i) {
            ext.lb[offset[k] + i] = 0.0;
            ext.ub[offset[k] + i] = (i >= a && i <= b) ? 1.0 : 0.0;
        }
    }
    return ext;
}

// Support of lambda within one block; returns (lo_idx, hi_idx) of entries
// above threshold, or (-1, -1) for empty support.
std::pair<int, int> lambda_support(const Vec& x, int offset, int count, double thresh) {
    int lo = -1, hi = -1;
    for (int i = 0; i < count; ++i) {
        if (x[offset + i] > thresh) {
            if (lo < 0) lo = i;
            hi = i;
        }
    }
    return {lo, hi};
}

}  // namespace

double PWLConstraintBlock::pwl_value(double x) const {
    const int s = segments();
    x = std::clamp(x, breakpoints[0], breakpoints[s]);
    int i = 0;
    while (i < s - 1 && x > breakpoints[i + 1]) ++i;
    const double t = (x - breakpoints[i]) / (breakpoints[i + 1] - breakpoints[i]);
    return values[i] + t * (values[i + 1] - values[i]);
}

MIPResult solve_mip(const MIPProblem& problem, const MIPSettings& settings) {
    MIPResult out;
    if (problem.blocks.empty()) {
        out.result = solve_qp(problem.base, settings.qp);
        out.nodes = 1;
        return out;
    }
    for (const auto& blk : problem.blocks) {
        if (blk.breakpoints.size() != blk.values.size() || blk.segments() < 1) {
            throw std::invalid_argument("solve_mip: malformed PWL block");
        }
    }

    const int n = problem.base.vars();
    std::vector<int> offset(problem.blocks.size());
    {
        int total = n;
        for (std::size_t k = 0; k < problem.blocks.size(); ++k) {
            offset[k] = total;
            total += static_cast<int>(problem.blocks[k].breakpoints.size());
        }
    }

    std::priority_queue<Node, std::vector<Node>, NodeCmp> open;
    long order = 0;

    auto solve_node = [&](Node& node) -> SolveStatus {
        const QPProblem relax = build_relaxation(problem, node.range);
        const SolveResult r = solve_qp(relax, settings.qp);
        node.bound = r.objective;
        node.relax_x = r.x;
        return r.status;
    };

    Node root;
    for (const auto& blk : problem.blocks) {
        root.range.emplace_back(0, static_cast<int>(blk.breakpoints.size()) - 1);
    }
    root.order = order++;
    out.nodes = 1;
    if (solve_node(root) == SolveStatus::Infeasible) {
        out.result.status = SolveStatus::Infeasible;
        return out;
    }
    open.push(root);

    double incumbent_obj = kInf;
    Vec incumbent_x;
    bool hit_node_limit = false;

    while (!open.empty()) {
        Node node = open.top();
        open.pop();
        if (node.bound >= incumbent_obj - settings.tol) continue;

        // SOS2 feasibility of the relaxation solution.
        int branch_block = -1;
        int branch_lo = 0, branch_hi = 0;
        for (std::size_t k = 0; k < problem.blocks.size(); ++k) {
            const int count = static_cast<int>(problem.blocks[k].breakpoints.size());
            const auto [lo, hi] = lambda_support(node.relax_x, offset[k], count, 1e-7);
            if (lo >= 0 && hi - lo > 1) {
                branch_block = static_cast<int>(k);
                branch_lo = lo;
                branch_hi = hi;
                break;
            }
        }

        if (branch_block < 0) {
            // Relaxation solution already selects segments; resolve each block
            // pinned to its segment for a clean incumbent.
            Node leaf = node;
            for (std::size_t k = 0; k < problem.blocks.size(); ++k) {
                const int count = static_cast<int>(problem.blocks[k].breakpoints.size());
                auto [lo, hi] = lambda_support(node.relax_x, offset[k], count, 1e-7);
                if (lo < 0) { lo = leaf.range[k].first; hi = lo + 1; }
                if (hi == lo) hi = std::min(lo + 1, count - 1);
                if (hi == lo) lo = hi - 1;
                leaf.range[k] = {lo, hi};
            }
            ++out.nodes;
            if (solve_node(leaf) != SolveStatus::Infeasible && leaf.bound < incumbent_obj) {
                incumbent_obj = leaf.bound;
                incumbent_x = leaf.relax_x.head(n);
            }
            continue;
        }

        if (out.nodes >= settings.node_limit) {
            hit_node_limit = true;
            break;
        }

        // Split the violating block at its midpoint breakpoint.
        const auto [a, b] = node.range[branch_block];
        int mid = (branch_lo + branch_hi) / 2;
        mid = std::clamp(mid, a + 1, b - 1);
        for (const auto& child_range : {std::pair<int, int>{a, mid}, std::pair<int, int>{mid, b}}) {
            Node child = node;
            child.range[branch_block] = child_range;
            child.order = order++;
            ++out.nodes;
            if (solve_node(child) == SolveStatus::Infeasible) continue;
            if (child.bound >= incumbent_obj - settings.tol) continue;
            open.push(child);
        }
    }

    if (incumbent_x.size() == 0) {
        out.result.status = hit_node_limit ? SolveStatus::IterationLimit : SolveStatus::Infeasible;
        return out;
    }
    out.result.status = hit_node_limit ? SolveStatus::IterationLimit : SolveStatus::Optimal;
    out.result.x = incumbent_x;
    out.result.objective = incumbent_obj;
    out.result.iterations = out.nodes;

    double viol = 0.0;
    const auto& base = problem.base;
    if (base.E.rows() > 0) viol = (base.E * incumbent_x - base.e).lpNorm<Eigen::Infinity>();
    if (base.A.rows() > 0) {
        Vec ax = base.A * incumbent_x;
        for (const auto& blk : problem.blocks) {
            const double z = blk.pwl_value(incumbent_x[blk.var]);
            for (const auto& [ri, w] : blk.rows) ax[ri] += w * z;
        }
        viol = std::max(viol, std::max(0.0, (ax - base.b).maxCoeff()));
    }
    out.result.max_violation = viol;
    return out;
}

}  // namespace ccplan
