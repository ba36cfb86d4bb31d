#pragma once

#include <vector>

#include "ccplan/pwl.hpp"
#include "ccplan/qp.hpp"

namespace ccplan {

/// One piecewise-affine term entering inequality rows of a QP: row `ri` of
/// base.A gains + weight * pwl(x[var]), where pwl is the continuous
/// interpolant through (breakpoints[i], values[i]).
struct PWLConstraintBlock {
    int var = 0;
    Vec breakpoints;
    Vec values;
    std::vector<std::pair<int, double>> rows;  // (inequality row, weight >= 0)

    int segments() const { return static_cast<int>(breakpoints.size()) - 1; }
    double pwl_value(double x) const;
};

/// QP plus PWL terms whose segment choice is combinatorial (nonconvex pwl).
struct MIPProblem {
    QPProblem base;
    std::vector<PWLConstraintBlock> blocks;
};

struct MIPSettings {
    double tol = 1e-6;
    int node_limit = 10000;
    QPSettings qp;
};

struct MIPResult {
    SolveResult result;
    int nodes = 0;
};

/// Best-first branch-and-bound on the lambda (SOS2) encoding of each PWL
/// block; node bounds come from the convex relaxation solved by solve_qp.
/// Deterministic: ties broken by bound then insertion order.
MIPResult solve_mip(const MIPProblem& problem, const MIPSettings& settings = {});

}  // namespace ccplan
