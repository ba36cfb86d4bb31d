#include <doctest.h>

#include "ccplan/mip.hpp"
#include "ccplan/normal.hpp"
#include "ccplan/pwl.hpp"
#include "ccplan/rng.hpp"

using namespace ccplan;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// min (x0 - target)^2 s.t. x0's pwl-bounded companion row:
//   w * pwl(x1) - x0 <= 0, x1 in [0,1]. Values define the pwl.
MIPProblem toy_problem(const Vec& breakpoints, const Vec& values, double target, double w) {
    MIPProblem mp;
    QPProblem& p = mp.base;
    p.P = Mat::Zero(2, 2);
    p.P(0, 0) = 1.0;
    p.P(1, 1) = 1e-6;
    p.q = Vec::Zero(2);
    p.q[0] = -2.0 * target;
    p.E = Mat(0, 2);
    p.e = Vec(0);
    p.A = Mat::Zero(1, 2);
    p.A(0, 0) = -1.0;
    p.b = Vec::Zero(1);
    p.lb = Vec(2);
    p.lb << -kInf, breakpoints[0];
    p.ub = Vec(2);
    p.ub << kInf, breakpoints[breakpoints.size() - 1];
    PWLConstraintBlock blk;
    blk.var = 1;
    blk.breakpoints = breakpoints;
    blk.values = values;
    blk.rows.emplace_back(0, w);
    mp.blocks.push_back(blk);
    return mp;
}

// Exhaustive enumeration over segment assignments: restrict each block's
// variable to one segment and replace the pwl by that chord.
double enumerate_segments(const MIPProblem& mp) {
    const auto& blocks = mp.blocks;
    std::vector<int> choice(blocks.size(), 0);
    double best = kInf;
    while (true) {
        QPProblem p = mp.base;
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const auto& blk = blocks[k];
            const int seg = choice[k];
            const double x0 = blk.breakpoints[seg], x1 = blk.breakpoints[seg + 1];
            const double slope = (blk.values[seg + 1] - blk.values[seg]) / (x1 - x0);
            const double intercept = blk.values[seg] - slope * x0;
            for (const auto& [ri, wgt] : blk.rows) {
                p.A(ri, blk.var) += wgt * slope;
                p.b[ri] -= wgt * intercept;
            }
            p.lb[blk.var] = std::max(p.lb[blk.var], x0);
            p.ub[blk.var] = std::min(p.ub[blk.var], x1);
        }
        bool feasible_box = true;
        for (int i = 0; i < p.vars(); ++i) {
            if (p.lb.size() > 0 && p.ub.size() > 0 && p.lb[i] > p.ub[i]) feasible_box = false;
        }
        if (feasible_box) {
            const auto r = solve_qp(p);
            if (r.status == SolveStatus::Optimal) best = std::min(best, r.objective);
        }
        // Advance the mixed-radix counter.
        std::size_t k = 0;
        while (k < blocks.size()) {
            if (++choice[k] < blocks[k].segments()) break;
            choice[k] = 0;
            ++k;
        }
        if (k == blocks.size()) break;
    }
    return best;
}

}  // namespace

TEST_CASE("single-segment PWL reduces to the plain QP") {
    Vec bp(2), vals(2);
    bp << 0.0, 1.0;
    vals << 0.2, 0.8;  // pwl(x1) = 0.2 + 0.6 x1
    const MIPProblem mp = toy_problem(bp, vals, -1.0, 1.0);
    const auto mip = solve_mip(mp);
    REQUIRE(mip.result.status == SolveStatus::Optimal);

    QPProblem qp = mp.base;
    qp.A(0, 1) = 0.6;
    qp.b[0] = -0.2;
    const auto ref = solve_qp(qp);
    REQUIRE(ref.status == SolveStatus::Optimal);
    CHECK(mip.result.objective == doctest::Approx(ref.objective).epsilon(1e-6));
}

TEST_CASE("convex PWL: MIP agrees with the convex piece-row encoding") {
    // Convex values (secants of logit-like curvature).
    const auto pwl = default_logit_pwl(6);
    Vec vals(pwl.breakpoints.size());
    for (int i = 0; i < vals.size(); ++i) vals[i] = pwl.breakpoint_value(i);

    MIPProblem mp = toy_problem(pwl.breakpoints, vals, 3.0, 2.0);
    const auto mip = solve_mip(mp);
    REQUIRE(mip.result.status == SolveStatus::Optimal);

    // Convex mode: all pieces as simultaneous rows.
    QPProblem qp = mp.base;
    const int pieces = pwl.segments();
    Mat A(1 + pieces, 2);
    Vec b(1 + pieces);
    A.row(0) = qp.A.row(0);
    b[0] = qp.b[0];
    for (int i = 0; i < pieces; ++i) {
        A(1 + i, 0) = -1.0;
        A(1 + i, 1) = 2.0 * pwl.slope[i];
        b[1 + i] = -2.0 * pwl.intercept[i];
    }
    qp.A = A;
    qp.b = b;
    qp.A.row(0).setZero();  // replaced by the piece rows
    qp.b[0] = 1e6;
    const auto ref = solve_qp(qp);
    REQUIRE(ref.status == SolveStatus::Optimal);
    CHECK(mip.result.objective == doctest::Approx(ref.objective).epsilon(1e-5));
}

TEST_CASE("nonconvex PWL toys match exhaustive segment enumeration") {
    Rng rng(47);
    int compared = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int segments = 2 + static_cast<int>(rng.uniform_int(3));
        Vec bp(segments + 1), vals(segments + 1);
        for (int i = 0; i <= segments; ++i) {
            bp[i] = static_cast<double>(i) / segments;
            vals[i] = rng.uniform(-1.0, 1.0);  // generically nonconvex
        }
        const double target = rng.uniform(-2.0, 2.0);
        const double w = rng.uniform(0.5, 2.0);
        const MIPProblem mp = toy_problem(bp, vals, target, w);
        const auto mip = solve_mip(mp);
        const double ref = enumerate_segments(mp);
        REQUIRE(mip.result.status == SolveStatus::Optimal);
        REQUIRE(ref < kInf);
        CHECK(mip.result.objective == doctest::Approx(ref).epsilon(1e-5));
        ++compared;
    }
    CHECK(compared == 50);
}

TEST_CASE("node limit reports iteration-limit") {
    Rng rng(51);
    Vec bp(5), vals(5);
    for (int i = 0; i < 5; ++i) {
        bp[i] = i / 4.0;
        vals[i] = rng.uniform(-1, 1);
    }
    MIPSettings settings;
    settings.node_limit = 1;
    const auto mip = solve_mip(toy_problem(bp, vals, 2.0, 1.0), settings);
    CHECK((mip.result.status == SolveStatus::IterationLimit ||
           mip.result.status == SolveStatus::Optimal));
}
