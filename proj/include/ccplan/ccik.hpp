#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ccplan/chain.hpp"
#include "ccplan/mip.hpp"
#include "ccplan/model.hpp"
#include "ccplan/pwl.hpp"
#include "ccplan/qp.hpp"
#include "ccplan/scene.hpp"

namespace ccplan {

/// Source of per-link Gaussian distance parameters for planning queries.
class DistanceModel {
public:
    virtual ~DistanceModel() = default;
    virtual int links() const = 0;
    virtual DistancePrediction predict(const Vec& q, const Vec& x, bool want_grad) const = 0;
};

/// Trained network behind the DistanceModel interface.
class NeuralDistanceModel final : public DistanceModel {
public:
    NeuralDistanceModel(ModelConfig cfg, ModelParams params)
        : cfg_(std::move(cfg)), params_(std::move(params)) {}
    explicit NeuralDistanceModel(const std::string& checkpoint_path);

    int links() const override { return cfg_.K; }
    DistancePrediction predict(const Vec& q, const Vec& x, bool want_grad) const override {
        return forward(params_, cfg_, q, x, want_grad);
    }
    const ModelConfig& config() const { return cfg_; }
    const ModelParams& params() const { return params_; }

private:
    ModelConfig cfg_;
    ModelParams params_;
};

/// Reference model backed by the exact capsule distance oracle with a fixed
/// sigma; used for validation and planner tests that should not depend on
/// training quality.
class AnalyticDistanceModel final : public DistanceModel {
public:
    AnalyticDistanceModel(KinematicChain chain, double sigma)
        : chain_(std::move(chain)), sigma_(sigma) {}

    int links() const override { return chain_.joints(); }
    DistancePrediction predict(const Vec& q, const Vec& x, bool want_grad) const override;

private:
    KinematicChain chain_;
    double sigma_;
};

struct CCIKConfig {
    double step_bound = 0.2;      // ||dq||_inf per waypoint, rad
    double prune_distance = 0.5;  // keep constraints with mu - r <= this; < 0 disables pruning
    int pwl_segments = 16;
    double gamma_bar_max = 1.0 - 1e-6;
    bool use_mip = false;         // solve the segment-selection MIP instead of the convex form
    bool position_only = false;   // pose equality on position rows only
    Mat Q_motion, D_slack;        // empty -> I and 10 I
    // Price of one unit of allocated risk against the quadratic motion and
    // slack terms. Must be large enough that the optimizer prefers deviating
    // around obstacles over buying risk for tracking.
    double h_risk = 50.0;
    bool retry_half_step = true;  // one retry with halved step bound on infeasibility
    QPSettings qp;
};

struct CCIKInput {
    const KinematicChain* chain = nullptr;
    const DistanceModel* model = nullptr;
    const Scene* scene = nullptr;
    Vec q_current;
    Vec target_pose;  // pose vector of the next candidate waypoint
    double budget = 0.0;
    CCIKConfig config;
};

/// One linearized collision constraint: for g ~ N(mu, sigma^2),
///   gradient' dq <= g   must hold with probability >= gamma_bar.
/// mu already has the sphere radius subtracted; gradient = -d(mu)/dq.
struct ActiveConstraint {
    int link = 0;
    int point = 0;
    double mu = 0.0;
    double sigma = 0.0;
    Vec gradient;
};

std::vector<ActiveConstraint> gather_constraints(const CCIKInput& input);

/// Deterministic reformulation assembled for the solver.
///
/// Convex form: decision vector [dq; slack; z; a] where z_j stands in for
/// pwl(gamma_bar_j) and a_j >= 1 - pwl^{-1}(z_j) is the allocation charged to
/// constraint j (epigraph of the concave inverse, one row per PWL piece).
/// This substitution keeps every coefficient near unit scale; the direct
/// gamma_bar encoding puts the steep top-segment slopes into the constraint
/// matrix, which cripples first-order solvers.
///
/// MIP form: decision vector [dq; slack; gamma_bar] with one PWL block per
/// constraint for branch-and-bound.
struct AssembledCCIK {
    QPProblem qp;
    MIPProblem mip;
    PWLApprox pwl;
    int n = 0;
    int pose_rows = 0;
    int constraint_count = 0;
    int z_offset = 0;      // column of the first z variable (convex form)
    int alloc_offset = 0;  // column of the first allocation variable (convex form)
    int gamma_offset = 0;  // column of the first gamma_bar variable (MIP form)
    double effective_budget = 0.0;
};

AssembledCCIK assemble(const CCIKInput& input, const std::vector<ActiveConstraint>& constraints);

struct CCIKSolution {
    SolveStatus status = SolveStatus::Infeasible;
    Vec delta_q;
    Vec slack;
    std::vector<ActiveConstraint> constraints;
    Vec gamma_bar;                 // per constraint
    double allocated_total = 0.0;  // sum(1 - gamma_bar)
    double objective = 0.0;
    int iterations = 0;
    bool used_half_step = false;
};

/// Solve one waypoint step: gather, assemble, solve; on infeasibility retry
/// once with the step bound halved (when enabled).
CCIKSolution ccikopt(const CCIKInput& input);

/// Per-step debug record (JSON) for verbose planner logs.
std::string ccik_debug_json(const CCIKSolution& sol, int waypoint, double budget);

}  // namespace ccplan
