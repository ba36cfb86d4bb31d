#pragma once

#include <string>
#include <vector>

#include "ccplan/ccik.hpp"
#include "ccplan/rrt.hpp"

namespace ccplan {

/// Remaining path risk budget threaded through the waypoint loop.
/// remaining[j] is the budget available to step j; remaining.back() is the
/// residual after the last solved step.
struct RiskLedger {
    double total = 0.0;
    std::vector<double> allocations;
    std::vector<double> remaining;  // size allocations.size() + 1

    double residual() const { return remaining.empty() ? total : remaining.back(); }
    double risk_bound() const { return total - residual(); }
    double allocation_sum() const;
};

struct PlannerConfig {
    double delta = 0.10;      // total path risk bound
    double spacing = 0.15;    // waypoint spacing, rad (<= ccik step bound)
    int attempts = 15;        // candidate planning attempts
    RRTConfig rrt;
    CCIKConfig ccik;
    // Pose-refinement sub-steps per waypoint, applied only while no collision
    // constraint is active; 0 gives exactly one solve per waypoint.
    int ik_refine_iters = 10;
    double ik_tracking_tol = 1e-3;  // rad
    // Per-step cap on the pose displacement handed to the IK. Far-away
    // targets (a lagging safe path) would both break the linearization and
    // let the tracking term outbid any risk price.
    double pose_step_cap = 0.5;
    std::uint64_t seed = 0;
    bool verbose_steps = false;
};

struct PlanResult {
    bool success = false;
    Path candidate;  // discretized guidance path
    Path safe;
    RiskLedger ledger;
    int failed_waypoint = -1;
    int attempts_used = 0;
    std::string failure;                // empty on success
    std::vector<std::string> step_log;  // JSON lines when verbose_steps
};

/// Candidate plan on the mean scene, then waypoint-by-waypoint transformation
/// through chance-constrained IK, decrementing the risk ledger. Aborts on the
/// first failed step and reports the waypoint.
PlanResult hierarchical_plan(const KinematicChain& chain, const ProblemInstance& problem,
                             const DistanceModel& model, const PlannerConfig& config);

void validate(const PlannerConfig& config);  // throws std::invalid_argument

std::string path_to_json(const Path& path, const RiskLedger* ledger = nullptr);
Path path_from_json(const std::string& text, RiskLedger* ledger = nullptr);
void save_path(const Path& path, const std::string& file, const RiskLedger* ledger = nullptr);
Path load_path(const std::string& file, RiskLedger* ledger = nullptr);

}  // namespace ccplan
