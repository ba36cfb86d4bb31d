#pragma once

#include <optional>
#include <vector>

#include "ccplan/chain.hpp"
#include "ccplan/rng.hpp"
#include "ccplan/scene.hpp"

namespace ccplan {

enum class PathKind { Candidate, Safe };

struct Path {
    PathKind kind = PathKind::Candidate;
    std::vector<Vec> waypoints;

    int segments() const { return static_cast<int>(waypoints.size()) - 1; }
};

struct RRTConfig {
    double step = 0.15;        // extension step, rad (L2)
    int max_iters = 30000;
    double resolution = 1e-3;  // edge collision-check spacing, rad (inf-norm)
    int shortcut_rounds = 200;
    int goal_configs = 8;      // IK-seeded goal-tree roots
    int goal_ik_attempts = 200;
};

/// Straight-line edge check against the mean scene at the given resolution.
bool edge_collision_free(const KinematicChain& chain, const Scene& scene, const Vec& qa,
                         const Vec& qb, double resolution);

/// Goal configurations inside the EE goal region, found by damped-least-squares
/// IK from random seeds, collision-free against the mean scene.
std::vector<Vec> sample_goal_configs(const KinematicChain& chain, const Scene& scene,
                                     const GoalRegion& goal, int count, int attempts, Rng& rng);

/// Bidirectional RRT-Connect on the mean scene followed by shortcut
/// simplification. Returns nullopt on iteration exhaustion (one attempt).
std::optional<Path> rrt_connect(const KinematicChain& chain, const Scene& scene, const Vec& q_start,
                                const GoalRegion& goal, const RRTConfig& config, Rng& rng);

/// Insert waypoints so consecutive ones are at most `spacing` apart in the
/// inf-norm; endpoints preserved.
Path discretize(const Path& path, double spacing);

/// Sum of L2 waypoint steps, rad.
double path_length(const Path& path);

}  // namespace ccplan
