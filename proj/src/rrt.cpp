#include "ccplan/rrt.hpp"

#include <algorithm>
#include <cmath>

namespace ccplan {

bool edge_collision_free(const KinematicChain& chain, const Scene& scene, const Vec& qa,
                         const Vec& qb, double resolution) {
    const double dist = (qb - qa).lpNorm<Eigen::Infinity>();
    const int steps = std::max(1, static_cast<int>(std::ceil(dist / resolution)));
    for (int t = 0; t <= steps; ++t) {
        const Vec q = qa + (qb - qa) * (static_cast<double>(t) / steps);
        if (config_in_collision(chain, q, scene)) return false;
    }
    return true;
}

std::vector<Vec> sample_goal_configs(const KinematicChain& chain, const Scene& scene,
                                     const GoalRegion& goal, int count, int attempts, Rng& rng) {
    std::vector<Vec> configs;
    const int n = chain.joints();
    const Vec target = goal.pose_vector();
    for (int a = 0; a < attempts && static_cast<int>(configs.size()) < count; ++a) {
        Vec q(n);
        for (int i = 0; i < n; ++i) q[i] = rng.uniform(chain.lower[i], chain.upper[i]);
        // Damped least-squares iteration toward the goal pose.
        bool converged = false;
        for (int it = 0; it < 150; ++it) {
            Vec err = target - ee_pose_vector(chain, q);
            if (chain.dim == 2) err[2] = wrap_angle(err[2]);
            const double pos_err = err.head(chain.dim).norm();
            const double ang_err = err.tail(chain.pose_dim() - chain.dim).norm();
            if (pos_err < 0.5 * goal.position_tol && ang_err < 0.5 * goal.angle_tol) {
                converged = true;
                break;
            }
            const Mat J = jacobian(chain, q);
            const Mat JJt = J * J.transpose() + 1e-6 * Mat::Identity(J.rows(), J.rows());
            Vec dq = J.transpose() * JJt.ldlt().solve(err);
            const double norm = dq.lpNorm<Eigen::Infinity>();
            if (norm > 0.3) dq *= 0.3 / norm;
            q += dq;
            for (int i = 0; i < n; ++i) q[i] = std::clamp(q[i], chain.lower[i], chain.upper[i]);
        }
        if (!converged) continue;
        if (!goal.contains(chain, q)) continue;
        if (config_in_collision(chain, q, scene)) continue;
        configs.push_back(q);
    }
    return configs;
}

namespace {

struct Tree {
    std::vector<Vec> nodes;
    std::vector<int> parent;

    int nearest(const Vec& q) const {
        int best = 0;
        double best_d = (nodes[0] - q).squaredNorm();
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            const double d = (nodes[i] - q).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        return best;
    }

    int add(const Vec& q, int par) {
        nodes.push_back(q);
        parent.push_back(par);
        return static_cast<int>(nodes.size()) - 1;
    }

    std::vector<Vec> trace(int idx) const {
        std::vector<Vec> out;
        for (int i = idx; i >= 0; i = parent[i]) out.push_back(nodes[i]);
        std::reverse(out.begin(), out.end());
        return out;
    }
};

enum class ExtendResult { Trapped, Advanced, Reached };

ExtendResult extend(Tree& tree, const Vec& q_target, const KinematicChain& chain, const Scene& scene,
                    const RRTConfig& cfg, int& new_idx) {
    const int near = tree.nearest(q_target);
    const Vec& q_near = tree.nodes[near];
    const double dist = (q_target - q_near).norm();
    if (dist < 1e-12) {
        new_idx = near;
        return ExtendResult::Reached;
    }
    const bool reached = dist <= cfg.step;
    const Vec q_new = reached ? q_target : Vec(q_near + (q_target - q_near) * (cfg.step / dist));
    if (!edge_collision_free(chain, scene, q_near, q_new, cfg.resolution)) {
        return ExtendResult::Trapped;
    }
    new_idx = tree.add(q_new, near);
    return reached ? ExtendResult::Reached : ExtendResult::Advanced;
}

std::vector<Vec> shortcut(const KinematicChain& chain, const Scene& scene,
                          std::vector<Vec> waypoints, const RRTConfig& cfg, Rng& rng) {
    for (int round = 0; round < cfg.shortcut_rounds; ++round) {
        if (waypoints.size() < 3) break;
        const int count = static_cast<int>(waypoints.size());
        int i = static_cast<int>(rng.uniform_int(count - 1));
        int j = static_cast<int>(rng.uniform_int(count - 1));
        if (i > j) std::swap(i, j);
        if (j - i < 2) continue;
        if (edge_collision_free(chain, scene, waypoints[i], waypoints[j], cfg.resolution)) {
            waypoints.erase(waypoints.begin() + i + 1, waypoints.begin() + j);
        }
    }
    return waypoints;
}

}  // namespace

std::optional<Path> rrt_connect(const KinematicChain& chain, const Scene& scene, const Vec& q_start,
                                const GoalRegion& goal, const RRTConfig& config, Rng& rng) {
    if (config_in_collision(chain, q_start, scene)) return std::nullopt;
    if (goal.contains(chain, q_start)) {
        Path path;
        path.waypoints = {q_start, q_start};
        return path;
    }
    const std::vector<Vec> goal_configs =
        sample_goal_configs(chain, scene, goal, config.goal_configs, config.goal_ik_attempts, rng);
    if (goal_configs.empty()) return std::nullopt;

    Tree start_tree, goal_tree;
    start_tree.add(q_start, -1);
    for (const auto& g : goal_configs) goal_tree.add(g, -1);

    Tree* a = &start_tree;
    Tree* b = &goal_tree;
    bool a_is_start = true;
    const int n = chain.joints();

    for (int iter = 0; iter < config.max_iters; ++iter) {
        Vec q_rand(n);
        for (int i = 0; i < n; ++i) q_rand[i] = rng.uniform(chain.lower[i], chain.upper[i]);

        int a_new = -1;
        if (extend(*a, q_rand, chain, scene, config, a_new) != ExtendResult::Trapped) {
            // Greedily connect the other tree to the new node.
            int b_new = -1;
            ExtendResult r = ExtendResult::Advanced;
            while (r == ExtendResult::Advanced) {
                r = extend(*b, a->nodes[a_new], chain, scene, config, b_new);
            }
            if (r == ExtendResult::Reached) {
                auto from_a = a->trace(a_new);
                auto from_b = b->trace(b_new);
                std::vector<Vec> waypoints;
                if (a_is_start) {
                    waypoints = std::move(from_a);
                    waypoints.insert(waypoints.end(), from_b.rbegin(), from_b.rend());
                } else {
                    waypoints = std::move(from_b);
                    waypoints.insert(waypoints.end(), from_a.rbegin(), from_a.rend());
                }
                // Drop the duplicated junction node.
                for (std::size_t i = 1; i < waypoints.size();) {
                    if ((waypoints[i] - waypoints[i - 1]).norm() < 1e-12) {
                        waypoints.erase(waypoints.begin() + static_cast<long>(i));
                    } else {
                        ++i;
                    }
                }
                Path path;
                path.kind = PathKind::Candidate;
                path.waypoints = shortcut(chain, scene, std::move(waypoints), config, rng);
                if (path.waypoints.size() < 2) path.waypoints.push_back(path.waypoints.back());
                return path;
            }
        }
        std::swap(a, b);
        a_is_start = !a_is_start;
    }
    return std::nullopt;
}

Path discretize(const Path& path, double spacing) {
    if (path.waypoints.size() < 2 || spacing <= 0.0) return path;
    Path out;
    out.kind = path.kind;
    out.waypoints.push_back(path.waypoints.front());
    for (std::size_t s = 1; s < path.waypoints.size(); ++s) {
        const Vec& qa = path.waypoints[s - 1];
        const Vec& qb = path.waypoints[s];
        const double dist = (qb - qa).lpNorm<Eigen::Infinity>();
        const int steps = std::max(1, static_cast<int>(std::ceil(dist / spacing - 1e-9)));
        for (int t = 1; t < steps; ++t) {
            out.waypoints.push_back(qa + (qb - qa) * (static_cast<double>(t) / steps));
        }
        out.waypoints.push_back(qb);  // exact endpoint
    }
    return out;
}

double path_length(const Path& path) {
    double len = 0.0;
    for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
        len += (path.waypoints[i] - path.waypoints[i - 1]).norm();
    }
    return len;
}

}  // namespace ccplan
