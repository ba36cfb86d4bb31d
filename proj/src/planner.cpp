#include "ccplan/planner.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ccplan {

double RiskLedger::allocation_sum() const {
    double s = 0.0;
    for (double a : allocations) s += a;
    return s;
}

void validate(const PlannerConfig& config) {
    if (!(config.delta > 0.0 && config.delta <= 0.5))
        throw std::invalid_argument("planner: delta must be in (0, 0.5]");
    if (config.spacing > config.ccik.step_bound + 1e-12)
        throw std::invalid_argument("planner: spacing must not exceed the ccik step bound");
    if (config.attempts < 1) throw std::invalid_argument("planner: attempts must be >= 1");
}

PlanResult hierarchical_plan(const KinematicChain& chain, const ProblemInstance& problem,
                             const DistanceModel& model, const PlannerConfig& config) {
    validate(config);
    PlanResult result;
    Rng rng(config.seed);

    // Candidate plan on the mean scene, up to the attempts limit.
    std::optional<Path> candidate;
    for (int attempt = 0; attempt < config.attempts; ++attempt) {
        Rng attempt_rng = rng.substream(attempt);
        candidate = rrt_connect(chain, problem.scene, problem.q_start, problem.goal, config.rrt,
                                attempt_rng);
        ++result.attempts_used;
        if (candidate) break;
    }
    if (!candidate) {
        result.failure = "candidate planning failed after " + std::to_string(config.attempts) +
                         " attempts";
        return result;
    }
    result.candidate = discretize(*candidate, config.spacing);
    const auto& guide = result.candidate.waypoints;
    const int T = static_cast<int>(guide.size()) - 1;

    result.ledger.total = config.delta;
    result.ledger.remaining.push_back(config.delta);
    result.safe.kind = PathKind::Safe;
    result.safe.waypoints.push_back(guide[0]);

    Vec q = guide[0];
    for (int j = 0; j < T; ++j) {
        const Vec full_target = ee_pose_vector(chain, guide[j + 1]);
        const double budget_j = result.ledger.remaining.back();
        double allocated_j = 0.0;
        bool step_failed = false;

        // One mandatory solve; extra pose-refinement sub-steps run only while
        // the active constraint set stays empty, so they never consume risk.
        // Refinement solves with a stiff slack weight, which makes each
        // sub-step an (almost) exact linearized IK correction.
        for (int sub = 0; sub <= config.ik_refine_iters; ++sub) {
            Vec diff = full_target - ee_pose_vector(chain, q);
            if (chain.dim == 2) diff[chain.dim] = wrap_angle(diff[chain.dim]);
            const double dist = diff.norm();
            if (dist > config.pose_step_cap) diff *= config.pose_step_cap / dist;

            CCIKInput input;
            input.chain = &chain;
            input.model = &model;
            input.scene = &problem.scene;
            input.q_current = q;
            input.target_pose = ee_pose_vector(chain, q) + diff;
            input.budget = std::max(budget_j - allocated_j, 1e-12);
            input.config = config.ccik;
            if (sub > 0) {
                const int pd = config.ccik.position_only ? chain.dim : chain.pose_dim();
                input.config.D_slack = 1e6 * Mat::Identity(pd, pd);
            }

            const CCIKSolution sol = ccikopt(input);
            if (config.verbose_steps) {
                result.step_log.push_back(ccik_debug_json(sol, j, input.budget));
            }
            if (sol.status != SolveStatus::Optimal) {
                if (sub == 0) {
                    step_failed = true;
                }
                break;
            }
            // Refinement is pure IK polish: a sub-step that would enter the
            // constrained region (and hence buy risk) is discarded.
            if (sub > 0 && !sol.constraints.empty()) break;
            q += sol.delta_q;
            allocated_j += sol.allocated_total;
            if (!sol.constraints.empty()) break;  // constrained step: exactly one solve
            if (sub == config.ik_refine_iters) break;
            if ((q - guide[j + 1]).lpNorm<Eigen::Infinity>() < 0.25 * config.ik_tracking_tol ||
                (sub > 0 && sol.delta_q.lpNorm<Eigen::Infinity>() < 1e-9)) {
                break;
            }
        }

        if (step_failed) {
            result.failed_waypoint = j;
            result.failure = "chance-constrained IK infeasible at waypoint " + std::to_string(j);
            return result;
        }
        result.safe.waypoints.push_back(q);
        result.ledger.allocations.push_back(allocated_j);
        result.ledger.remaining.push_back(budget_j - allocated_j);
    }

    result.success = true;
    return result;
}

namespace {

nlohmann::json vec_to_json(const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const nlohmann::json& a) {
    Vec v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

}  // namespace

std::string path_to_json(const Path& path, const RiskLedger* ledger) {
    nlohmann::json j;
    j["kind"] = path.kind == PathKind::Safe ? "safe" : "candidate";
    nlohmann::json wps = nlohmann::json::array();
    for (const auto& q : path.waypoints) wps.push_back(vec_to_json(q));
    j["waypoints"] = wps;
    if (ledger) {
        j["risk_bound"] = ledger->risk_bound();
        j["residual_budget"] = ledger->residual();
        j["total_budget"] = ledger->total;
        j["allocations"] = ledger->allocations;
    }
    return j.dump(2);
}

Path path_from_json(const std::string& text, RiskLedger* ledger) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Path path;
    path.kind = j.at("kind").get<std::string>() == "safe" ? PathKind::Safe : PathKind::Candidate;
    for (const auto& wj : j.at("waypoints")) path.waypoints.push_back(vec_from_json(wj));
    if (ledger && j.contains("allocations")) {
        ledger->total = j.value("total_budget", 0.0);
        ledger->allocations = j["allocations"].get<std::vector<double>>();
        ledger->remaining.clear();
        ledger->remaining.push_back(ledger->total);
        for (double a : ledger->allocations) {
            ledger->remaining.push_back(ledger->remaining.back() - a);
        }
    }
    return path;
}

void save_path(const Path& path, const std::string& file, const RiskLedger* ledger) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write path file: " + file);
    out << path_to_json(path, ledger) << "\n";
}

Path load_path(const std::string& file, RiskLedger* ledger) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open path file: " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    return path_from_json(ss.str(), ledger);
}

}  // namespace ccplan
