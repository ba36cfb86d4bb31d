#include "ccplan/risk_eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <atomic>
#include <thread>

namespace ccplan {

double RiskEstimate::std_error() const {
    if (samples == 0) return 0.0;
    return std::sqrt(std::max(risk * (1.0 - risk), 0.0) / samples);
}

RiskEstimate wilson_interval(int hits, int samples) {
    RiskEstimate est;
    est.hits = hits;
    est.samples = samples;
    est.risk = samples > 0 ? static_cast<double>(hits) / samples : 0.0;
    if (samples == 0) return est;
    const double z = 1.959963984540054;  // 97.5% quantile
    const double z2 = z * z;
    const double denom = 1.0 + z2 / samples;
    const double center = (est.risk + z2 / (2.0 * samples)) / denom;
    const double half =
        z * std::sqrt(est.risk * (1.0 - est.risk) / samples + z2 / (4.0 * samples * samples)) / denom;
    est.ci_lo = hits == 0 ? 0.0 : std::max(0.0, center - half);
    est.ci_hi = hits == samples ? 1.0 : std::min(1.0, center + half);
    return est;
}

namespace {

struct PathSweep {
    std::vector<CapsuleSegment> segments;  // all links at all interpolated configs
    double motion_margin = 0.0;            // surface travel bound between interpolated configs
};

PathSweep sweep_path(const KinematicChain& chain, const Path& path, double resolution) {
    PathSweep sweep;
    if (path.waypoints.empty()) return sweep;
    const int n = chain.joints();
    double lever = 0.0;
    for (const auto& l : chain.links) lever += l.length + l.offset.norm();
    sweep.motion_margin = resolution * n * lever;

    auto add_config = [&](const Vec& q) {
        const FKResult fk = forward_kinematics(chain, q);
        for (auto& seg : link_segments(chain, fk)) sweep.segments.push_back(std::move(seg));
    };
    add_config(path.waypoints[0]);
    for (std::size_t s = 1; s < path.waypoints.size(); ++s) {
        const Vec& qa = path.waypoints[s - 1];
        const Vec& qb = path.waypoints[s];
        const double dist = (qb - qa).lpNorm<Eigen::Infinity>();
        const int steps = std::max(1, static_cast<int>(std::ceil(dist / resolution)));
        for (int t = 1; t <= steps; ++t) {
            add_config(qa + (qb - qa) * (static_cast<double>(t) / steps));
        }
    }
    return sweep;
}

// Min distance from a point to every swept capsule surface, minus nothing:
// collision with a sphere of radius r means this dips below r.
double min_surface_distance(const PathSweep& sweep, const Vec& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& seg : sweep.segments) {
        best = std::min(best, capsule_point_distance(p, seg.a, seg.b, seg.radius));
    }
    return best;
}

struct NoisyPointPlan {
    int index = 0;                 // point index in the scene
    double dmin = 0.0;             // min surface distance at the mean center
    std::vector<int> near_segments;  // candidate segments within the 6-sigma shell
};

}  // namespace

RiskEstimate mc_path_risk(const KinematicChain& chain, const Path& path, const Scene& scene,
                          int samples, Rng& rng, double resolution, int jobs) {
    if (samples < 100) throw std::invalid_argument("mc_path_risk: need at least 100 samples");
    const PathSweep sweep = sweep_path(chain, path, resolution);

    // Exactly known geometry does not vary across samples.
    bool static_hit = false;
    std::vector<NoisyPointPlan> noisy;
    for (int r = 0; r < scene.size(); ++r) {
        const auto& pt = scene.points[r];
        if (pt.sigma <= 0.0) {
            if (min_surface_distance(sweep, pt.center) < pt.radius) static_hit = true;
            continue;
        }
        NoisyPointPlan plan;
        plan.index = r;
        plan.dmin = min_surface_distance(sweep, pt.center);
        const double shell = pt.radius + 6.0 * pt.sigma + sweep.motion_margin;
        for (std::size_t s = 0; s < sweep.segments.size(); ++s) {
            const auto& seg = sweep.segments[s];
            if (capsule_point_distance(pt.center, seg.a, seg.b, seg.radius) <= shell) {
                plan.near_segments.push_back(static_cast<int>(s));
            }
        }
        noisy.push_back(std::move(plan));
    }
    if (static_hit) {
        return wilson_interval(samples, samples);
    }

    const int d = scene.dim();
    constexpr int kBlock = 256;
    const int blocks = (samples + kBlock - 1) / kBlock;
    std::vector<int> block_hits(blocks, 0);

    auto run_block = [&](int blk) {
        Rng block_rng = rng.substream(static_cast<std::uint64_t>(blk));
        const int lo = blk * kBlock;
        const int hi = std::min(samples, lo + kBlock);
        int hits = 0;
        Vec xi(d);
        for (int s = lo; s < hi; ++s) {
            bool hit = false;
            for (const auto& plan : noisy) {
                const auto& pt = scene.points[plan.index];
                for (int i = 0; i < d; ++i) xi[i] = pt.sigma * block_rng.normal();
                const double xi_norm = xi.norm();
                if (hit) continue;  // keep drawing to keep the stream aligned
                // The perturbed center cannot reach the path tube.
                if (xi_norm < plan.dmin - pt.radius - sweep.motion_margin) continue;
                const Vec center = pt.center + xi;
                if (xi_norm <= 6.0 * pt.sigma) {
                    for (int sidx : plan.near_segments) {
                        const auto& seg = sweep.segments[sidx];
                        if (capsule_point_distance(center, seg.a, seg.b, seg.radius) < pt.radius) {
                            hit = true;
                            break;
                        }
                    }
                } else if (min_surface_distance(sweep, center) < pt.radius) {
                    hit = true;
                }
            }
            if (hit) ++hits;
        }
        block_hits[blk] = hits;
    };

    if (jobs <= 1) {
        for (int blk = 0; blk < blocks; ++blk) run_block(blk);
    } else {
        std::vector<std::thread> workers;
        std::atomic<int> next{0};
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&]() {
                for (int blk = next.fetch_add(1); blk < blocks; blk = next.fetch_add(1)) {
                    run_block(blk);
                }
            });
        }
        for (auto& t : workers) t.join();
    }
    int hits = 0;
    for (int h : block_hits) hits += h;  // fixed reduction order
    return wilson_interval(hits, samples);
}

std::optional<Path> inflate_baseline(const KinematicChain& chain, const ProblemInstance& problem,
                                     double ratio, const RRTConfig& config, int attempts, Rng& rng) {
    const Scene inflated = inflate_scene(problem.scene, ratio);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        Rng attempt_rng = rng.substream(attempt);
        auto path = rrt_connect(chain, inflated, problem.q_start, problem.goal, config, attempt_rng);
        if (path) return path;
    }
    return std::nullopt;
}

PathMetrics path_metrics(const KinematicChain& chain, const Path& path, double resolution) {
    if (path.waypoints.size() < 2) throw std::invalid_argument("path_metrics: need >= 2 waypoints");
    PathMetrics m;
    m.length_rad = path_length(path);
    const Path fine = discretize(path, resolution);
    Vec prev = forward_kinematics(chain, fine.waypoints[0]).ee.translation;
    for (std::size_t i = 1; i < fine.waypoints.size(); ++i) {
        const Vec cur = forward_kinematics(chain, fine.waypoints[i]).ee.translation;
        m.ee_disp_m += (cur - prev).norm();
        prev = cur;
    }
    return m;
}

double sign_test_p_value(int wins, int losses) {
    const int n = wins + losses;
    if (n == 0) return 1.0;
    // One-sided binomial tail: P(X >= wins), X ~ Binomial(n, 1/2).
    double p = 0.0;
    for (int k = wins; k <= n; ++k) {
        const double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(log_c - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

namespace {

std::string method_name(double ratio) {
    std::ostringstream os;
    os << "inflate-" << static_cast<int>(std::lround(ratio * 100)) << "%";
    return os.str();
}

}  // namespace

std::vector<std::string> BenchmarkReport::methods() const {
    std::vector<std::string> out;
    for (const auto& row : rows) {
        if (std::find(out.begin(), out.end(), row.method) == out.end()) out.push_back(row.method);
    }
    return out;
}

bool BenchmarkReport::method_means(const std::string& method, double* risk, double* len,
                                   double* disp) const {
    double r = 0, l = 0, d = 0;
    int count = 0;
    for (const auto& row : rows) {
        if (row.method != method || !row.success) continue;
        r += row.risk.risk;
        l += row.metrics.length_rad;
        d += row.metrics.ee_disp_m;
        ++count;
    }
    if (count == 0) return false;
    if (risk) *risk = r / count;
    if (len) *len = l / count;
    if (disp) *disp = d / count;
    return true;
}

std::string BenchmarkReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& line : {config_echo}) {
        if (!line.empty()) {
            std::istringstream is(line);
            std::string row;
            while (std::getline(is, row)) os << "# " << row << "\n";
        }
    }
    os << "problem,method,success,risk,ci_lo,ci_hi,risk_bound,initial_risk,"
          "path_length_rad,ee_disp_m,plan_time_s\n";
    for (const auto& row : rows) {
        os << row.problem << "," << row.method << "," << (row.success ? 1 : 0) << ","
           << row.risk.risk << "," << row.risk.ci_lo << "," << row.risk.ci_hi << ","
           << row.risk_bound << "," << row.initial_risk << "," << row.metrics.length_rad << ","
           << row.metrics.ee_disp_m << "," << row.plan_time_s << "\n";
    }
    return os.str();
}

void save_report_csv(const BenchmarkReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << report.to_csv();
}

BenchmarkReport run_benchmark(const KinematicChain& chain,
                              const std::vector<ProblemInstance>& problems,
                              const DistanceModel& model, const BenchmarkConfig& config) {
    BenchmarkReport report;
    const int P = static_cast<int>(problems.size());
    const int methods = 1 + static_cast<int>(config.ratios.size());
    report.rows.resize(static_cast<std::size_t>(P) * methods);
    Rng root(config.seed);

    // Nested parallelism is pointless: MC sampling runs multi-threaded only
    // when problems are processed serially.
    const int mc_jobs = (config.jobs > 1 && P > 1) ? 1 : config.jobs;

    auto run_problem = [&](int p) {
        const ProblemInstance& problem = problems[p];
        using clock = std::chrono::steady_clock;

        // Proposed method.
        {
            BenchmarkRow row;
            row.problem = p;
            row.method = "proposed";
            PlannerConfig pc = config.planner;
            pc.seed = root.substream(1000 + p).root_seed();
            const auto t0 = clock::now();
            const PlanResult plan = hierarchical_plan(chain, problem, model, pc);
            row.plan_time_s = config.record_timing
                                  ? std::chrono::duration<double>(clock::now() - t0).count()
                                  : 0.0;
            row.success = plan.success;
            if (plan.success) {
                Rng mc_rng = root.substream(2000 + p);
                row.risk = mc_path_risk(chain, plan.safe, problem.scene, config.mc_samples, mc_rng,
                                        1e-3, mc_jobs);
                Rng mc_rng2 = root.substream(3000 + p);
                row.initial_risk = mc_path_risk(chain, plan.candidate, problem.scene,
                                                config.mc_samples, mc_rng2, 1e-3, mc_jobs)
                                       .risk;
                row.risk_bound = plan.ledger.risk_bound();
                row.metrics = path_metrics(chain, plan.safe);
                row.ledger = plan.ledger;
                row.path = plan.safe;
                row.candidate = plan.candidate;
            }
            report.rows[static_cast<std::size_t>(p) * methods] = std::move(row);
        }

        // Inflation baselines.
        for (std::size_t m = 0; m < config.ratios.size(); ++m) {
            const double ratio = config.ratios[m];
            BenchmarkRow row;
            row.problem = p;
            row.method = method_name(ratio);
            Rng plan_rng = root.substream(4000 + 10 * p + static_cast<int>(m));
            const auto t0 = clock::now();
            auto path = inflate_baseline(chain, problem, ratio, config.planner.rrt,
                                         config.planner.attempts, plan_rng);
            row.plan_time_s = config.record_timing
                                  ? std::chrono::duration<double>(clock::now() - t0).count()
                                  : 0.0;
            row.success = path.has_value();
            if (path) {
                Rng mc_rng = root.substream(5000 + 10 * p + static_cast<int>(m));
                row.risk = mc_path_risk(chain, *path, problem.scene, config.mc_samples, mc_rng, 1e-3,
                                        mc_jobs);
                row.metrics = path_metrics(chain, *path);
                row.path = *path;
            }
            report.rows[static_cast<std::size_t>(p) * methods + 1 + m] = std::move(row);
        }
    };

    if (config.jobs <= 1 || P == 1) {
        for (int p = 0; p < P; ++p) run_problem(p);
    } else {
        std::vector<std::thread> workers;
        std::atomic<int> next{0};
        const int count = std::min(config.jobs, P);
        for (int w = 0; w < count; ++w) {
            workers.emplace_back([&]() {
                for (int p = next.fetch_add(1); p < P; p = next.fetch_add(1)) run_problem(p);
            });
        }
        for (auto& t : workers) t.join();
    }
    return report;
}

}  // namespace ccplan
