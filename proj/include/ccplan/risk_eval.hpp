#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccplan/ccik.hpp"
#include "ccplan/planner.hpp"
#include "ccplan/rrt.hpp"
#include "ccplan/scene.hpp"

namespace ccplan {

struct RiskEstimate {
    double risk = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  // 95% Wilson interval
    int samples = 0;
    int hits = 0;

    double std_error() const;
};

/// Wilson score interval for a binomial proportion (95%).
RiskEstimate wilson_interval(int hits, int samples);

/// Monte-Carlo estimate of the path collision probability against the
/// generative noise: each sample draws a scene realization and densely checks
/// every edge at `resolution` (rad, inf-norm). Deterministic given the rng
/// seed, independent of `jobs`.
RiskEstimate mc_path_risk(const KinematicChain& chain, const Path& path, const Scene& scene,
                          int samples, Rng& rng, double resolution = 1e-3, int jobs = 1);

/// Uncertainty-inflation baseline: candidate pipeline against the mean scene
/// with every noisy radius scaled by (1 + ratio). Ratio 0 is the
/// uncertainty-unaware baseline.
std::optional<Path> inflate_baseline(const KinematicChain& chain, const ProblemInstance& problem,
                                     double ratio, const RRTConfig& config, int attempts, Rng& rng);

struct PathMetrics {
    double length_rad = 0.0;   // sum of L2 waypoint steps
    double ee_disp_m = 0.0;    // EE arc length at fine discretization
};

PathMetrics path_metrics(const KinematicChain& chain, const Path& path, double resolution = 0.01);

/// One-sided sign test: probability of >= wins successes in wins + losses
/// fair coin флips.
double sign_test_p_value(int wins, int losses);

struct BenchmarkConfig {
    int mc_samples = 5000;                          // paper fidelity: 20000
    std::vector<double> ratios = {0.0, 0.2, 0.4, 0.6};
    PlannerConfig planner;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool record_timing = true;  // zeroed for bit-exact reproducibility checks
};

struct BenchmarkRow {
    int problem = 0;
    std::string method;
    bool success = false;
    RiskEstimate risk;
    double risk_bound = -1.0;    // proposed only
    double initial_risk = -1.0;  // proposed only: candidate path risk
    PathMetrics metrics;
    double plan_time_s = 0.0;
    RiskLedger ledger;           // proposed only
    Path path;                   // empty when planning failed
    Path candidate;              // proposed only
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    std::string config_echo;  // echoed into the CSV header comments

    std::string to_csv() const;
    std::vector<std::string> methods() const;
    /// Mean over successful rows of one method; risk/len/disp columns.
    bool method_means(const std::string& method, double* risk, double* len, double* disp) const;
};

/// Full comparison sweep: proposed planner plus inflation baselines on every
/// problem, each scored by Monte-Carlo risk. Individual failures are recorded
/// and never abort the sweep.
BenchmarkReport run_benchmark(const KinematicChain& chain,
                              const std::vector<ProblemInstance>& problems,
                              const DistanceModel& model, const BenchmarkConfig& config);

void save_report_csv(const BenchmarkReport& report, const std::string& path);

}  // namespace ccplan
