#pragma once

#include <string>

#include "ccplan/risk_eval.hpp"

namespace ccplan {

/// Empirical CDF of the Monte-Carlo risk per method (one step curve each).
void write_risk_cdf_svg(const BenchmarkReport& report, const std::string& path);

/// Planar scene snapshot: obstacles, arm at start, EE traces of the given
/// paths. No-op for d != 2.
void write_scene_snapshot_svg(const KinematicChain& chain, const ProblemInstance& problem,
                              const Path* candidate, const Path* safe, const std::string& path);

}  // namespace ccplan
