#pragma once

#include <optional>
#include <string>

#include "ccplan/geometry.hpp"

namespace ccplan {

enum class SolveStatus { Optimal, Infeasible, IterationLimit };

const char* to_string(SolveStatus s);

/// Convex quadratic program
///
///   minimize    x' P x + q' x          (note: no 1/2 factor)
///   subject to  E x  = e
///               A x <= b
///               lb <= x <= ub          (entries may be +-inf)
///
/// P must be symmetric PSD. Empty E/A/lb/ub blocks are allowed.
struct QPProblem {
    Mat P;
    Vec q;
    Mat E;
    Vec e;
    Mat A;
    Vec b;
    Vec lb, ub;

    int vars() const { return static_cast<int>(q.size()); }
    void validate() const;  // throws std::invalid_argument

    std::string to_json() const;
    static QPProblem from_json(const std::string& text);
    void save(const std::string& path) const;
    static QPProblem load(const std::string& path);
};

struct SolveResult {
    SolveStatus status = SolveStatus::IterationLimit;
    Vec x;
    double objective = 0.0;
    double max_violation = 0.0;
    int iterations = 0;
};

struct QPSettings {
    double feas_tol = 1e-6;   // max allowed constraint violation at Optimal
    double stat_tol = 1e-6;   // relative stationarity (dual residual) at Optimal
    int max_iter = 20000;
    double rho = 0.1;         // initial ADMM penalty
    double sigma = 1e-6;      // proximal regularization
    double alpha = 1.6;       // over-relaxation
    std::optional<Vec> warm_x;
};

/// Operator-splitting (ADMM) solver with equilibration, adaptive penalty and
/// an active-set polish step. Deterministic given inputs.
SolveResult solve_qp(const QPProblem& problem, const QPSettings& settings = {});

}  // namespace ccplan
