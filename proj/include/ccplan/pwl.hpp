#pragma once

#include <functional>

#include "ccplan/geometry.hpp"

namespace ccplan {

/// Piecewise-affine interpolant through (breakpoints[i], f(breakpoints[i])).
/// For convex f the secants over-approximate, so value(x) >= f(x) on the
/// domain and the interpolant equals the max of its pieces there.
struct PWLApprox {
    Vec breakpoints;  // size S+1, strictly increasing
    Vec values;       // size S+1, f at the breakpoints
    Vec slope;        // size S
    Vec intercept;    // size S
    double max_gap = 0.0;  // max over-approximation vs f, measured on a grid

    int segments() const { return static_cast<int>(slope.size()); }
    double lo() const { return breakpoints[0]; }
    double hi() const { return breakpoints[breakpoints.size() - 1]; }

    /// Interpolant value; x is clamped to the domain. Evaluated anchored at
    /// the left breakpoint, which is exact there even on steep segments.
    double value(double x) const;

    /// max_i slope[i] * x + intercept[i]; equals value() for convex sources.
    double max_of_pieces(double x) const;

    /// Value at breakpoint i.
    double breakpoint_value(int i) const { return values[i]; }
};

/// Chords of f over the given breakpoints. Throws std::invalid_argument if
/// the breakpoints are not strictly increasing or fewer than two.
PWLApprox build_secant_pwl(const std::function<double(double)>& f, const Vec& breakpoints);

/// Chords of f over `segments` uniform intervals of [lo, hi].
PWLApprox build_secant_pwl(const std::function<double(double)>& f, double lo, double hi, int segments);

/// Breakpoints of [lo, hi] geometric in (1 - x): spacing shrinks toward hi.
/// Requires hi < 1.
Vec geometric_breakpoints(double lo, double hi, int segments);

/// Default conservative encoding of logit_bound on [0.5, 1 - 1e-6] with
/// geometric spacing toward 1, where the curvature concentrates.
PWLApprox default_logit_pwl(int segments = 16);

}  // namespace ccplan
