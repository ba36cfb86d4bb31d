#include "ccplan/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ccplan/normal.hpp"

namespace ccplan {

double PWLApprox::value(double x) const {
    x = std::clamp(x, lo(), hi());
    // Index of the segment containing x.
    const double* begin = breakpoints.data();
    const double* end = begin + breakpoints.size();
    int i = static_cast<int>(std::upper_bound(begin, end, x) - begin) - 1;
    i = std::clamp(i, 0, segments() - 1);
    return values[i] + slope[i] * (x - breakpoints[i]);
}

double PWLApprox::max_of_pieces(double x) const {
    double v = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < segments(); ++i) v = std::max(v, slope[i] * x + intercept[i]);
    return v;
}

PWLApprox build_secant_pwl(const std::function<double(double)>& f, const Vec& breakpoints) {
    const int s = static_cast<int>(breakpoints.size()) - 1;
    if (s < 1) throw std::invalid_argument("build_secant_pwl: need at least one segment");
    for (int i = 0; i < s; ++i) {
        if (!(breakpoints[i] < breakpoints[i + 1])) {
            throw std::invalid_argument("build_secant_pwl: breakpoints must be strictly increasing");
        }
    }
    PWLApprox pwl;
    pwl.breakpoints = breakpoints;
    pwl.values.resize(s + 1);
    pwl.slope.resize(s);
    pwl.intercept.resize(s);
    for (int i = 0; i <= s; ++i) pwl.values[i] = f(breakpoints[i]);
    for (int i = 0; i < s; ++i) {
        pwl.slope[i] = (pwl.values[i + 1] - pwl.values[i]) / (breakpoints[i + 1] - breakpoints[i]);
        pwl.intercept[i] = pwl.values[i] - pwl.slope[i] * breakpoints[i];
    }
    // Measure the over-approximation gap on a fixed grid per segment.
    double gap = 0.0;
    constexpr int kGridPerSegment = 64;
    for (int i = 0; i < s; ++i) {
        for (int g = 0; g <= kGridPerSegment; ++g) {
            const double x = breakpoints[i] +
                             (breakpoints[i + 1] - breakpoints[i]) * g / kGridPerSegment;
            gap = std::max(gap, pwl.value(x) - f(x));
        }
    }
    pwl.max_gap = gap;
    return pwl;
}

PWLApprox build_secant_pwl(const std::function<double(double)>& f, double lo, double hi, int segments) {
    if (segments < 1) throw std::invalid_argument("build_secant_pwl: segments must be >= 1");
    Vec bp(segments + 1);
    for (int i = 0; i <= segments; ++i) bp[i] = lo + (hi - lo) * i / segments;
    return build_secant_pwl(f, bp);
}

Vec geometric_breakpoints(double lo, double hi, int segments) {
    if (!(lo < hi && hi < 1.0)) throw std::invalid_argument("geometric_breakpoints: need lo < hi < 1");
    Vec bp(segments + 1);
    const double ratio = std::pow((1.0 - hi) / (1.0 - lo), 1.0 / segments);
    double u = 1.0 - lo;
    for (int i = 0; i <= segments; ++i) {
        bp[i] = 1.0 - u;
        u *= ratio;
    }
    bp[0] = lo;
    bp[segments] = hi;
    return bp;
}

PWLApprox default_logit_pwl(int segments) {
    const double hi = 1.0 - 1e-6;
    return build_secant_pwl([](double p) { return logit_bound(p); },
                            geometric_breakpoints(0.5, hi, segments));
}

}  // namespace ccplan
