#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ccplan/normal.hpp"

using namespace ccplan;

namespace {

// Bisection against an erf-based CDF, fully independent of the module's
// rational approximation path.
double bisect_inv_cdf(double p) {
    double lo = -15.0, hi = 15.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("inverse CDF at the median is exactly zero") {
    CHECK(inv_std_normal_cdf(0.5) == 0.0);
}

TEST_CASE("inverse CDF matches bisection oracle at 0.975") {
    CHECK(std::abs(inv_std_normal_cdf(0.975) - 1.95996) < 1e-5);
    CHECK(std::abs(inv_std_normal_cdf(0.975) - bisect_inv_cdf(0.975)) < 1e-9);
}

TEST_CASE("round trip Phi(inv(p)) = p on a 1e4 grid") {
    for (int i = 1; i < 10000; ++i) {
        const double p = static_cast<double>(i) / 10000.0;
        const double x = inv_std_normal_cdf(p);
        CHECK(std::abs(std_normal_cdf(x) - p) <= 1e-9);
    }
}

TEST_CASE("inverse CDF domain errors") {
    CHECK_THROWS_AS(inv_std_normal_cdf(0.0), std::domain_error);
    CHECK_THROWS_AS(inv_std_normal_cdf(1.0), std::domain_error);
    CHECK_THROWS_AS(inv_std_normal_cdf(-0.2), std::domain_error);
}

TEST_CASE("logit bound values and domain") {
    CHECK(logit_bound(0.5) == 0.0);
    // sqrt(pi/8) * log(9) at p = 0.9.
    CHECK(logit_bound(0.9) == doctest::Approx(0.6266570686577501 * 2.1972245773362196));
    CHECK(logit_bound(0.9) >= inv_std_normal_cdf(0.9));
    CHECK_THROWS_AS(logit_bound(0.49), std::domain_error);
    CHECK_THROWS_AS(logit_bound(1.0), std::domain_error);
}

TEST_CASE("logit bound dominates the inverse CDF on a dense grid") {
    const int grid = 10000;
    const double lo = 0.5, hi = 1.0 - 1e-6;
    int violations = 0;
    for (int i = 0; i <= grid; ++i) {
        const double p = lo + (hi - lo) * i / grid;
        if (logit_bound(p) < inv_std_normal_cdf(p)) ++violations;
    }
    CHECK(violations == 0);
}
