#include "ccplan/normal.hpp"

#include <cmath>
#include <stdexcept>

namespace ccplan {

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

double std_normal_pdf(double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

namespace {

// Acklam's rational approximation, |error| < 1.15e-9 before refinement.
double inv_cdf_initial(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double inv_std_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inv_std_normal_cdf: p must be in (0, 1)");
    double x = inv_cdf_initial(p);
    for (int i = 0; i < 2; ++i) {
        const double err = std_normal_cdf(x) - p;
        const double dens = std_normal_pdf(x);
        if (dens <= 0.0) break;
        x -= err / dens;
    }
    return x;
}

double logit_bound(double p) {
    if (!(p >= 0.5 && p < 1.0)) throw std::domain_error("logit_bound: p must be in [0.5, 1)");
    return std::sqrt(3.14159265358979323846 / 8.0) * std::log(p / (1.0 - p));
}

}  // namespace ccplan
