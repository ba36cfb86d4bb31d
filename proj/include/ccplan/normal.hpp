#pragma once

namespace ccplan {

/// Standard normal CDF via erfc.
double std_normal_cdf(double x);

/// Standard normal density.
double std_normal_pdf(double x);

/// Inverse standard normal CDF on (0, 1), accurate to |Phi(result) - p| <= 1e-9
/// (rational initial guess refined by Newton steps against the erfc-based CDF).
/// Throws std::domain_error outside (0, 1).
double inv_std_normal_cdf(double p);

/// Conservative upper bound sqrt(pi/8) * log(p / (1 - p)) >= inv_std_normal_cdf(p),
/// valid on [0.5, 1). Throws std::domain_error outside that range.
double logit_bound(double p);

}  // namespace ccplan
