#pragma once

#include <cstddef>
#include <span>

namespace rankmatch {

// Standard normal quantile, Wichura's AS 241 (PPND16) rational
// approximation. Absolute error is far below the 1e-8 documented
// contract. Throws DomainError outside (0,1).
double normal_quantile(double p);

// Standard normal CDF via erfc. Accurate to full double precision.
double normal_cdf(double z);

// Two-sided critical value: normal_quantile((1 + level) / 2).
double normal_critical_value(double level);

double mean(std::span<const double> xs);

// Variance with divisor n (not n-1). Pairs with mean() so that
// mean((x - tau)^2) == (mean(x) - tau)^2 + variance(x) holds exactly
// in real arithmetic.
double variance(std::span<const double> xs);

double median(std::span<const double> xs);  // copies and sorts

}  // namespace rankmatch
