#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace gsci::normal {

inline double pdf(double x) { return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Upper tail 1 - Phi(x), accurate for large x.
inline double sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Phi^{-1}(p) with the conventions Phi^{-1}(0) = -inf, Phi^{-1}(1) = +inf.
inline double quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// Inverse of the upper tail: returns x with sf(x) = p.
inline double isf(double p) { return -quantile(p); }

}  // namespace gsci::normal
