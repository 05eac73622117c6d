#pragma once

#include <string>

namespace gsci {

enum class SpendingKind { PocockLike, ObfLike, Power };

// Error-spending function a(gamma, t).
struct SpendingFunction {
  SpendingKind kind = SpendingKind::PocockLike;
  double rho = 1.0;  // only used by Power

  static SpendingFunction pocock_like() { return {SpendingKind::PocockLike, 1.0}; }
  static SpendingFunction obf_like() { return {SpendingKind::ObfLike, 1.0}; }
  static SpendingFunction power(double rho) { return {SpendingKind::Power, rho}; }

  bool operator==(const SpendingFunction&) const = default;
};

// Upper end of the level range on which strict monotonicity in gamma is
// known analytically for the O'Brien-Fleming-like family.
inline constexpr double kObfMonotoneLimit = 0.318;

double spend(const SpendingFunction& f, double gamma, double t);

std::string to_string(const SpendingFunction& f);
SpendingFunction parse_spending(const std::string& kind, double rho);

}  // namespace gsci
