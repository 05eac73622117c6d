#include "gsci/spending.hpp"

#include <cmath>
#include <numbers>

#include "gsci/core.hpp"
#include "gsci/normal.hpp"

namespace gsci {

double spend(const SpendingFunction& f, double gamma, double t) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(Errc::OutOfDomain, "spending level must be in (0,1]");
  if (!(t >= 0.0 && t <= 1.0)) throw Error(Errc::OutOfDomain, "information fraction must be in [0,1]");
  if (t == 0.0) return 0.0;
  if (t == 1.0) return gamma;
  switch (f.kind) {
    case SpendingKind::PocockLike:
      return gamma * std::log1p((std::numbers::e - 1.0) * t);
    case SpendingKind::Power:
      return gamma * std::pow(t, f.rho);
    case SpendingKind::ObfLike:
      return 2.0 * normal::sf(normal::isf(gamma / 2.0) / std::sqrt(t));
  }
  return 0.0;
}

std::string to_string(const SpendingFunction& f) {
  switch (f.kind) {
    case SpendingKind::PocockLike: return "pocock_like";
    case SpendingKind::ObfLike: return "obf_like";
    case SpendingKind::Power: return "power";
  }
  return "unknown";
}

SpendingFunction parse_spending(const std::string& kind, double rho) {
  if (kind == "pocock_like") return SpendingFunction::pocock_like();
  if (kind == "obf_like") return SpendingFunction::obf_like();
  if (kind == "power") {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(Errc::ValidationError, "power spending needs rho > 0");
    return SpendingFunction::power(rho);
  }
  throw Error(Errc::ValidationError, "unknown spending kind '" + kind + "'");
}

}  // namespace gsci
