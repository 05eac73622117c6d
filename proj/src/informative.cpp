#include "gsci/informative.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <boost/math/tools/toms748_solve.hpp>

#include "gsci/normal.hpp"

namespace gsci {

namespace {

constexpr double kUTop = 38.0;

double log_cdf(double u) {
  if (u > -30.0) return std::log(normal::cdf(u));
  const double r = 1.0 / (u * u);
  return -0.5 * u * u - std::log(-u) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log1p(-r + 3.0 * r * r);
}

// Largest x with p_j(x) <= c(x), where c is non-increasing and constant on
// x <= 0 (log c = logc0 there). Solved on u = Phi^{-1}(p).
template <class LogLevel>
double solve_crossing(const PValueFamily& p, int j, int k, PKind kind, double logc0, LogLevel&& logc) {
  if (logc0 == kMinusInf) return kMinusInf;
  auto x_of = [&](double u) { return p.shift_at(j, k, kind, u); };
  auto g = [&](double u) { return log_cdf(u) - logc(std::min(x_of(u), 1e12)); };

  double lo, hi, glo, ghi;
  if (logc0 < 0.0) {
    const double u0 = normal::quantile(std::exp(logc0));
    const double x0 = x_of(u0);
    if (x0 <= 0.0) return x0;
    hi = u0;
    ghi = g(hi);
    lo = hi;
    glo = ghi;
  } else {
    lo = hi = 0.0;
    glo = ghi = g(0.0);
  }
  for (double step = 0.5; glo > 0.0; step *= 2.0) {
    hi = lo;
    ghi = glo;
    lo -= step;
    if (lo < -kUTop) return kMinusInf;
    glo = g(lo);
  }
  for (double step = 0.5; ghi < 0.0; step *= 2.0) {
    lo = hi;
    glo = ghi;
    hi = std::min(hi + step, kUTop);
    ghi = g(hi);
    if (hi == kUTop && ghi < 0.0) {
      // p saturates at 1 below the root: solve c(x) = 1 instead
      double a = x_of(kUTop);
      double b = a + 1.0;
      while (logc(b) > 0.0) {
        a = b;
        b += 2.0 * (b - x_of(kUTop));
        if (b > 1e12) return kPlusInf;
      }
      std::uintmax_t it = 200;
      auto r = boost::math::tools::toms748_solve(
          logc, a, b, [](double s, double t) { return std::abs(t - s) < 1e-12 * (1.0 + std::abs(s)); }, it);
      return 0.5 * (r.first + r.second);
    }
  }
  if (glo == 0.0) return x_of(lo);
  if (ghi == 0.0) return x_of(hi);
  std::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(
      g, lo, hi, glo, ghi, [](double s, double t) { return std::abs(t - s) < 1e-12; }, it);
  return x_of(0.5 * (r.first + r.second));
}

void check_stages(const PValueFamily& p, std::span<const int> stages) {
  if (static_cast<int>(stages.size()) != p.hypotheses()) {
    throw Error(Errc::DimensionMismatch, "one stage index per hypothesis expected");
  }
  for (int j = 0; j < p.hypotheses(); ++j) {
    if (stages[j] < 0 || stages[j] >= p.observed_stages(j)) {
      throw Error(Errc::MissingObservation, "no data for H" + std::to_string(j + 1) + " at the requested stage");
    }
  }
}

// Root of p_j(x) = base * level * q^((x v 0) - anchor).
double solve_component(const PValueFamily& p, int j, int k, PKind kind, double base, double anchor, double level,
                       double log_q) {
  if (!(base > 0.0)) return kMinusInf;
  const double log_a = std::log(base * level) - log_q * anchor;
  return solve_crossing(p, j, k, kind, log_a, [&](double x) { return log_a + log_q * std::max(x, 0.0); });
}

}  // namespace

double IterationConfig::delta(double alpha, int l) const {
  const double d0 = delta0 > 0.0 ? delta0 : std::min(0.9 * (1.0 - alpha), 0.1);
  return std::ldexp(d0, -l);
}

void validate_config(const IterationConfig& cfg, double alpha) {
  if (!(cfg.q > 0.0 && cfg.q < 1.0)) throw Error(Errc::InvalidWeight, "information weight q must be in (0,1)");
  if (!(cfg.epsilon > 0.0)) throw Error(Errc::ValidationError, "epsilon must be positive");
  if (cfg.max_iters < 1) throw Error(Errc::ValidationError, "max_iters must be at least 1");
  if (!(alpha + cfg.delta(alpha, 0) < 1.0)) throw Error(Errc::ValidationError, "alpha + delta0 must be below 1");
}

double bracket_gap(std::span<const double> lower, std::span<const double> upper) {
  double s = 0.0;
  for (std::size_t j = 0; j < lower.size(); ++j) {
    const bool a = lower[j] == kMinusInf, b = upper[j] == kMinusInf;
    if (a && b) continue;
    if (a || b) return kPlusInf;
    const double d = upper[j] - lower[j];
    s += d * d;
  }
  return std::sqrt(s);
}

StartVectors default_start_vectors(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages,
                                   PKind kind, double alpha, double delta0) {
  check_stages(p, stages);
  const int m = graph.size();
  StartVectors s;
  s.lower.resize(m);
  s.upper.resize(m);
  for (int j = 0; j < m; ++j) {
    s.lower[j] = std::min(0.0, p.inverse(j, stages[j], kind, graph.spec().initial_weights[j] * alpha));
    s.upper[j] = p.inverse(j, stages[j], kind, alpha + delta0);
  }
  return s;
}

bool valid_lower_start(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages, PKind kind,
                       double alpha, double q, std::span<const double> lower) {
  const int m = graph.size();
  std::vector<double> frac(m);
  local_level_fractions(graph, lower, q, frac);
  for (int j = 0; j < m; ++j) {
    if (lower[j] == kMinusInf) continue;
    if (lower[j] == kPlusInf || std::isnan(lower[j])) return false;
    if (p.pvalue(j, stages[j], kind, lower[j]) > frac[j] * alpha * (1.0 + 1e-9)) return false;
  }
  return true;
}

bool valid_upper_start(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages, PKind kind,
                       double level, double q, std::span<const double> upper) {
  const int m = graph.size();
  std::vector<double> frac(m);
  local_level_fractions(graph, upper, q, frac);
  for (int j = 0; j < m; ++j) {
    if (std::isnan(upper[j])) return false;
    if (upper[j] == kPlusInf) continue;
    if (p.pvalue(j, stages[j], kind, upper[j]) < frac[j] * level * (1.0 - 1e-9)) return false;
  }
  return true;
}

BoundsBracket primary_algorithm(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages,
                                PKind kind, double alpha, const IterationConfig& cfg, const StartVectors* start) {
  validate_config(cfg, alpha);
  check_stages(p, stages);
  const int m = graph.size();
  const double d0 = cfg.delta(alpha, 0);
  const double log_q = std::log(cfg.q);

  BoundsBracket b;
  StartVectors fallback;
  auto defaults = [&]() -> const StartVectors& {
    if (fallback.lower.empty()) fallback = default_start_vectors(graph, p, stages, kind, alpha, d0);
    return fallback;
  };
  if (start && static_cast<int>(start->lower.size()) == m &&
      valid_lower_start(graph, p, stages, kind, alpha, cfg.q, start->lower)) {
    b.lower = start->lower;
  } else {
    if (start) b.start_replaced = true;
    b.lower = defaults().lower;
  }
  if (start && static_cast<int>(start->upper.size()) == m &&
      valid_upper_start(graph, p, stages, kind, alpha + d0, cfg.q, start->upper)) {
    b.upper = start->upper;
  } else {
    if (start) b.start_replaced = true;
    b.upper = defaults().upper;
  }

  std::vector<double> frac_lower(m), frac_upper(m), next_lower(m), next_upper(m);
  if (cfg.keep_trace) {
    b.lower_trace.push_back(b.lower);
    b.upper_trace.push_back(b.upper);
  }
  b.gap = bracket_gap(b.lower, b.upper);
  const auto started = std::chrono::steady_clock::now();
  auto out_of_time = [&] {
    if (cfg.time_budget_ms <= 0.0) return false;
    const std::chrono::duration<double, std::milli> used = std::chrono::steady_clock::now() - started;
    return used.count() > cfg.time_budget_ms;
  };
  while (b.gap >= cfg.epsilon && b.iterations < cfg.max_iters) {
    if (out_of_time()) {
      b.timed_out = true;
      break;
    }
    local_level_fractions(graph, b.lower, cfg.q, frac_lower);
    local_level_fractions(graph, b.upper, cfg.q, frac_upper);
    const double level_upper = alpha + cfg.delta(alpha, b.iterations + 1);
    for (int j = 0; j < m; ++j) {
      // base_j q^(x v 0 - anchor) equals q^(x v 0) nu_j(previous iterate)
      const double lo = solve_component(p, j, stages[j], kind, frac_lower[j], std::max(b.lower[j], 0.0), alpha,
                                        log_q);
      next_lower[j] = std::max(lo, b.lower[j]);
      double up = solve_component(p, j, stages[j], kind, frac_upper[j], std::max(b.upper[j], 0.0), level_upper,
                                  log_q);
      if (up < cfg.divergence_floor) up = kMinusInf;
      next_upper[j] = std::min(up, b.upper[j]);
    }
    b.lower.swap(next_lower);
    b.upper.swap(next_upper);
    ++b.iterations;
    if (cfg.keep_trace) {
      b.lower_trace.push_back(b.lower);
      b.upper_trace.push_back(b.upper);
    }
    b.gap = bracket_gap(b.lower, b.upper);
  }
  b.converged = b.gap < cfg.epsilon;
  return b;
}

std::vector<double> limit_residuals(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages,
                                    PKind kind, double alpha, double q, std::span<const double> mu) {
  const int m = graph.size();
  std::vector<double> frac(m), out(m, 0.0);
  local_level_fractions(graph, mu, q, frac);
  for (int j = 0; j < m; ++j) {
    if (!std::isfinite(mu[j])) continue;
    out[j] = std::abs(p.pvalue(j, stages[j], kind, mu[j]) - frac[j] * alpha);
  }
  return out;
}

IsciStage isci_stage(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages, PKind kind,
                     double alpha, const IterationConfig& cfg, const IsciStage* previous) {
  IsciStage out;
  out.stages.assign(stages.begin(), stages.end());
  StartVectors start = default_start_vectors(graph, p, stages, kind, alpha, cfg.delta(alpha, 0));
  if (previous) {
    for (int j = 0; j < graph.size(); ++j) {
      if (kind == PKind::Sequential || previous->rejected.contains(j)) start.lower[j] = previous->bracket.lower[j];
    }
  }
  out.bracket = primary_algorithm(graph, p, stages, kind, alpha, cfg, &start);
  for (int j = 0; j < graph.size(); ++j) {
    if (out.bracket.lower[j] >= 0.0) out.rejected.insert(j);
  }
  return out;
}

AdjustedBounds isci_efficient_adjustment(const ValidatedGraph& graph, std::span<const double> lower_s,
                                         const PValueFamily& p, std::span<const int> stages, double q,
                                         double alpha) {
  check_stages(p, stages);
  const int m = graph.size();
  AdjustedBounds out;
  out.lower.assign(m, kMinusInf);
  std::vector<double> mu(lower_s.begin(), lower_s.end());
  std::vector<double> frac(m);
  for (int j = 0; j < m; ++j) {
    auto level_at = [&](double x) {
      mu[j] = x;
      local_level_fractions(graph, mu, q, frac);
      return frac[j] * alpha;
    };
    const double c0 = level_at(0.0);
    if (c0 > 0.0) {
      const double root = solve_crossing(p, j, stages[j], PKind::Repeated, std::log(c0), [&](double x) {
        const double c = level_at(x);
        return c > 0.0 ? std::log(c) : -1e300;
      });
      out.lower[j] = std::min(root, lower_s[j]);
    }
    mu[j] = lower_s[j];
    if (out.lower[j] >= 0.0) out.rejected.insert(j);
  }
  return out;
}

}  // namespace gsci
