#include "gsci/boundaries.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "gsci/core.hpp"
#include "gsci/normal.hpp"

namespace gsci {

namespace {

// Upper end of the integration range when the previous boundary is infinite
// or beyond the point where the null density underflows.
constexpr double kDensityCap = 37.0;

struct Grid {
  std::vector<double> nodes;
  std::vector<double> weights;  // Simpson weights
  std::vector<double> density;

  bool empty() const { return nodes.empty(); }
};

Grid simpson_grid(double a, double b, double max_step) {
  Grid g;
  if (!(b > a)) return g;
  auto n = static_cast<long>(std::ceil((b - a) / max_step));
  n = std::max<long>(n, 2);
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  g.nodes.resize(n + 1);
  g.weights.resize(n + 1);
  for (long i = 0; i <= n; ++i) {
    g.nodes[i] = i == n ? b : a + h * static_cast<double>(i);
    const double c = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    g.weights[i] = c * h / 3.0;
  }
  return g;
}

double grid_upper(double c) {
  if (std::isinf(c) && c > 0) return 8.5;
  return std::min(c, kDensityCap);
}

void check_increment(double inc, double gamma, int k) {
  if (inc < 0.0 || (inc == 0.0 && gamma < 1.0)) {
    throw Error(Errc::SpentIncrementNonpositive,
                "spent level increment at stage " + std::to_string(k + 1) + " is not positive");
  }
}

// Crossing mass at stage k for boundary c, given the previous sub-density.
double crossing_mass(const Grid& prev, double c, double sq_prev, double sq_cur, double sd) {
  double s = 0.0;
  for (std::size_t i = 0; i < prev.nodes.size(); ++i) {
    s += prev.weights[i] * prev.density[i] * normal::sf((c * sq_cur - prev.nodes[i] * sq_prev) / sd);
  }
  return s;
}

Grid next_density(const Grid& prev, double lower, double upper, double step, double sq_prev, double sq_cur,
                  double sd) {
  Grid g = simpson_grid(lower, upper, step);
  g.density.assign(g.nodes.size(), 0.0);
  const double scale = sq_cur / sd;
  for (std::size_t z = 0; z < g.nodes.size(); ++z) {
    const double zs = g.nodes[z] * sq_cur;
    double s = 0.0;
    for (std::size_t i = 0; i < prev.nodes.size(); ++i) {
      s += prev.weights[i] * prev.density[i] * normal::pdf((zs - prev.nodes[i] * sq_prev) / sd);
    }
    g.density[z] = s * scale;
  }
  return g;
}

double solve_boundary(const Grid& prev, double target, double sq_prev, double sq_cur, double sd, double tol, int k) {
  const double log_target = std::log(target);
  auto f = [&](double c) {
    const double p = crossing_mass(prev, c, sq_prev, sq_cur, sd);
    return p > 0.0 ? std::log(p) - log_target : -1e3;
  };
  // Exact crossing mass is below 1 - Phi(c), so isf(target) is nearly an
  // upper bracket; quadrature error in far tails can push it either way.
  double hi = normal::isf(target);
  double fhi = f(hi);
  if (fhi == 0.0) return hi;
  double lo = hi;
  double flo = fhi;
  if (fhi > 0.0) {
    for (int i = 0; fhi > 0.0 && i < 80; ++i) {
      lo = hi;
      flo = fhi;
      hi += 0.25;
      fhi = f(hi);
    }
  } else {
    for (int i = 0; flo < 0.0 && i < 80; ++i) {
      hi = lo;
      fhi = flo;
      lo -= 0.5;
      flo = f(lo);
    }
  }
  if (flo < 0.0 || fhi > 0.0) {
    throw Error(Errc::ConvergenceFailure, "could not bracket the boundary at stage " + std::to_string(k + 1));
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(
      f, lo, hi, flo, fhi, [tol](double a, double b) { return std::abs(b - a) < tol; }, iters);
  return 0.5 * (r.first + r.second);
}

std::string curve_key(const SpendingFunction& f, const std::vector<double>& t, const CurveOptions& o) {
  std::ostringstream os;
  os.precision(17);
  os << static_cast<int>(f.kind) << ':' << f.rho << ':';
  for (double x : t) os << x << ',';
  os << ':' << o.tabulate << ':' << o.table_lower << ':' << o.table_upper << ':' << o.table_step << ':'
     << o.quadrature.lower << ':' << o.quadrature.max_step << ':' << o.quadrature.boundary_tolerance;
  return os.str();
}

void default_warning(const std::string& m) { std::cerr << "warning: " << m << '\n'; }
std::atomic<void (*)(const std::string&)> g_warning_handler{&default_warning};

}  // namespace

void set_warning_handler(void (*handler)(const std::string&)) {
  g_warning_handler.store(handler ? handler : &default_warning);
}

void warn(const std::string& message) { g_warning_handler.load()(message); }

void validate_fractions(std::span<const double> t) {
  if (t.empty()) throw Error(Errc::ValidationError, "information schedule is empty");
  double prev = 0.0;
  for (double x : t) {
    if (!(x > prev) || !(x <= 1.0)) {
      throw Error(Errc::SpentIncrementNonpositive, "information fractions must be strictly increasing in (0,1]");
    }
    prev = x;
  }
  if (std::abs(t.back() - 1.0) > 1e-12) throw Error(Errc::ValidationError, "last information fraction must be 1");
}

std::vector<double> nominal_boundaries(const SpendingFunction& f, std::span<const double> t, double gamma,
                                       const QuadratureOptions& opts, int upto) {
  validate_fractions(t);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(Errc::OutOfDomain, "level must be in (0,1]");
  const int K = upto < 0 ? static_cast<int>(t.size()) : std::min<int>(upto, static_cast<int>(t.size()));
  std::vector<double> c(K);

  double spent = spend(f, gamma, t[0]);
  check_increment(spent, gamma, 0);
  c[0] = normal::isf(spent);
  if (K == 1) return c;

  auto step_for = [&](int k) {
    // grid of stage k is integrated against the stage k+1 transition kernel
    const double width = std::sqrt((t[k + 1] - t[k]) / t[k]);
    return std::min(opts.max_step, 0.125 * width);
  };

  Grid grid = simpson_grid(opts.lower, grid_upper(c[0]), step_for(0));
  grid.density.resize(grid.nodes.size());
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) grid.density[i] = normal::pdf(grid.nodes[i]);

  for (int k = 1; k < K; ++k) {
    const double now = spend(f, gamma, t[k]);
    const double inc = now - spent;
    spent = now;
    check_increment(inc, gamma, k);
    const double sq_prev = std::sqrt(t[k - 1]);
    const double sq_cur = std::sqrt(t[k]);
    const double sd = std::sqrt(t[k] - t[k - 1]);

    double cont = 0.0;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) cont += grid.weights[i] * grid.density[i];

    if (grid.empty() || inc >= cont * (1.0 - 1e-14)) {
      c[k] = kMinusInf;  // everything left crosses now
      grid = Grid{};
      continue;
    }
    c[k] = inc == 0.0 ? kPlusInf : solve_boundary(grid, inc, sq_prev, sq_cur, sd, opts.boundary_tolerance, k);
    if (k + 1 < K) grid = next_density(grid, opts.lower, grid_upper(c[k]), step_for(k), sq_prev, sq_cur, sd);
  }
  return c;
}

std::vector<double> nominal_levels(const SpendingFunction& f, std::span<const double> t, double gamma,
                                   const QuadratureOptions& opts) {
  auto c = nominal_boundaries(f, t, gamma, opts);
  for (double& x : c) x = normal::sf(x);
  return c;
}

std::vector<double> crossing_probabilities(std::span<const double> t, std::span<const double> c,
                                           const QuadratureOptions& opts) {
  validate_fractions(t);
  const int K = static_cast<int>(c.size());
  std::vector<double> out(K, 0.0);
  if (K == 0) return out;
  out[0] = normal::sf(c[0]);
  if (K == 1) return out;
  auto step_for = [&](int k) { return std::min(opts.max_step, 0.125 * std::sqrt((t[k + 1] - t[k]) / t[k])); };
  Grid grid = simpson_grid(opts.lower, grid_upper(c[0]), step_for(0));
  grid.density.resize(grid.nodes.size());
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) grid.density[i] = normal::pdf(grid.nodes[i]);
  for (int k = 1; k < K; ++k) {
    const double sq_prev = std::sqrt(t[k - 1]);
    const double sq_cur = std::sqrt(t[k]);
    const double sd = std::sqrt(t[k] - t[k - 1]);
    out[k] = grid.empty() ? 0.0 : crossing_mass(grid, c[k], sq_prev, sq_cur, sd);
    if (k + 1 < K) grid = next_density(grid, opts.lower, grid_upper(c[k]), step_for(k), sq_prev, sq_cur, sd);
  }
  return out;
}

// ---------------------------------------------------------------------------

NominalLevelCurve::NominalLevelCurve(SpendingFunction f, std::vector<double> fractions, CurveOptions opts)
    : spending_(f), fractions_(std::move(fractions)), opts_(opts) {
  validate_fractions(fractions_);
  if (opts_.tabulate) build_table();
}

void NominalLevelCurve::build_table() {
  const int K = stages();
  nodes_ = static_cast<int>(std::floor((opts_.table_upper - opts_.table_lower) / opts_.table_step + 1e-9)) + 1;
  table_.assign(K, std::vector<double>(nodes_, std::numeric_limits<double>::quiet_NaN()));
  deriv_.assign(K, std::vector<double>(nodes_, 0.0));

  auto fill_node = [&](int i) {
    const double u = opts_.table_lower + opts_.table_step * i;
    try {
      const auto c = nominal_boundaries(spending_, fractions_, normal::cdf(u), opts_.quadrature);
      for (int k = 0; k < K; ++k) table_[k][i] = -c[k];
    } catch (const std::exception&) {
      // left as NaN; the table range ends before this node
    }
  };
  if (opts_.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < nodes_; ++i) fill_node(i);
  } else {
    for (int i = 0; i < nodes_; ++i) fill_node(i);
  }

  // Valid range: leading run of nodes, strictly increasing in every stage.
  int last_ok = -1;
  for (int i = 0; i < nodes_; ++i) {
    bool ok = true;
    for (int k = 0; k < K && ok; ++k) {
      const double y = table_[k][i];
      ok = std::isfinite(y) && (i == 0 || y > table_[k][i - 1]);
    }
    if (!ok) break;
    last_ok = i;
  }
  if (last_ok < 4) throw Error(Errc::SpendingMonotonicityViolation, "nominal levels are not increasing in the level");
  // Beyond the last good node the exact recursion is used.
  monotone_upper_u_ = opts_.table_lower + opts_.table_step * last_ok;

  const double h = opts_.table_step;
  const int n = last_ok + 1;
  for (int k = 0; k < K; ++k) {
    const auto& y = table_[k];
    auto& d = deriv_[k];
    for (int i = 0; i < n; ++i) {
      if (i >= 2 && i + 2 < n) {
        d[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h);
      } else if (i < 2) {
        d[i] = (-25.0 * y[i] + 48.0 * y[i + 1] - 36.0 * y[i + 2] + 16.0 * y[i + 3] - 3.0 * y[i + 4]) / (12.0 * h);
      } else {
        d[i] = (25.0 * y[i] - 48.0 * y[i - 1] + 36.0 * y[i - 2] - 16.0 * y[i - 3] + 3.0 * y[i - 4]) / (12.0 * h);
      }
    }
  }
}

double NominalLevelCurve::table_eval(int k, double u, double* slope) const {
  const double h = opts_.table_step;
  const double x = (u - opts_.table_lower) / h;
  int i = static_cast<int>(std::floor(x));
  const int last = static_cast<int>(std::lround((monotone_upper_u_ - opts_.table_lower) / h));
  i = std::clamp(i, 0, last - 1);
  const double s = x - i;
  const double y0 = table_[k][i], y1 = table_[k][i + 1];
  const double d0 = deriv_[k][i] * h, d1 = deriv_[k][i + 1] * h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  if (slope) {
    const double g00 = 6 * s2 - 6 * s, g10 = 3 * s2 - 4 * s + 1, g01 = -6 * s2 + 6 * s, g11 = 3 * s2 - 2 * s;
    *slope = (g00 * y0 + g10 * d0 + g01 * y1 + g11 * d1) / h;
  }
  return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
}

std::vector<double> NominalLevelCurve::exact_probits(double gamma) const { return exact_prefix(gamma, stages()); }

std::vector<double> NominalLevelCurve::exact_prefix(double gamma, int upto) const {
  {
    std::shared_lock lock(memo_mutex_);
    auto it = memo_.find(gamma);
    if (it != memo_.end() && static_cast<int>(it->second.size()) >= upto) return it->second;
  }
  auto c = nominal_boundaries(spending_, fractions_, gamma, opts_.quadrature, upto);
  for (double& x : c) x = -x;
  std::unique_lock lock(memo_mutex_);
  if (memo_.size() > (1u << 16)) memo_.clear();
  auto& slot = memo_[gamma];
  if (slot.size() < c.size()) slot = c;
  return c;
}

double NominalLevelCurve::probit_exact(int k, double gamma) const {
  if (gamma <= 0.0) return kMinusInf;
  ensure_monotone(gamma);
  return exact_prefix(std::min(gamma, 1.0), k + 1)[k];
}

void NominalLevelCurve::ensure_monotone(double gamma) const {
  if (spending_.kind == SpendingKind::ObfLike && gamma >= kObfMonotoneLimit && !warned_.exchange(true)) {
    warn("O'Brien-Fleming-like spending used at level " + std::to_string(gamma) +
         " beyond the analytically monotone range; checking numerically");
  }
  if (opts_.tabulate && gamma > 0.0 && gamma < 1.0 && normal::quantile(gamma) <= monotone_upper_u_) return;
  if (spending_.kind != SpendingKind::ObfLike || gamma < kObfMonotoneLimit) return;
  if (gamma <= verified_gamma_.load()) return;
  // Check along a level path from the proven range up to gamma.
  std::vector<double> prev;
  const int steps = std::max(2, static_cast<int>(std::ceil((gamma - 0.3) / 0.005)));
  for (int s = 0; s <= steps; ++s) {
    const double g = 0.3 + (gamma - 0.3) * s / steps;
    std::vector<double> cur;
    try {
      cur = exact_probits(g);
    } catch (const Error&) {
      throw Error(Errc::SpendingMonotonicityViolation, "nominal levels undefined at level " + std::to_string(g));
    }
    if (!prev.empty()) {
      for (std::size_t k = 0; k < cur.size(); ++k) {
        if (!(cur[k] > prev[k])) {
          throw Error(Errc::SpendingMonotonicityViolation,
                      "nominal levels are not increasing up to level " + std::to_string(gamma));
        }
      }
    }
    prev = std::move(cur);
  }
  double seen = verified_gamma_.load();
  while (seen < gamma && !verified_gamma_.compare_exchange_weak(seen, gamma)) {
  }
}

double NominalLevelCurve::probit_at(int k, double u, double* slope) const {
  if (u == kMinusInf) {
    if (slope) *slope = 1.0;
    return kMinusInf;
  }
  if (opts_.tabulate && u >= opts_.table_lower && u <= monotone_upper_u_) {
    if (spending_.kind == SpendingKind::ObfLike && normal::cdf(u) >= kObfMonotoneLimit) ensure_monotone(normal::cdf(u));
    return table_eval(k, u, slope);
  }
  const double y = probit_exact(k, normal::cdf(u));
  if (slope) {
    const double e = 1e-4;
    *slope = (probit_exact(k, normal::cdf(u + e)) - probit_exact(k, normal::cdf(u - e))) / (2 * e);
    if (!std::isfinite(*slope) || *slope <= 0.0) *slope = 1.0;
  }
  return y;
}

double NominalLevelCurve::probit(int k, double gamma) const {
  if (gamma <= 0.0) return kMinusInf;
  if (gamma >= 1.0) return probit_exact(k, 1.0);
  return probit_at(k, normal::quantile(gamma));
}

double NominalLevelCurve::level(int k, double gamma) const { return normal::cdf(probit(k, gamma)); }

double NominalLevelCurve::invert(int k, double nominal) const {
  if (nominal <= 0.0) return 0.0;
  return normal::cdf(invert_probit(k, normal::quantile(std::min(nominal, 1.0))));
}

double NominalLevelCurve::invert_probit(int k, double y) const {
  if (y == kMinusInf) return kMinusInf;
  if (y >= probit(k, 1.0)) return kPlusInf;
  // late stages saturate to level 1 at moderate u; keep g finite for the solver
  auto g = [&](double u) { return std::min(probit_at(k, u), 60.0) - y; };
  double lo = std::isfinite(y) ? std::clamp(y, -38.0, 38.0) : 0.0;
  double glo = g(lo);
  if (glo == 0.0) return lo;
  double hi = lo;
  double ghi = glo;
  double step = 0.5;
  if (glo < 0.0) {
    while (ghi < 0.0) {
      lo = hi;
      glo = ghi;
      hi += step;
      step *= 1.6;
      if (hi > 38.0) return kPlusInf;
      ghi = g(hi);
    }
  } else {
    while (glo > 0.0) {
      hi = lo;
      ghi = glo;
      lo -= step;
      step *= 1.6;
      if (lo < -38.0) return kMinusInf;
      glo = g(lo);
    }
  }
  if (ghi == 0.0) return hi;
  if (glo == 0.0) return lo;
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(
      g, lo, hi, glo, ghi, [](double a, double b) { return std::abs(b - a) < 1e-13 * (1.0 + std::abs(a)); }, iters);
  return 0.5 * (r.first + r.second);
}

std::shared_ptr<const NominalLevelCurve> shared_curve(const SpendingFunction& f, const std::vector<double>& fractions,
                                                      const CurveOptions& opts) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const NominalLevelCurve>> cache;
  const std::string key = curve_key(f, fractions, opts);
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto curve = std::make_shared<const NominalLevelCurve>(f, fractions, opts);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(curve)).first->second;
}

}  // namespace gsci
