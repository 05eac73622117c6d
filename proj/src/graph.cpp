#include "gsci/graph.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace gsci {

namespace {

void require(bool ok, Errc code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

bool finite_nonnegative(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

ValidatedGraph validate_graph(GraphSpec spec) {
  const int m = spec.size();
  require(m >= 1 && m <= kMaxHypotheses, Errc::DimensionMismatch,
          "number of hypotheses must be in [1, " + std::to_string(kMaxHypotheses) + "]");
  require(spec.transition.size() == m, Errc::DimensionMismatch, "transition matrix must be m x m");
  if (spec.exhaustion_weights.empty()) spec.exhaustion_weights = spec.initial_weights;
  require(static_cast<int>(spec.exhaustion_weights.size()) == m, Errc::DimensionMismatch,
          "exhaustion weights must have m entries");

  double sum = 0.0;
  for (int j = 0; j < m; ++j) {
    require(finite_nonnegative(spec.initial_weights[j]), Errc::NegativeWeight,
            "initial weight of H" + std::to_string(j + 1) + " is negative or not finite");
    sum += spec.initial_weights[j];
  }
  require(sum <= 1.0 + kValidationTolerance, Errc::WeightSumExceeded, "initial weights sum to more than 1");

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      require(finite_nonnegative(spec.transition(i, j)), Errc::NegativeWeight,
              "transition weight g(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                  ") is negative or not finite");
    }
    require(spec.transition(i, i) == 0.0, Errc::InvalidWeight,
            "diagonal transition weight of H" + std::to_string(i + 1) + " must be 0");
    require(spec.transition.row_sum(i) <= 1.0 + kValidationTolerance, Errc::RowSumExceeded,
            "transition row " + std::to_string(i + 1) + " sums to more than 1");
  }

  double exhaustion = 0.0;
  for (int j = 0; j < m; ++j) {
    require(finite_nonnegative(spec.exhaustion_weights[j]), Errc::NegativeWeight,
            "exhaustion weight of H" + std::to_string(j + 1) + " is negative or not finite");
    exhaustion += spec.exhaustion_weights[j];
  }
  require(exhaustion <= 1.0 + kValidationTolerance, Errc::WeightSumExceeded,
          "exhaustion weights sum to more than 1");
  require(exhaustion >= 1.0 - kValidationTolerance, Errc::InvalidWeight, "exhaustion weights must sum to 1");

  return ValidatedGraph(std::move(spec));
}

GraphState ValidatedGraph::initial_state() const {
  GraphState s;
  s.active = IndexSet::full(size());
  s.weights = spec_.initial_weights;
  s.transition = spec_.transition;
  return s;
}

void reject_in_place(GraphState& state, int j) {
  if (j < 0 || j >= state.size() || !state.active.contains(j)) {
    throw Error(Errc::InactiveNode, "hypothesis " + std::to_string(j + 1) + " is not active");
  }
  state.active.erase(j);
  const SquareMatrix& g = state.transition;
  const double wj = state.weights[j];
  const auto active = state.active.indices();
  for (int l : active) state.weights[l] += wj * g(j, l);
  state.weights[j] = 0.0;

  SquareMatrix next(state.size());
  for (int l : active) {
    const double glj = g(l, j);
    const double loop = glj * g(j, l);
    if (!(loop < 1.0)) continue;
    const double denom = 1.0 - loop;
    for (int i : active) {
      if (i == l) continue;
      next(l, i) = (g(l, i) + glj * g(j, i)) / denom;
    }
  }
  state.transition = std::move(next);
}

GraphState update_after_rejection(const GraphState& state, int j) {
  GraphState next = state;
  reject_in_place(next, j);
  return next;
}

GraphState state_after_rejecting(const ValidatedGraph& graph, IndexSet rejected) {
  GraphState s = graph.initial_state();
  for (int j : rejected.indices()) reject_in_place(s, j);
  return s;
}

SingleStageResult run_single_stage_test(const ValidatedGraph& graph, std::span<const double> pvalues,
                                        double alpha) {
  if (static_cast<int>(pvalues.size()) != graph.size()) {
    throw Error(Errc::DimensionMismatch, "expected one p-value per hypothesis");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::OutOfDomain, "alpha must be in (0,1)");
  for (double p : pvalues) {
    if (!std::isfinite(p)) throw Error(Errc::OutOfDomain, "p-values must be finite");
  }
  SingleStageResult r{{}, graph.initial_state()};
  // p = 0 is rejectable even at level 0.
  r.rejected = run_graph_test(r.final_state, [&](int j, double w) { return pvalues[j] <= w * alpha; });
  return r;
}

DualGraph build_dual_graph(const ValidatedGraph& graph, std::span<const double> mu, double q) {
  const int m = graph.size();
  if (!(q > 0.0 && q < 1.0)) throw Error(Errc::InvalidWeight, "information weight q must be in (0,1)");
  if (static_cast<int>(mu.size()) != m) throw Error(Errc::DimensionMismatch, "shift vector must have m entries");

  const GraphSpec& spec = graph.spec();
  DualGraph d;
  d.q = q;
  d.mu.assign(mu.begin(), mu.end());
  GraphState& s = d.base;
  s.weights.assign(2 * m, 0.0);
  s.transition = SquareMatrix(2 * m);
  for (int j = 0; j < m; ++j) {
    s.active.insert(m + j);
    if (mu[j] > 0.0) {
      s.active.insert(j);
      s.weights[j] = spec.initial_weights[j];
    } else {
      s.weights[m + j] = spec.initial_weights[j];
    }
  }
  for (int j = 0; j < m; ++j) {
    if (!(mu[j] > 0.0)) continue;
    const double keep = std::pow(q, mu[j]);
    double out = 0.0;
    for (int i = 0; i < m; ++i) {
      if (i == j) continue;
      const double gji = spec.transition(j, i);
      if (gji == 0.0) continue;
      const int target = mu[i] > 0.0 ? i : m + i;
      s.transition(j, target) += gji * (1.0 - keep);
      out += gji;
    }
    // Residual of a non-complete row goes to the shifted copy so the row sums to 1.
    const double residual = std::max(0.0, 1.0 - out);
    s.transition(j, m + j) = keep + (1.0 - keep) * residual;
  }
  return d;
}

void local_level_fractions(const ValidatedGraph& graph, std::span<const double> mu, double q,
                           std::span<double> out) {
  const int m = graph.size();
  DualGraph d = build_dual_graph(graph, mu, q);
  for (int j = 0; j < m; ++j) {
    if (mu[j] > 0.0) reject_in_place(d.base, j);
  }
  for (int j = 0; j < m; ++j) out[j] = d.base.weights[m + j];
}

LocalLevels local_levels(const ValidatedGraph& graph, std::span<const double> mu, double q, double alpha) {
  const int m = graph.size();
  LocalLevels r;
  r.alpha_mu.assign(m, 0.0);
  r.nu.assign(m, 0.0);
  local_level_fractions(graph, mu, q, r.alpha_mu);
  for (int j = 0; j < m; ++j) {
    const double fraction = r.alpha_mu[j];
    r.alpha_mu[j] = fraction * alpha;
    if (fraction > 0.0) r.nu[j] = fraction / std::pow(q, std::max(mu[j], 0.0));
  }
  return r;
}

}  // namespace gsci
