#include "gsci/compatible.hpp"

#include <algorithm>

namespace gsci {

std::vector<double> compatible_bounds(const ValidatedGraph& graph, IndexSet rejected, std::span<const int> stages,
                                      const PValueFamily& p, PKind kind, double alpha) {
  const int m = graph.size();
  std::vector<double> out(m, kMinusInf);
  const bool all = rejected == IndexSet::full(m);
  const GraphState remaining = state_after_rejecting(graph, rejected);
  for (int j = 0; j < m; ++j) {
    if (stages[j] < 0) continue;
    if (all) {
      out[j] = std::max(0.0, p.inverse(j, stages[j], kind, graph.spec().exhaustion_weights[j] * alpha));
    } else if (rejected.contains(j)) {
      out[j] = 0.0;
    } else {
      out[j] = p.inverse(j, stages[j], kind, remaining.weights[j] * alpha);
    }
  }
  return out;
}

std::vector<double> compatible_bounds_adjustment(const ValidatedGraph& graph, IndexSet rejected_s,
                                                 IndexSet rejected_c, std::span<const int> stages,
                                                 const PValueFamily& p, double alpha) {
  const int m = graph.size();
  std::vector<double> out(m, kMinusInf);
  const bool all = rejected_s == IndexSet::full(m);
  for (int j = 0; j < m; ++j) {
    if (stages[j] < 0) continue;
    if (rejected_c.contains(j)) {
      out[j] = all ? std::max(0.0, p.inverse(j, stages[j], PKind::Repeated,
                                             graph.spec().exhaustion_weights[j] * alpha))
                   : 0.0;
      continue;
    }
    IndexSet others = rejected_s;
    others.erase(j);
    const double level = state_after_rejecting(graph, others).weights[j] * alpha;
    out[j] = p.inverse(j, stages[j], PKind::Repeated, level);
  }
  return out;
}

}  // namespace gsci
