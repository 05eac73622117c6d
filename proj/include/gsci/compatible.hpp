#pragma once

#include <span>
#include <vector>

#include "gsci/graph.hpp"
#include "gsci/pvalues.hpp"
#include "gsci/seq_test.hpp"

namespace gsci {

// Lower bounds that reproduce the decisions of the sequential graph test:
// 0 for rejected hypotheses (unless all are rejected), the inverted p-value
// at the remaining level otherwise. stages[j] is the stage read for H_j.
std::vector<double> compatible_bounds(const ValidatedGraph& graph, IndexSet rejected, std::span<const int> stages,
                                      const PValueFamily& p, PKind kind, double alpha);

inline std::vector<double> compatible_bounds(const ValidatedGraph& graph, const TrialState& state,
                                             const PValueFamily& p, double alpha) {
  return compatible_bounds(graph, state.rejected, state.last_stage, p, state.kind, alpha);
}

// Bounds matching the efficient multiple adjustment.
std::vector<double> compatible_bounds_adjustment(const ValidatedGraph& graph, IndexSet rejected_s,
                                                 IndexSet rejected_c, std::span<const int> stages,
                                                 const PValueFamily& p, double alpha);

}  // namespace gsci
