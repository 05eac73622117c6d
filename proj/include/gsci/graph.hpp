#pragma once

#include <span>
#include <vector>

#include "gsci/core.hpp"

namespace gsci {

// A graphical multiple test: node weights, transition matrix and the
// weights used once every hypothesis has been rejected.
struct GraphSpec {
  std::vector<double> initial_weights;
  SquareMatrix transition;
  std::vector<double> exhaustion_weights;

  int size() const { return static_cast<int>(initial_weights.size()); }
};

inline constexpr double kValidationTolerance = 1e-12;
inline constexpr double kConservationTolerance = 1e-10;

// Current weights and transitions over the not-yet-rejected hypotheses.
struct GraphState {
  IndexSet active;
  std::vector<double> weights;
  SquareMatrix transition;

  int size() const { return static_cast<int>(weights.size()); }
  double level(int j, double alpha) const { return weights[j] * alpha; }
};

class ValidatedGraph {
 public:
  const GraphSpec& spec() const { return spec_; }
  int size() const { return spec_.size(); }
  GraphState initial_state() const;

 private:
  friend ValidatedGraph validate_graph(GraphSpec spec);
  explicit ValidatedGraph(GraphSpec spec) : spec_(std::move(spec)) {}
  GraphSpec spec_;
};

ValidatedGraph validate_graph(GraphSpec spec);

// Removes j from the active set and redistributes its weight.
void reject_in_place(GraphState& state, int j);
GraphState update_after_rejection(const GraphState& state, int j);

// Replays the rejection of every index in `rejected` (ascending order).
GraphState state_after_rejecting(const ValidatedGraph& graph, IndexSet rejected);

// Rejects, lowest index first, every active j for which significant(j, weight)
// holds, until none remains. Returns the set rejected by this call.
template <class Significant>
IndexSet run_graph_test(GraphState& state, Significant&& significant) {
  IndexSet rejected;
  for (;;) {
    int chosen = -1;
    for (int j : state.active.indices()) {
      if (significant(j, state.weights[j])) {
        chosen = j;
        break;
      }
    }
    if (chosen < 0) return rejected;
    reject_in_place(state, chosen);
    rejected.insert(chosen);
  }
}

struct SingleStageResult {
  IndexSet rejected;
  GraphState final_state;
};

SingleStageResult run_single_stage_test(const ValidatedGraph& graph, std::span<const double> pvalues,
                                        double alpha);

// Dual graph over 2m nodes: node j is the original H_j (present only when
// mu_j > 0) and node m + j the shifted hypothesis H_j^{mu_j}.
struct DualGraph {
  GraphState base;
  double q = 0.5;
  std::vector<double> mu;

  int hypotheses() const { return static_cast<int>(mu.size()); }
};

DualGraph build_dual_graph(const ValidatedGraph& graph, std::span<const double> mu, double q);

struct LocalLevels {
  std::vector<double> alpha_mu;
  std::vector<double> nu;
};

LocalLevels local_levels(const ValidatedGraph& graph, std::span<const double> mu, double q, double alpha);

// alpha_j^mu / alpha for every j; the allocation-light path used by the
// iterative bound algorithms.
void local_level_fractions(const ValidatedGraph& graph, std::span<const double> mu, double q,
                           std::span<double> out);

}  // namespace gsci
