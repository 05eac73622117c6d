#include "gsci/estimators.hpp"

#include "gsci/compatible.hpp"
#include "gsci/seq_test.hpp"

namespace gsci {

const char* to_string(EstimatorVariant v) {
  switch (v) {
    case EstimatorVariant::A: return "a";
    case EstimatorVariant::B: return "b";
    case EstimatorVariant::C: return "c";
    case EstimatorVariant::D: return "d";
  }
  return "?";
}

EstimatorResult median_estimates(EstimatorVariant variant, PKind kind, const ValidatedGraph& graph,
                                 const PValueFamily& p, const std::vector<std::vector<int>>& schedule,
                                 const IterationConfig& cfg) {
  if (schedule.empty()) throw Error(Errc::ValidationError, "no analysis to estimate from");
  const int m = graph.size();
  const double a = kMedianLevel;
  const auto& last = schedule.back();
  EstimatorResult r;
  r.variant = variant;
  r.kind = (variant == EstimatorVariant::B || variant == EstimatorVariant::D) ? PKind::Sequential : kind;
  r.stuck_at_zero.assign(m, false);

  switch (variant) {
    case EstimatorVariant::A: {
      const IndexSet rejected = replay_trial(graph, p, kind, schedule, a).back();
      r.estimates = compatible_bounds(graph, rejected, last, p, kind, a);
      if (rejected != IndexSet::full(m)) {
        for (int j : rejected.indices()) r.stuck_at_zero[j] = true;
      }
      break;
    }
    case EstimatorVariant::B: {
      const IndexSet rs = replay_trial(graph, p, PKind::Sequential, schedule, a).back();
      const IndexSet rc = efficient_multiple_adjustment(graph, rs, last, p, a);
      r.estimates = compatible_bounds_adjustment(graph, rs, rc, last, p, a);
      if (rs != IndexSet::full(m)) {
        for (int j : rc.indices()) r.stuck_at_zero[j] = true;
      }
      break;
    }
    case EstimatorVariant::C:
    case EstimatorVariant::D: {
      const PKind k = variant == EstimatorVariant::C ? kind : PKind::Sequential;
      IsciStage stage;
      for (std::size_t i = 0; i < schedule.size(); ++i) {
        stage = isci_stage(graph, p, schedule[i], k, a, cfg, i ? &stage : nullptr);
      }
      if (variant == EstimatorVariant::C) {
        r.estimates = stage.bracket.lower;
      } else {
        r.estimates = isci_efficient_adjustment(graph, stage.bracket.lower, p, last, cfg.q, a).lower;
      }
      break;
    }
  }
  return r;
}

}  // namespace gsci
