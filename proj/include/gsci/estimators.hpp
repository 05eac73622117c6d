#pragma once

#include <span>
#include <string>
#include <vector>

#include "gsci/graph.hpp"
#include "gsci/informative.hpp"
#include "gsci/pvalues.hpp"

namespace gsci {

inline constexpr double kMedianLevel = 0.5;

// a: compatible bounds, b: compatible with efficient adjustment,
// c: informative bounds, d: informative with efficient adjustment.
enum class EstimatorVariant { A, B, C, D };

const char* to_string(EstimatorVariant v);

struct EstimatorResult {
  EstimatorVariant variant = EstimatorVariant::A;
  PKind kind = PKind::Sequential;  // b and d always build on sequential p-values
  std::vector<double> estimates;   // -inf: no informative estimate
  std::vector<bool> stuck_at_zero; // a/b: zero forced by a rejection
};

// Bounds at overall level 0.5 with the stages frozen as in the analysis at
// level alpha: schedule[k][j] is the stage read for H_j at analysis k.
EstimatorResult median_estimates(EstimatorVariant variant, PKind kind, const ValidatedGraph& graph,
                                 const PValueFamily& p, const std::vector<std::vector<int>>& schedule,
                                 const IterationConfig& cfg);

}  // namespace gsci
