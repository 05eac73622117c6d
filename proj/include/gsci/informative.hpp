#pragma once

#include <span>
#include <vector>

#include "gsci/graph.hpp"
#include "gsci/pvalues.hpp"

namespace gsci {

struct IterationConfig {
  double q = 0.5;
  double epsilon = 1e-6;
  int max_iters = 500;
  double delta0 = 0.0;  // <= 0 selects min(0.9 (1 - alpha), 0.1)
  double divergence_floor = -1e6;
  bool keep_trace = false;
  double time_budget_ms = 0.0;  // 0 = unlimited; the lower bound stays valid when cut short

  // delta^(l) = delta0 * 2^-l
  double delta(double alpha, int l) const;
};

void validate_config(const IterationConfig& cfg, double alpha);

struct BoundsBracket {
  std::vector<double> lower;
  std::vector<double> upper;
  double gap = kPlusInf;
  int iterations = 0;
  bool converged = false;
  bool timed_out = false;
  bool start_replaced = false;  // a supplied start failed its condition
  std::vector<std::vector<double>> lower_trace;
  std::vector<std::vector<double>> upper_trace;
};

// Euclidean distance; components that are -inf in both vectors are skipped,
// a -inf facing a finite value gives an infinite gap.
double bracket_gap(std::span<const double> lower, std::span<const double> upper);

struct StartVectors {
  std::vector<double> lower;
  std::vector<double> upper;
};

StartVectors default_start_vectors(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages,
                                   PKind kind, double alpha, double delta0);

// Start conditions of the lower and upper sequences.
bool valid_lower_start(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages, PKind kind,
                       double alpha, double q, std::span<const double> lower);
bool valid_upper_start(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages, PKind kind,
                       double level, double q, std::span<const double> upper);

BoundsBracket primary_algorithm(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages,
                                PKind kind, double alpha, const IterationConfig& cfg,
                                const StartVectors* start = nullptr);

// |p_j(mu_j) - alpha_j^mu| for every finite component.
std::vector<double> limit_residuals(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages,
                                    PKind kind, double alpha, double q, std::span<const double> mu);

struct IsciStage {
  std::vector<int> stages;
  BoundsBracket bracket;
  IndexSet rejected;  // lower bound >= 0
};

// One analysis of the stagewise informative procedure, warm started from
// the previous analysis when given.
IsciStage isci_stage(const ValidatedGraph& graph, const PValueFamily& p, std::span<const int> stages, PKind kind,
                     double alpha, const IterationConfig& cfg, const IsciStage* previous = nullptr);

struct AdjustedBounds {
  std::vector<double> lower;
  IndexSet rejected;
};

AdjustedBounds isci_efficient_adjustment(const ValidatedGraph& graph, std::span<const double> lower_s,
                                         const PValueFamily& p, std::span<const int> stages, double q,
                                         double alpha);

}  // namespace gsci
