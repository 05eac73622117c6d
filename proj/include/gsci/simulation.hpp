#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gsci/analysis.hpp"
#include "gsci/boundaries.hpp"

namespace gsci {

enum class Metric { Fwer, Coverage, Median };

struct ScenarioSpec {
  std::string name = "scenario";
  std::shared_ptr<const Design> design;
  std::vector<double> theta;
  SquareMatrix correlation;              // of the stagewise score increments across hypotheses
  std::vector<double> max_information;   // I_{j,K}
  StopPolicy policy = StopPolicy::StopOnReject;
  std::vector<int> scripted_stops;       // 1-based stop stage per hypothesis, 0 = never; empty = none
  std::vector<Procedure> procedures{std::begin(kAllProcedures), std::end(kAllProcedures)};
  std::vector<Metric> metrics{Metric::Fwer, Metric::Coverage};
  long replications = 10000;
  std::uint64_t seed = 1;
};

// Validated scenario with the Cholesky factor and nominal level curves.
class Scenario {
 public:
  explicit Scenario(ScenarioSpec spec);

  const ScenarioSpec& spec() const { return spec_; }
  const Design& design() const { return *spec_.design; }
  int hypotheses() const { return design().hypotheses(); }
  int stages() const { return design().stages(); }
  const std::vector<std::shared_ptr<const NominalLevelCurve>>& curves() const { return curves_; }
  const SquareMatrix& cholesky() const { return chol_; }
  std::vector<int> stop_after() const;

 private:
  ScenarioSpec spec_;
  SquareMatrix chol_;
  std::vector<std::shared_ptr<const NominalLevelCurve>> curves_;
};

// Lower triangular L with L L^T = a; throws NotPSD.
SquareMatrix cholesky_psd(const SquareMatrix& a);

// Generator for replication `rep`; independent of execution order.
std::mt19937_64 replication_rng(std::uint64_t seed, std::uint64_t rep);

std::vector<std::vector<StageEstimate>> simulate_trial(const Scenario& s, std::uint64_t rep);

// Integer tallies over replications; reductions are exact.
struct Tally {
  long reps = 0;
  std::vector<long> false_reject;                 // per procedure
  std::vector<std::vector<long>> covered;         // per procedure, per stage
  std::vector<long> median_covered;               // per estimator row
  std::vector<std::string> estimator_labels;

  void merge(const Tally& o);
  bool operator==(const Tally&) const = default;
};

Tally run_replications(const Scenario& s, long first, long count, Execution exec);

struct MetricRow {
  std::string scenario;
  std::string procedure;
  std::string metric;
  double estimate = 0.0;
  double mc_se = 0.0;
  long n_reps = 0;
};

std::vector<MetricRow> summarize(const Scenario& s, const Tally& t);
std::string metrics_csv(const std::vector<MetricRow>& rows);

// JSON scenario file; the design is inline or a path relative to the file.
ScenarioSpec parse_scenario(const std::string& text, const std::string& base_dir = ".");
ScenarioSpec load_scenario(const std::string& path);

// Monte Carlo estimate of the per-stage first-crossing probabilities of the
// boundaries under the null.
struct CrossingEstimate {
  std::vector<double> probability;
  std::vector<double> mc_se;
  long draws = 0;
};

CrossingEstimate mc_crossing(std::span<const double> fractions, std::span<const double> boundaries, long draws,
                             std::uint64_t seed, Execution exec);

}  // namespace gsci
