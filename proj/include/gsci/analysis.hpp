#pragma once

#include <string>
#include <vector>

#include "gsci/design.hpp"
#include "gsci/estimators.hpp"
#include "gsci/informative.hpp"

namespace gsci {

enum class Procedure { GsdR, GsdS, Adjust, IsciR, IsciS, IsciAdjust };

inline constexpr Procedure kAllProcedures[] = {Procedure::GsdR,  Procedure::GsdS,  Procedure::Adjust,
                                               Procedure::IsciR, Procedure::IsciS, Procedure::IsciAdjust};

const char* to_string(Procedure p);
Procedure parse_procedure(const std::string& s);
bool is_informative(Procedure p);

// Which hypotheses stop collecting beyond the stops recorded in the data.
// Procedures with repeated p-values always stop rejected hypotheses.
enum class StopPolicy { NeverStop, StopOnReject };

struct AnalysisOptions {
  std::vector<Procedure> procedures{std::begin(kAllProcedures), std::end(kAllProcedures)};
  bool estimators = false;
  StopPolicy policy = StopPolicy::NeverStop;
  int upto = 0;  // analyses to run, 0 = all available
  bool allow_collection_after_reject = false;
};

struct StageResult {
  std::vector<int> stages;  // stage (0-based) read for each hypothesis
  IndexSet rejected;
  std::vector<double> lower;
  std::vector<double> upper;  // informative brackets only
  double gap = 0.0;
  int iterations = 0;
  bool converged = true;
  bool timed_out = false;
};

struct ProcedureResult {
  Procedure procedure = Procedure::GsdR;
  std::vector<StageResult> analyses;
};

struct Analysis {
  int analyses = 0;
  std::vector<ProcedureResult> procedures;
  std::vector<EstimatorResult> estimators;  // at the last analysis

  const ProcedureResult* find(Procedure p) const;
};

// stop_after[j]: last stage with data collection for H_j or -1.
Analysis analyze(const Design& design, const PValueFamily& p, const std::vector<int>& stop_after,
                 const AnalysisOptions& opts);
Analysis analyze(const Design& design, const TrialData& data, const AnalysisOptions& opts);

// Reports for one analysis (1-based); analyses beyond the last one repeat
// the final, frozen result.
std::string text_report(const Design& design, const Analysis& a, int analysis);
std::string json_report(const Design& design, const Analysis& a, int analysis);

}  // namespace gsci
