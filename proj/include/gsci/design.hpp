#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gsci/boundaries.hpp"
#include "gsci/graph.hpp"
#include "gsci/informative.hpp"
#include "gsci/pvalues.hpp"

namespace gsci {

// Design document as read from disk.
struct DesignSpec {
  double alpha = 0.025;
  std::vector<std::string> hypotheses;
  GraphSpec graph;
  int stages = 1;
  std::vector<SpendingFunction> spending;                  // one per hypothesis
  std::vector<std::vector<double>> information_fractions;  // one schedule per hypothesis
  IterationConfig iteration;
};

struct Design {
  DesignSpec spec;
  ValidatedGraph graph;

  int hypotheses() const { return graph.size(); }
  int stages() const { return spec.stages; }
  double alpha() const { return spec.alpha; }
  const IterationConfig& iteration() const { return spec.iteration; }
};

Design validate_design(DesignSpec spec);

// JSON design files. ParseError carries line and column of the problem.
DesignSpec parse_design(const std::string& text);
Design load_design(const std::string& path);
std::string serialize_design(const DesignSpec& spec);

// Stagewise observations of one trial, hypotheses and stages 0-based.
struct TrialData {
  std::vector<std::vector<StageEstimate>> estimates;
  std::vector<std::vector<double>> fractions;  // realized information fractions
  std::vector<int> stopped_after;              // last stage when collection stopped, else -1

  int analyses() const;
};

// CSV with header hypothesis,stage,estimate,std_error,info_fraction,stopped
TrialData parse_data_csv(const std::string& text, const Design& design);
TrialData load_data_csv(const std::string& path, const Design& design);
std::string write_data_csv(const TrialData& data);

void validate_data(const TrialData& data, const Design& design);

// Schedules with realized fractions for observed stages and planned ones after.
std::vector<std::vector<double>> realized_schedules(const Design& design, const TrialData& data);

PValueFamily make_family(const Design& design, const TrialData& data, const CurveOptions& opts = {});

std::string read_file(const std::string& path);

}  // namespace gsci
