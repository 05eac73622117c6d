#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gsci/analysis.hpp"
#include "gsci/simulation.hpp"

using namespace gsci;

namespace {

int analyze_cmd(const std::string& design_path, const std::string& data_path, const std::vector<std::string>& procs,
                int stage, bool estimators, const std::string& format, const std::string& policy) {
  const Design design = load_design(design_path);
  const TrialData data = load_data_csv(data_path, design);
  AnalysisOptions opts;
  if (!procs.empty()) {
    opts.procedures.clear();
    for (const auto& p : procs) opts.procedures.push_back(parse_procedure(p));
  }
  opts.estimators = estimators;
  opts.policy = policy == "stop-on-reject" ? StopPolicy::StopOnReject : StopPolicy::NeverStop;
  if (stage > 0) opts.upto = stage;
  const Analysis a = analyze(design, data, opts);
  const int shown = stage > 0 ? stage : a.analyses;
  std::cout << (format == "json" ? json_report(design, a, shown) : text_report(design, a, shown));
  return 0;
}

int simulate_cmd(const std::string& scenario_path, long reps, bool serial, const std::string& output) {
  ScenarioSpec spec = load_scenario(scenario_path);
  if (reps > 0) spec.replications = reps;
  const Scenario s(spec);
  const Tally t = run_replications(s, 0, spec.replications, serial ? Execution::Serial : Execution::Parallel);
  const std::string csv = metrics_csv(summarize(s, t));
  if (output.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(output);
    if (!out) throw Error(Errc::ValidationError, "cannot write '" + output + "'");
    out << csv;
  }
  return 0;
}

int boundaries_cmd(const std::string& design_path, double gamma) {
  const Design design = load_design(design_path);
  for (int j = 0; j < design.hypotheses(); ++j) {
    const auto& t = design.spec.information_fractions[j];
    const auto levels = nominal_levels(design.spec.spending[j], t, gamma);
    std::cout << design.spec.hypotheses[j] << " (" << to_string(design.spec.spending[j]) << ")\n";
    for (std::size_t k = 0; k < levels.size(); ++k) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  stage %zu  t=%.4f  nominal level %.8g\n", k + 1, t[k], levels[k]);
      std::cout << buf;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group sequential graphical tests with simultaneous confidence bounds"};
  app.require_subcommand(1);

  std::string design_path, data_path, format = "text", policy = "never-stop";
  std::vector<std::string> procs;
  int stage = 0;
  bool estimators = false;
  auto* analyze = app.add_subcommand("analyze", "Analyze observed stage data");
  analyze->add_option("--design", design_path, "Design file (JSON)")->required();
  analyze->add_option("--data", data_path, "Stage data (CSV)")->required();
  analyze->add_option("--procedure", procs, "gsd-r, gsd-s, adjust, isci-r, isci-s or isci-adjust (repeatable)");
  analyze->add_option("--stage", stage, "Report this analysis (1-based); later stages repeat the frozen result");
  analyze->add_flag("--estimators", estimators, "Add median conservative estimators");
  analyze->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  analyze->add_option("--stop-policy", policy, "Stops beyond the recorded ones for sequential procedures")
      ->check(CLI::IsMember({"never-stop", "stop-on-reject"}));

  std::string scenario_path, output;
  long reps = 0;
  bool serial = false;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo error rates, coverage and median coverage");
  simulate->add_option("--scenario", scenario_path, "Scenario file (JSON)")->required();
  simulate->add_option("--replications", reps, "Override the number of replications");
  simulate->add_flag("--serial", serial, "Run the serial kernel");
  simulate->add_option("--output", output, "Write the CSV here instead of stdout");

  double gamma = 0.025;
  std::string bdesign;
  auto* bounds = app.add_subcommand("boundaries", "Nominal levels of each hypothesis");
  bounds->add_option("--design", bdesign, "Design file (JSON)")->required();
  bounds->add_option("--gamma", gamma, "Overall level");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*analyze) return analyze_cmd(design_path, data_path, procs, stage, estimators, format, policy);
    if (*simulate) return simulate_cmd(scenario_path, reps, serial, output);
    if (*bounds) return boundaries_cmd(bdesign, gamma);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ValidationError || e.code() == Errc::ParseError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
