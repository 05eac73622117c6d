#include "gsci/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gsci/compatible.hpp"
#include "gsci/seq_test.hpp"
#include "json.hpp"

namespace gsci {

using nlohmann::json;

const char* to_string(Procedure p) {
  switch (p) {
    case Procedure::GsdR: return "gsd-r";
    case Procedure::GsdS: return "gsd-s";
    case Procedure::Adjust: return "adjust";
    case Procedure::IsciR: return "isci-r";
    case Procedure::IsciS: return "isci-s";
    case Procedure::IsciAdjust: return "isci-adjust";
  }
  return "?";
}

Procedure parse_procedure(const std::string& s) {
  for (Procedure p : kAllProcedures) {
    if (s == to_string(p)) return p;
  }
  throw Error(Errc::ValidationError, "unknown procedure '" + s + "'");
}

bool is_informative(Procedure p) {
  return p == Procedure::IsciR || p == Procedure::IsciS || p == Procedure::IsciAdjust;
}

const ProcedureResult* Analysis::find(Procedure p) const {
  for (const auto& r : procedures) {
    if (r.procedure == p) return &r;
  }
  return nullptr;
}

namespace {

struct Runner {
  const Design& design;
  const PValueFamily& p;
  const AnalysisOptions& opts;
  std::vector<int> data_stop;
  int n = 0;

  int m() const { return design.hypotheses(); }
  double alpha() const { return design.alpha(); }

  bool stops_on_reject(PKind kind) const {
    return (kind == PKind::Repeated && !opts.allow_collection_after_reject) || opts.policy == StopPolicy::StopOnReject;
  }

  std::vector<int> stages_at(int i, const std::vector<int>& stop) const {
    std::vector<int> s(m());
    for (int j = 0; j < m(); ++j) {
      const int last = stop[j] >= 0 ? std::min(stop[j], i) : i;
      if (last >= p.observed_stages(j)) {
        throw Error(Errc::MissingObservation,
                    "H" + std::to_string(j + 1) + " has no data at stage " + std::to_string(last + 1));
      }
      s[j] = last;
    }
    return s;
  }

  static void stop_rejected(std::vector<int>& stop, IndexSet rejected, int i) {
    for (int j : rejected.indices()) {
      if (stop[j] < 0 || stop[j] > i) stop[j] = i;
    }
  }

  ProcedureResult gsd(PKind kind) const {
    ProcedureResult out{kind == PKind::Repeated ? Procedure::GsdR : Procedure::GsdS, {}};
    GraphState state = design.graph.initial_state();
    IndexSet rejected;
    std::vector<int> stop = data_stop;
    for (int i = 0; i < n; ++i) {
      StageResult r;
      r.stages = stages_at(i, stop);
      rejected = rejected | graph_test_at(state, p, kind, r.stages, alpha());
      r.rejected = rejected;
      r.lower = compatible_bounds(design.graph, rejected, r.stages, p, kind, alpha());
      if (stops_on_reject(kind)) stop_rejected(stop, rejected, i);
      out.analyses.push_back(std::move(r));
    }
    return out;
  }

  ProcedureResult adjust(const ProcedureResult& s) const {
    ProcedureResult out{Procedure::Adjust, {}};
    for (const auto& a : s.analyses) {
      StageResult r;
      r.stages = a.stages;
      r.rejected = efficient_multiple_adjustment(design.graph, a.rejected, a.stages, p, alpha());
      r.lower = compatible_bounds_adjustment(design.graph, a.rejected, r.rejected, a.stages, p, alpha());
      out.analyses.push_back(std::move(r));
    }
    return out;
  }

  ProcedureResult isci(PKind kind) const {
    ProcedureResult out{kind == PKind::Repeated ? Procedure::IsciR : Procedure::IsciS, {}};
    std::vector<int> stop = data_stop;
    IsciStage prev;
    for (int i = 0; i < n; ++i) {
      const auto stages = stages_at(i, stop);
      IsciStage cur = isci_stage(design.graph, p, stages, kind, alpha(), design.iteration(), i ? &prev : nullptr);
      StageResult r;
      r.stages = stages;
      r.rejected = cur.rejected;
      r.lower = cur.bracket.lower;
      r.upper = cur.bracket.upper;
      r.gap = cur.bracket.gap;
      r.iterations = cur.bracket.iterations;
      r.converged = cur.bracket.converged;
      r.timed_out = cur.bracket.timed_out;
      if (stops_on_reject(kind)) stop_rejected(stop, cur.rejected, i);
      out.analyses.push_back(std::move(r));
      prev = std::move(cur);
    }
    return out;
  }

  ProcedureResult isci_adjust(const ProcedureResult& s) const {
    ProcedureResult out{Procedure::IsciAdjust, {}};
    for (const auto& a : s.analyses) {
      const auto adj = isci_efficient_adjustment(design.graph, a.lower, p, a.stages, design.iteration().q, alpha());
      StageResult r;
      r.stages = a.stages;
      r.rejected = adj.rejected;
      r.lower = adj.lower;
      out.analyses.push_back(std::move(r));
    }
    return out;
  }
};

std::vector<std::vector<int>> schedule_of(const ProcedureResult& r) {
  std::vector<std::vector<int>> s;
  for (const auto& a : r.analyses) s.push_back(a.stages);
  return s;
}

std::string number(double x) {
  if (x == kMinusInf) return "-inf";
  if (x == kPlusInf) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

json json_number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

json json_set(IndexSet s) {
  json a = json::array();
  for (int j : s.indices()) a.push_back(j + 1);
  return a;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

Analysis analyze(const Design& design, const PValueFamily& p, const std::vector<int>& stop_after,
                 const AnalysisOptions& opts) {
  if (p.hypotheses() != design.hypotheses() || static_cast<int>(stop_after.size()) != design.hypotheses()) {
    throw Error(Errc::DimensionMismatch, "data must cover every hypothesis");
  }
  Runner run{design, p, opts, stop_after, 0};
  for (int j = 0; j < design.hypotheses(); ++j) run.n = std::max(run.n, p.observed_stages(j));
  if (opts.upto > 0) run.n = std::min(run.n, opts.upto);
  if (run.n == 0) throw Error(Errc::ValidationError, "no observations");

  auto wants = [&](Procedure x) {
    return std::find(opts.procedures.begin(), opts.procedures.end(), x) != opts.procedures.end();
  };
  const bool est = opts.estimators;
  ProcedureResult gr, gs, ad, ir, is, ia;
  if (wants(Procedure::GsdR) || est) gr = run.gsd(PKind::Repeated);
  if (wants(Procedure::GsdS) || wants(Procedure::Adjust) || est) gs = run.gsd(PKind::Sequential);
  if (wants(Procedure::Adjust)) ad = run.adjust(gs);
  if (wants(Procedure::IsciR) || est) ir = run.isci(PKind::Repeated);
  if (wants(Procedure::IsciS) || wants(Procedure::IsciAdjust) || est) is = run.isci(PKind::Sequential);
  if (wants(Procedure::IsciAdjust)) ia = run.isci_adjust(is);

  Analysis a;
  a.analyses = run.n;
  for (Procedure x : kAllProcedures) {
    if (!wants(x)) continue;
    switch (x) {
      case Procedure::GsdR: a.procedures.push_back(gr); break;
      case Procedure::GsdS: a.procedures.push_back(gs); break;
      case Procedure::Adjust: a.procedures.push_back(ad); break;
      case Procedure::IsciR: a.procedures.push_back(ir); break;
      case Procedure::IsciS: a.procedures.push_back(is); break;
      case Procedure::IsciAdjust: a.procedures.push_back(ia); break;
    }
  }
  if (est) {
    const auto& g = design.graph;
    const auto& cfg = design.iteration();
    a.estimators.push_back(median_estimates(EstimatorVariant::A, PKind::Repeated, g, p, schedule_of(gr), cfg));
    a.estimators.push_back(median_estimates(EstimatorVariant::A, PKind::Sequential, g, p, schedule_of(gs), cfg));
    a.estimators.push_back(median_estimates(EstimatorVariant::B, PKind::Sequential, g, p, schedule_of(gs), cfg));
    a.estimators.push_back(median_estimates(EstimatorVariant::C, PKind::Repeated, g, p, schedule_of(ir), cfg));
    a.estimators.push_back(median_estimates(EstimatorVariant::C, PKind::Sequential, g, p, schedule_of(is), cfg));
    a.estimators.push_back(median_estimates(EstimatorVariant::D, PKind::Sequential, g, p, schedule_of(is), cfg));
  }
  return a;
}

Analysis analyze(const Design& design, const TrialData& data, const AnalysisOptions& opts) {
  validate_data(data, design);
  const PValueFamily p = make_family(design, data);
  return analyze(design, p, data.stopped_after, opts);
}

std::string text_report(const Design& design, const Analysis& a, int analysis) {
  const int shown = std::min(std::max(analysis, 1), a.analyses);
  const auto& names = design.spec.hypotheses;
  std::ostringstream os;
  os << "analysis " << shown << " of " << a.analyses;
  if (analysis > a.analyses) os << " (requested " << analysis << ", bounds frozen)";
  os << "\nalpha " << number(design.alpha()) << ", q " << number(design.iteration().q) << "\n";
  for (const auto& pr : a.procedures) {
    const auto& r = pr.analyses[shown - 1];
    os << "\n[" << to_string(pr.procedure) << "] rejected " << format_set(r.rejected) << "\n";
    const bool bracket = !r.upper.empty();
    os << "  " << pad("hypothesis", 12) << pad("stage", 7) << pad("rejected", 10) << pad("lower", 14);
    if (bracket) os << "upper";
    os << "\n";
    for (int j = 0; j < design.hypotheses(); ++j) {
      os << "  " << pad(names[j], 12) << pad(std::to_string(r.stages[j] + 1), 7)
         << pad(r.rejected.contains(j) ? "yes" : "no", 10) << pad(number(r.lower[j]), 14);
      if (bracket) os << number(r.upper[j]);
      os << "\n";
    }
    if (bracket) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  gap %.3e after %d iterations%s\n", r.gap, r.iterations,
                    r.converged ? "" : " (not converged, lower bound is conservative)");
      os << buf;
    }
  }
  if (!a.estimators.empty() && shown == a.analyses) {
    os << "\n[estimators] median conservative at level 0.5\n";
    os << "  " << pad("variant", 10);
    for (int j = 0; j < design.hypotheses(); ++j) os << pad(names[j], 14);
    os << "\n";
    for (const auto& e : a.estimators) {
      os << "  " << pad(std::string(to_string(e.variant)) + "-" + to_string(e.kind), 10);
      for (int j = 0; j < design.hypotheses(); ++j) {
        os << pad(number(e.estimates[j]) + (e.stuck_at_zero[j] ? "*" : ""), 14);
      }
      os << "\n";
    }
    os << "  * stuck at zero after a rejection\n";
  }
  return os.str();
}

std::string json_report(const Design& design, const Analysis& a, int analysis) {
  const int shown = std::min(std::max(analysis, 1), a.analyses);
  json doc;
  doc["analysis"] = shown;
  doc["analyses"] = a.analyses;
  doc["frozen"] = analysis > a.analyses;
  doc["alpha"] = design.alpha();
  doc["q"] = design.iteration().q;
  doc["hypotheses"] = design.spec.hypotheses;
  json procs = json::array();
  for (const auto& pr : a.procedures) {
    const auto& r = pr.analyses[shown - 1];
    json p;
    p["procedure"] = to_string(pr.procedure);
    p["rejected"] = json_set(r.rejected);
    json hs = json::array();
    for (int j = 0; j < design.hypotheses(); ++j) {
      json h;
      h["hypothesis"] = j + 1;
      h["stage"] = r.stages[j] + 1;
      h["rejected"] = r.rejected.contains(j);
      h["lower"] = json_number(r.lower[j]);
      if (!r.upper.empty()) h["upper"] = json_number(r.upper[j]);
      hs.push_back(h);
    }
    p["hypotheses"] = hs;
    if (!r.upper.empty()) {
      p["gap"] = json_number(r.gap);
      p["iterations"] = r.iterations;
      p["converged"] = r.converged;
      p["timed_out"] = r.timed_out;
    }
    procs.push_back(p);
  }
  doc["procedures"] = procs;
  if (!a.estimators.empty() && shown == a.analyses) {
    json es = json::array();
    for (const auto& e : a.estimators) {
      json x;
      x["variant"] = to_string(e.variant);
      x["lambda"] = to_string(e.kind);
      json v = json::array();
      for (double d : e.estimates) v.push_back(json_number(d));
      x["estimates"] = v;
      x["stuck_at_zero"] = e.stuck_at_zero;
      es.push_back(x);
    }
    doc["estimators"] = es;
  }
  return doc.dump(2) + "\n";
}

}  // namespace gsci
