#include "gsci/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gsci {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr const char* kEstimatorLabels[] = {"a-r", "a-s", "b-s", "c-r", "c-s", "d-s"};

bool has(const std::vector<Metric>& v, Metric m) { return std::find(v.begin(), v.end(), m) != v.end(); }

Tally empty_tally(const Scenario& s) {
  Tally t;
  const auto n = s.spec().procedures.size();
  t.false_reject.assign(n, 0);
  t.covered.assign(n, std::vector<long>(s.stages(), 0));
  if (has(s.spec().metrics, Metric::Median)) {
    t.estimator_labels.assign(std::begin(kEstimatorLabels), std::end(kEstimatorLabels));
    t.median_covered.assign(t.estimator_labels.size(), 0);
  }
  return t;
}

void tally_one(const Scenario& s, std::uint64_t rep, Tally& t) {
  const auto& spec = s.spec();
  const int m = s.hypotheses();
  PValueFamily p(s.curves(), simulate_trial(s, rep));
  AnalysisOptions opts;
  opts.procedures = spec.procedures;
  opts.policy = spec.policy;
  opts.estimators = has(spec.metrics, Metric::Median);
  const Analysis a = analyze(s.design(), p, s.stop_after(), opts);

  for (std::size_t i = 0; i < a.procedures.size(); ++i) {
    const auto& pr = a.procedures[i];
    const auto& last = pr.analyses.back();
    for (int j : last.rejected.indices()) {
      if (spec.theta[j] <= 0.0) {
        ++t.false_reject[i];
        break;
      }
    }
    for (std::size_t k = 0; k < pr.analyses.size(); ++k) {
      const auto& L = pr.analyses[k].lower;
      bool ok = true;
      for (int j = 0; j < m && ok; ++j) ok = L[j] < spec.theta[j];
      if (ok) ++t.covered[i][k];
    }
  }
  for (std::size_t e = 0; e < a.estimators.size(); ++e) {
    bool ok = true;
    for (int j = 0; j < m && ok; ++j) ok = a.estimators[e].estimates[j] <= spec.theta[j];
    if (ok) ++t.median_covered[e];
  }
  ++t.reps;
}

double binomial_se(double p, long n) { return n > 0 ? std::sqrt(std::max(p * (1.0 - p), 0.0) / n) : 0.0; }

}  // namespace

SquareMatrix cholesky_psd(const SquareMatrix& a) {
  const int n = a.size();
  SquareMatrix l(n);
  const double tol = 1e-10;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (std::abs(a(i, j) - a(j, i)) > tol) throw Error(Errc::NotPSD, "correlation matrix is not symmetric");
    }
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d < -tol) throw Error(Errc::NotPSD, "correlation matrix is not positive semi-definite");
    const double ljj = d > tol ? std::sqrt(d) : 0.0;
    l(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (ljj == 0.0) {
        if (std::abs(s) > 1e-8) throw Error(Errc::NotPSD, "correlation matrix is not positive semi-definite");
        l(i, j) = 0.0;
      } else {
        l(i, j) = s / ljj;
      }
    }
  }
  return l;
}

Scenario::Scenario(ScenarioSpec spec) : spec_(std::move(spec)) {
  if (!spec_.design) throw Error(Errc::ValidationError, "scenario needs a design");
  const int m = spec_.design->hypotheses();
  if (static_cast<int>(spec_.theta.size()) != m) throw Error(Errc::ValidationError, "theta needs one entry per hypothesis");
  if (spec_.correlation.size() == 0) {
    spec_.correlation = SquareMatrix(m);
    for (int j = 0; j < m; ++j) spec_.correlation(j, j) = 1.0;
  }
  if (spec_.correlation.size() != m) throw Error(Errc::ValidationError, "correlation must be m x m");
  for (int j = 0; j < m; ++j) {
    if (std::abs(spec_.correlation(j, j) - 1.0) > 1e-12) {
      throw Error(Errc::ValidationError, "correlation matrix needs a unit diagonal");
    }
  }
  chol_ = cholesky_psd(spec_.correlation);
  if (spec_.max_information.empty()) spec_.max_information.assign(m, 1.0);
  if (static_cast<int>(spec_.max_information.size()) != m) {
    throw Error(Errc::ValidationError, "max_information needs one entry per hypothesis");
  }
  for (double i : spec_.max_information) {
    if (!(i > 0.0) || !std::isfinite(i)) throw Error(Errc::ValidationError, "max_information must be positive");
  }
  if (!spec_.scripted_stops.empty() && static_cast<int>(spec_.scripted_stops.size()) != m) {
    throw Error(Errc::ValidationError, "scripted stops need one entry per hypothesis");
  }
  for (int k : spec_.scripted_stops) {
    if (k < 0 || k > spec_.design->stages()) throw Error(Errc::ValidationError, "scripted stop stage out of range");
  }
  if (spec_.replications < 1) throw Error(Errc::ValidationError, "replications must be at least 1");
  if (spec_.procedures.empty()) throw Error(Errc::ValidationError, "no procedure selected");
  for (int j = 0; j < m; ++j) {
    curves_.push_back(shared_curve(spec_.design->spec.spending[j], spec_.design->spec.information_fractions[j]));
  }
}

std::vector<int> Scenario::stop_after() const {
  std::vector<int> s(hypotheses(), -1);
  for (std::size_t j = 0; j < spec_.scripted_stops.size(); ++j) s[j] = spec_.scripted_stops[j] - 1;
  return s;
}

std::mt19937_64 replication_rng(std::uint64_t seed, std::uint64_t rep) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ rep));
}

std::vector<std::vector<StageEstimate>> simulate_trial(const Scenario& s, std::uint64_t rep) {
  const int m = s.hypotheses();
  const int K = s.stages();
  auto rng = replication_rng(s.spec().seed, rep);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& L = s.cholesky();
  const auto& spec = s.spec();
  std::vector<std::vector<StageEstimate>> out(m);
  std::vector<double> z(m), score(m, 0.0);
  for (int k = 0; k < K; ++k) {
    for (double& x : z) x = normal(rng);
    for (int j = 0; j < m; ++j) {
      double e = 0.0;
      for (int i = 0; i <= j; ++i) e += L(j, i) * z[i];
      const auto& t = s.design().spec.information_fractions[j];
      const double info = t[k] * spec.max_information[j];
      const double inc = (t[k] - (k ? t[k - 1] : 0.0)) * spec.max_information[j];
      score[j] += spec.theta[j] * inc + std::sqrt(inc) * e;
      out[j].push_back({score[j] / info, 1.0 / std::sqrt(info)});
    }
  }
  return out;
}

void Tally::merge(const Tally& o) {
  reps += o.reps;
  for (std::size_t i = 0; i < false_reject.size(); ++i) false_reject[i] += o.false_reject[i];
  for (std::size_t i = 0; i < covered.size(); ++i)
    for (std::size_t k = 0; k < covered[i].size(); ++k) covered[i][k] += o.covered[i][k];
  for (std::size_t i = 0; i < median_covered.size(); ++i) median_covered[i] += o.median_covered[i];
}

Tally run_replications(const Scenario& s, long first, long count, Execution exec) {
  Tally total = empty_tally(s);
  if (exec == Execution::Serial) {
    for (long r = first; r < first + count; ++r) tally_one(s, static_cast<std::uint64_t>(r), total);
    return total;
  }
  std::exception_ptr error;
#pragma omp parallel
  {
    Tally local = empty_tally(s);
#pragma omp for schedule(dynamic, 16)
    for (long r = first; r < first + count; ++r) {
      try {
        tally_one(s, static_cast<std::uint64_t>(r), local);
      } catch (...) {
#pragma omp critical(gsci_sim_error)
        if (!error) error = std::current_exception();
      }
    }
#pragma omp critical(gsci_sim_merge)
    total.merge(local);
  }
  if (error) std::rethrow_exception(error);
  return total;
}

std::vector<MetricRow> summarize(const Scenario& s, const Tally& t) {
  std::vector<MetricRow> rows;
  const auto& spec = s.spec();
  auto add = [&](const std::string& proc, const std::string& metric, long hits) {
    const double p = t.reps ? static_cast<double>(hits) / t.reps : 0.0;
    rows.push_back({spec.name, proc, metric, p, binomial_se(p, t.reps), t.reps});
  };
  for (std::size_t i = 0; i < spec.procedures.size(); ++i) {
    const std::string proc = to_string(spec.procedures[i]);
    if (has(spec.metrics, Metric::Fwer)) add(proc, "fwer", t.false_reject[i]);
    if (has(spec.metrics, Metric::Coverage)) {
      for (std::size_t k = 0; k < t.covered[i].size(); ++k) {
        add(proc, "coverage_stage_" + std::to_string(k + 1), t.covered[i][k]);
      }
    }
  }
  for (std::size_t e = 0; e < t.median_covered.size(); ++e) {
    add("estimator-" + t.estimator_labels[e], "median_coverage", t.median_covered[e]);
  }
  return rows;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "scenario,procedure,metric,estimate,mc_se,n_reps\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.procedure << ',' << r.metric << ',';
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,", r.estimate, r.mc_se);
    os << buf << r.n_reps << '\n';
  }
  return os.str();
}

ScenarioSpec parse_scenario(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, std::string("malformed scenario: ") + e.what());
  }
  static const std::set<std::string> keys{"name",    "design",    "theta",           "correlation",
                                          "max_information", "stop_policy", "scripted_stops", "procedures",
                                          "metrics", "replications", "seed"};
  if (!doc.is_object()) throw Error(Errc::ParseError, "a scenario must be a JSON object");
  for (const auto& [k, v] : doc.items()) {
    if (!keys.count(k)) throw Error(Errc::ParseError, "unknown scenario key '" + k + "'");
  }
  ScenarioSpec s;
  try {
    if (doc.contains("name")) s.name = doc["name"].get<std::string>();
    if (!doc.contains("design")) throw Error(Errc::ParseError, "scenario needs a design");
    const json& d = doc["design"];
    std::string design_text;
    if (d.is_string()) {
      std::filesystem::path path(d.get<std::string>());
      if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
      design_text = read_file(path.string());
    } else {
      design_text = d.dump();
    }
    s.design = std::make_shared<const Design>(validate_design(parse_design(design_text)));
    if (!doc.contains("theta")) throw Error(Errc::ParseError, "scenario needs theta");
    s.theta = doc["theta"].get<std::vector<double>>();
    if (doc.contains("correlation")) {
      const auto rows = doc["correlation"].get<std::vector<std::vector<double>>>();
      s.correlation = SquareMatrix(static_cast<int>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw Error(Errc::ValidationError, "correlation must be square");
        for (std::size_t j = 0; j < rows.size(); ++j) s.correlation(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
      }
    }
    if (doc.contains("max_information")) s.max_information = doc["max_information"].get<std::vector<double>>();
    if (doc.contains("stop_policy")) {
      const auto p = doc["stop_policy"].get<std::string>();
      if (p == "stop-on-reject") {
        s.policy = StopPolicy::StopOnReject;
      } else if (p == "never-stop" || p == "scripted") {
        s.policy = StopPolicy::NeverStop;
      } else {
        throw Error(Errc::ValidationError, "unknown stop policy '" + p + "'");
      }
    }
    if (doc.contains("scripted_stops")) s.scripted_stops = doc["scripted_stops"].get<std::vector<int>>();
    if (doc.contains("procedures")) {
      s.procedures.clear();
      for (const auto& x : doc["procedures"]) s.procedures.push_back(parse_procedure(x.get<std::string>()));
    }
    if (doc.contains("metrics")) {
      s.metrics.clear();
      for (const auto& x : doc["metrics"]) {
        const auto name = x.get<std::string>();
        if (name == "fwer") {
          s.metrics.push_back(Metric::Fwer);
        } else if (name == "coverage") {
          s.metrics.push_back(Metric::Coverage);
        } else if (name == "median") {
          s.metrics.push_back(Metric::Median);
        } else {
          throw Error(Errc::ValidationError, "unknown metric '" + name + "'");
        }
      }
    }
    if (doc.contains("replications")) s.replications = doc["replications"].get<long>();
    if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("scenario field has the wrong type: ") + e.what());
  }
  return s;
}

ScenarioSpec load_scenario(const std::string& path) {
  return parse_scenario(read_file(path), std::filesystem::path(path).parent_path().string());
}

CrossingEstimate mc_crossing(std::span<const double> t, std::span<const double> c, long draws, std::uint64_t seed,
                             Execution exec) {
  validate_fractions(t);
  const int K = static_cast<int>(c.size());
  if (K > static_cast<int>(t.size())) throw Error(Errc::DimensionMismatch, "more boundaries than stages");
  constexpr long kBlock = 1 << 16;
  const long blocks = (draws + kBlock - 1) / kBlock;
  std::vector<long> hits(K, 0);

  auto run_block = [&](long b, std::vector<long>& h) {
    auto rng = replication_rng(seed, static_cast<std::uint64_t>(b));
    std::normal_distribution<double> normal(0.0, 1.0);
    const long n = std::min(kBlock, draws - b * kBlock);
    for (long i = 0; i < n; ++i) {
      double w = 0.0;
      for (int k = 0; k < K; ++k) {
        w += std::sqrt(t[k] - (k ? t[k - 1] : 0.0)) * normal(rng);
        if (w / std::sqrt(t[k]) >= c[k]) {
          ++h[k];
          break;
        }
      }
    }
  };

  if (exec == Execution::Serial) {
    for (long b = 0; b < blocks; ++b) run_block(b, hits);
  } else {
#pragma omp parallel
    {
      std::vector<long> local(K, 0);
#pragma omp for schedule(static)
      for (long b = 0; b < blocks; ++b) run_block(b, local);
#pragma omp critical(gsci_mc_merge)
      for (int k = 0; k < K; ++k) hits[k] += local[k];
    }
  }
  CrossingEstimate out;
  out.draws = draws;
  for (int k = 0; k < K; ++k) {
    const double p = static_cast<double>(hits[k]) / draws;
    out.probability.push_back(p);
    out.mc_se.push_back(binomial_se(p, draws));
  }
  return out;
}

}  // namespace gsci
