#include "gsci/design.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gsci {

using nlohmann::json;

namespace {

struct Position {
  int line = 1;
  int column = 1;
};

Position position_of(const std::string& text, std::size_t offset) {
  Position p;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++p.line;
      p.column = 1;
    } else {
      ++p.column;
    }
  }
  return p;
}

// Structural problems are reported at the key they concern.
[[noreturn]] void parse_fail(const std::string& text, const std::string& key, const std::string& msg) {
  std::size_t at = key.empty() ? 0 : text.find("\"" + key + "\"");
  if (at == std::string::npos) at = 0;
  const Position p = position_of(text, at);
  throw Error(Errc::ParseError,
              "line " + std::to_string(p.line) + ", column " + std::to_string(p.column) + ": " + msg);
}

const std::set<std::string> kKeys{"alpha",  "hypotheses",           "initial_weights", "transition",
                                  "exhaustion_weights", "stages", "spending", "information_fractions",
                                  "q",      "epsilon",              "delta0"};

std::vector<double> numbers(const std::string& text, const json& j, const std::string& key) {
  if (!j.is_array()) parse_fail(text, key, "'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) parse_fail(text, key, "'" + key + "' must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double number(const std::string& text, const json& doc, const std::string& key, double fallback, bool required) {
  if (!doc.contains(key)) {
    if (required) parse_fail(text, "", "missing key '" + key + "'");
    return fallback;
  }
  if (!doc[key].is_number()) parse_fail(text, key, "'" + key + "' must be a number");
  return doc[key].get<double>();
}

SpendingFunction spending_from(const std::string& text, const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    parse_fail(text, "spending", "each spending entry needs a string 'kind'");
  }
  for (const auto& [k, v] : j.items()) {
    if (k != "kind" && k != "rho") parse_fail(text, k, "unknown spending key '" + k + "'");
  }
  double rho = 1.0;
  if (j.contains("rho")) {
    if (!j["rho"].is_number()) parse_fail(text, "rho", "'rho' must be a number");
    rho = j["rho"].get<double>();
  }
  try {
    return parse_spending(j["kind"].get<std::string>(), rho);
  } catch (const Error& e) {
    parse_fail(text, "spending", e.what());
  }
}

json spending_json(const SpendingFunction& f) {
  json j{{"kind", to_string(f)}};
  if (f.kind == SpendingKind::Power) j["rho"] = f.rho;
  return j;
}

bool parse_bool(const std::string& s, bool& out) {
  std::string t;
  for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "true" || t == "1" || t == "yes") {
    out = true;
    return true;
  }
  if (t == "false" || t == "0" || t == "no" || t.empty()) {
    out = false;
    return true;
  }
  return false;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ParseError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Design validate_design(DesignSpec spec) {
  const int m = spec.graph.size();
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw Error(Errc::ValidationError, "alpha must be in (0,1)");
  if (spec.stages < 1) throw Error(Errc::ValidationError, "stages must be at least 1");
  if (spec.hypotheses.empty()) {
    for (int j = 0; j < m; ++j) spec.hypotheses.push_back("H" + std::to_string(j + 1));
  }
  if (static_cast<int>(spec.hypotheses.size()) != m) {
    throw Error(Errc::ValidationError, "one name per hypothesis expected");
  }
  if (spec.spending.size() == 1 && m > 1) spec.spending.assign(m, spec.spending[0]);
  if (static_cast<int>(spec.spending.size()) != m) {
    throw Error(Errc::ValidationError, "one spending function per hypothesis expected");
  }
  if (spec.information_fractions.empty()) {
    std::vector<double> t;
    for (int k = 1; k <= spec.stages; ++k) t.push_back(static_cast<double>(k) / spec.stages);
    spec.information_fractions.assign(m, t);
  }
  if (spec.information_fractions.size() == 1 && m > 1) {
    spec.information_fractions.assign(m, spec.information_fractions[0]);
  }
  if (static_cast<int>(spec.information_fractions.size()) != m) {
    throw Error(Errc::ValidationError, "one information schedule per hypothesis expected");
  }
  for (const auto& t : spec.information_fractions) {
    if (static_cast<int>(t.size()) != spec.stages) {
      throw Error(Errc::ValidationError, "each information schedule needs one fraction per stage");
    }
    try {
      validate_fractions(t);
    } catch (const Error& e) {
      throw Error(Errc::ValidationError, e.what());
    }
  }
  try {
    validate_config(spec.iteration, spec.alpha);
  } catch (const Error& e) {
    throw Error(Errc::ValidationError, e.what());
  }
  try {
    ValidatedGraph g = validate_graph(spec.graph);
    spec.graph = g.spec();
    return Design{std::move(spec), std::move(g)};
  } catch (const Error& e) {
    throw Error(Errc::ValidationError, e.what());
  }
}

DesignSpec parse_design(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const Position p = position_of(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(Errc::ParseError, "line " + std::to_string(p.line) + ", column " + std::to_string(p.column) +
                                      ": malformed JSON");
  }
  if (!doc.is_object()) parse_fail(text, "", "a design must be a JSON object");
  for (const auto& [k, v] : doc.items()) {
    if (!kKeys.count(k)) parse_fail(text, k, "unknown key '" + k + "'");
  }

  DesignSpec s;
  s.alpha = number(text, doc, "alpha", 0.025, true);
  if (!doc.contains("initial_weights")) parse_fail(text, "", "missing key 'initial_weights'");
  s.graph.initial_weights = numbers(text, doc["initial_weights"], "initial_weights");
  const int m = static_cast<int>(s.graph.initial_weights.size());

  if (doc.contains("hypotheses")) {
    if (!doc["hypotheses"].is_array()) parse_fail(text, "hypotheses", "'hypotheses' must be an array of names");
    for (const auto& v : doc["hypotheses"]) {
      if (!v.is_string()) parse_fail(text, "hypotheses", "'hypotheses' must be an array of names");
      s.hypotheses.push_back(v.get<std::string>());
    }
  }

  if (!doc.contains("transition")) parse_fail(text, "", "missing key 'transition'");
  const json& g = doc["transition"];
  if (!g.is_array() || static_cast<int>(g.size()) != m) {
    parse_fail(text, "transition", "'transition' must have one row per hypothesis");
  }
  s.graph.transition = SquareMatrix(m);
  for (int i = 0; i < m; ++i) {
    auto row = numbers(text, g[i], "transition");
    if (static_cast<int>(row.size()) != m) parse_fail(text, "transition", "transition row " +
                                                                              std::to_string(i + 1) +
                                                                              " must have one entry per hypothesis");
    for (int j = 0; j < m; ++j) s.graph.transition(i, j) = row[j];
  }
  if (doc.contains("exhaustion_weights")) {
    s.graph.exhaustion_weights = numbers(text, doc["exhaustion_weights"], "exhaustion_weights");
  }

  const double stages = number(text, doc, "stages", 1, true);
  if (stages != std::floor(stages) || stages < 1 || stages > 100) {
    parse_fail(text, "stages", "'stages' must be a positive integer");
  }
  s.stages = static_cast<int>(stages);

  if (doc.contains("spending")) {
    const json& sp = doc["spending"];
    if (sp.is_array()) {
      for (const auto& e : sp) s.spending.push_back(spending_from(text, e));
    } else {
      s.spending.push_back(spending_from(text, sp));
    }
  } else {
    s.spending.push_back(SpendingFunction::pocock_like());
  }

  if (doc.contains("information_fractions")) {
    const json& f = doc["information_fractions"];
    if (!f.is_array()) parse_fail(text, "information_fractions", "'information_fractions' must be an array");
    if (!f.empty() && f[0].is_array()) {
      for (const auto& row : f) s.information_fractions.push_back(numbers(text, row, "information_fractions"));
    } else {
      s.information_fractions.push_back(numbers(text, f, "information_fractions"));
    }
  }

  s.iteration.q = number(text, doc, "q", s.iteration.q, false);
  s.iteration.epsilon = number(text, doc, "epsilon", s.iteration.epsilon, false);
  s.iteration.delta0 = number(text, doc, "delta0", s.iteration.delta0, false);
  return s;
}

Design load_design(const std::string& path) { return validate_design(parse_design(read_file(path))); }

std::string serialize_design(const DesignSpec& s) {
  const int m = s.graph.size();
  json doc;
  doc["alpha"] = s.alpha;
  doc["hypotheses"] = s.hypotheses;
  doc["initial_weights"] = s.graph.initial_weights;
  json g = json::array();
  for (int i = 0; i < m; ++i) {
    json row = json::array();
    for (int j = 0; j < m; ++j) row.push_back(s.graph.transition(i, j));
    g.push_back(row);
  }
  doc["transition"] = g;
  doc["exhaustion_weights"] = s.graph.exhaustion_weights;
  doc["stages"] = s.stages;
  json sp = json::array();
  for (const auto& f : s.spending) sp.push_back(spending_json(f));
  doc["spending"] = sp;
  doc["information_fractions"] = s.information_fractions;
  doc["q"] = s.iteration.q;
  doc["epsilon"] = s.iteration.epsilon;
  doc["delta0"] = s.iteration.delta0;
  return doc.dump(2) + "\n";
}

int TrialData::analyses() const {
  int n = 0;
  for (const auto& e : estimates) n = std::max(n, static_cast<int>(e.size()));
  return n;
}

TrialData parse_data_csv(const std::string& text, const Design& design) {
  const int m = design.hypotheses();
  const int K = design.stages();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": " + msg);
  };
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split(trim(line));
      break;
    }
  }
  const std::vector<std::string> expected{"hypothesis", "stage", "estimate", "std_error", "info_fraction", "stopped"};
  if (header.empty()) throw Error(Errc::ValidationError, "data file is empty");
  if (header != expected) fail("header must be hypothesis,stage,estimate,std_error,info_fraction,stopped");

  struct Row {
    int j, k;
    StageEstimate e;
    double t;
    bool stopped;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(trim(line));
    if (cells.size() != expected.size()) fail("expected 6 columns");
    Row r{};
    try {
      std::size_t used = 0;
      r.j = std::stoi(cells[0], &used) - 1;
      if (used != cells[0].size()) throw std::invalid_argument("");
      r.k = std::stoi(cells[1], &used) - 1;
      if (used != cells[1].size()) throw std::invalid_argument("");
      r.e.estimate = std::stod(cells[2]);
      r.e.std_error = std::stod(cells[3]);
      r.t = std::stod(cells[4]);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    if (!parse_bool(cells[5], r.stopped)) fail("'stopped' must be true or false");
    rows.push_back(r);
  }
  if (rows.empty()) throw Error(Errc::ValidationError, "data file has no observations");

  TrialData d;
  d.estimates.assign(m, {});
  d.fractions.assign(m, {});
  d.stopped_after.assign(m, -1);
  std::vector<std::vector<int>> seen(m, std::vector<int>(K, 0));
  for (const auto& r : rows) {
    if (r.j < 0 || r.j >= m) throw Error(Errc::ValidationError, "hypothesis index out of range");
    if (r.k < 0 || r.k >= K) throw Error(Errc::ValidationError, "stage index out of range");
    if (seen[r.j][r.k]++) {
      throw Error(Errc::ValidationError, "duplicate row for hypothesis " + std::to_string(r.j + 1) + ", stage " +
                                             std::to_string(r.k + 1));
    }
  }
  std::vector<Row> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const Row& a, const Row& b) { return a.j != b.j ? a.j < b.j : a.k < b.k; });
  for (const auto& r : sorted) {
    if (static_cast<int>(d.estimates[r.j].size()) != r.k) {
      throw Error(Errc::ValidationError, "stages of hypothesis " + std::to_string(r.j + 1) + " are not contiguous");
    }
    if (d.stopped_after[r.j] >= 0) {
      throw Error(Errc::ValidationError, "hypothesis " + std::to_string(r.j + 1) + " has data after it stopped");
    }
    d.estimates[r.j].push_back(r.e);
    d.fractions[r.j].push_back(r.t);
    if (r.stopped) d.stopped_after[r.j] = r.k;
  }
  validate_data(d, design);
  return d;
}

TrialData load_data_csv(const std::string& path, const Design& design) {
  return parse_data_csv(read_file(path), design);
}

std::string write_data_csv(const TrialData& d) {
  std::ostringstream os;
  os.precision(17);
  os << "hypothesis,stage,estimate,std_error,info_fraction,stopped\n";
  for (std::size_t j = 0; j < d.estimates.size(); ++j) {
    for (std::size_t k = 0; k < d.estimates[j].size(); ++k) {
      os << j + 1 << ',' << k + 1 << ',' << d.estimates[j][k].estimate << ',' << d.estimates[j][k].std_error << ','
         << d.fractions[j][k] << ',' << (d.stopped_after[j] == static_cast<int>(k) ? "true" : "false") << '\n';
    }
  }
  return os.str();
}

void validate_data(const TrialData& d, const Design& design) {
  const int m = design.hypotheses();
  if (static_cast<int>(d.estimates.size()) != m || static_cast<int>(d.fractions.size()) != m ||
      static_cast<int>(d.stopped_after.size()) != m) {
    throw Error(Errc::ValidationError, "data must cover every hypothesis");
  }
  const int n = d.analyses();
  if (n == 0) throw Error(Errc::ValidationError, "no observations");
  for (int j = 0; j < m; ++j) {
    const int have = static_cast<int>(d.estimates[j].size());
    if (have == 0) throw Error(Errc::ValidationError, "hypothesis " + std::to_string(j + 1) + " has no data");
    if (have > design.stages()) throw Error(Errc::ValidationError, "more stages than planned");
    if (static_cast<int>(d.fractions[j].size()) != have) throw Error(Errc::ValidationError, "missing fractions");
    if (d.stopped_after[j] < 0 && have < n) {
      throw Error(Errc::ValidationError, "hypothesis " + std::to_string(j + 1) + " is still collecting but has no data at stage " +
                                             std::to_string(have + 1));
    }
    if (d.stopped_after[j] >= 0 && d.stopped_after[j] != have - 1) {
      throw Error(Errc::ValidationError, "hypothesis " + std::to_string(j + 1) + " has data after it stopped");
    }
    for (const auto& e : d.estimates[j]) {
      if (!std::isfinite(e.estimate) || !(e.std_error > 0.0) || !std::isfinite(e.std_error)) {
        throw Error(Errc::ValidationError, "estimates must be finite with positive standard errors");
      }
    }
  }
  realized_schedules(design, d);
}

std::vector<std::vector<double>> realized_schedules(const Design& design, const TrialData& d) {
  const int m = design.hypotheses();
  std::vector<std::vector<double>> out(m);
  for (int j = 0; j < m; ++j) {
    out[j] = design.spec.information_fractions[j];
    for (std::size_t k = 0; k < d.fractions[j].size(); ++k) out[j][k] = d.fractions[j][k];
    try {
      validate_fractions(out[j]);
    } catch (const Error& e) {
      throw Error(Errc::ValidationError, "hypothesis " + std::to_string(j + 1) +
                                             ": realized information fractions do not fit the plan (" + e.what() + ")");
    }
  }
  return out;
}

PValueFamily make_family(const Design& design, const TrialData& data, const CurveOptions& opts) {
  const auto schedules = realized_schedules(design, data);
  std::vector<std::shared_ptr<const NominalLevelCurve>> curves;
  for (int j = 0; j < design.hypotheses(); ++j) {
    curves.push_back(shared_curve(design.spec.spending[j], schedules[j], opts));
  }
  return PValueFamily(std::move(curves), data.estimates);
}

}  // namespace gsci
