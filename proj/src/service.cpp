#include "gsci/service.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "gsci/analysis.hpp"
#include "httplib.h"
#include "json.hpp"

namespace gsci {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Reply reply(int status, const json& body) { return {status, body.dump(2) + "\n"}; }

Reply error_reply(int status, const std::string& code, const std::string& message) {
  return reply(status, json{{"error", code}, {"message", message}});
}

int status_for(Errc code) {
  switch (code) {
    case Errc::StageOverrun:
    case Errc::NotCollecting: return 409;
    default: return 422;
  }
}

Reply from_error(const Error& e) { return error_reply(status_for(e.code()), to_string(e.code()), e.what()); }

std::string new_id() {
  std::random_device rd;
  std::uniform_int_distribution<std::uint64_t> d;
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(d(rd)),
                static_cast<unsigned long long>(d(rd)));
  return buf;
}

json parse_body(const std::string& body) {
  if (body.empty()) throw Error(Errc::ValidationError, "request body is empty");
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, std::string("malformed JSON: ") + e.what());
  }
}

json set_json(IndexSet s) {
  json a = json::array();
  for (int j : s.indices()) a.push_back(j + 1);
  return a;
}

// Length-prefixed records: 4 byte little-endian size, then JSON text.
void append_record(const fs::path& file, const json& record) {
  const std::string text = record.dump();
  const auto n = static_cast<std::uint32_t>(text.size());
  char len[4] = {static_cast<char>(n & 0xff), static_cast<char>((n >> 8) & 0xff),
                 static_cast<char>((n >> 16) & 0xff), static_cast<char>((n >> 24) & 0xff)};
  std::ofstream out(file, std::ios::binary | std::ios::app);
  out.write(len, 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw std::runtime_error("cannot append to session log " + file.string());
}

std::vector<json> read_records(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::vector<json> out;
  for (;;) {
    unsigned char len[4];
    if (!in.read(reinterpret_cast<char*>(len), 4)) break;
    const std::uint32_t n = len[0] | (len[1] << 8) | (len[2] << 16) | (static_cast<std::uint32_t>(len[3]) << 24);
    std::string text(n, '\0');
    if (!in.read(text.data(), n)) break;  // torn tail record
    out.push_back(json::parse(text));
  }
  return out;
}

}  // namespace

class Session {
 public:
  Session(std::string id, Design design, fs::path log, int timeout_ms)
      : id_(std::move(id)), design_(std::move(design)), log_(std::move(log)) {
    design_.spec.iteration.time_budget_ms = timeout_ms;
    const int m = design_.hypotheses();
    data_.estimates.assign(m, {});
    data_.fractions.assign(m, {});
    data_.stopped_after.assign(m, -1);
    collecting_ = IndexSet::full(m);
  }

  const std::string& id() const { return id_; }
  std::mutex& write_lock() { return write_; }
  const fs::path& log() const { return log_; }

  json summary() const {
    std::shared_lock lock(read_);
    return summary_locked();
  }

  // Validates and applies a stage submission; returns the stage snapshot.
  Reply submit(const json& body) {
    if (!body.is_object() || !body.contains("observations") || !body["observations"].is_array()) {
      throw Error(Errc::ValidationError, "body needs an 'observations' array");
    }
    const int m = design_.hypotheses();
    const int next = stage_ + 1;
    if (body.contains("stage")) {
      if (!body["stage"].is_number_integer()) throw Error(Errc::ValidationError, "'stage' must be an integer");
      if (body["stage"].get<int>() != next) {
        throw Error(Errc::StageOverrun, "expected stage " + std::to_string(next));
      }
    }
    if (next > design_.stages() || collecting_.empty()) {
      throw Error(Errc::StageOverrun, "the trial has no stage left");
    }
    TrialData data = data_;
    IndexSet seen;
    for (const auto& o : body["observations"]) {
      if (!o.is_object() || !o.contains("hypothesis") || !o["hypothesis"].is_number_integer() ||
          !o.contains("estimate") || !o["estimate"].is_number() || !o.contains("std_error") ||
          !o["std_error"].is_number()) {
        throw Error(Errc::ValidationError, "each observation needs hypothesis, estimate and std_error");
      }
      const int j = o["hypothesis"].get<int>() - 1;
      if (j < 0 || j >= m) throw Error(Errc::ValidationError, "hypothesis index out of range");
      if (seen.contains(j)) throw Error(Errc::ValidationError, "duplicate observation for H" + std::to_string(j + 1));
      if (!collecting_.contains(j)) {
        throw Error(Errc::NotCollecting, "H" + std::to_string(j + 1) + " no longer collects data");
      }
      seen.insert(j);
      double t = design_.spec.information_fractions[j][next - 1];
      if (o.contains("info_fraction")) {
        if (!o["info_fraction"].is_number()) throw Error(Errc::ValidationError, "'info_fraction' must be a number");
        t = o["info_fraction"].get<double>();
      }
      data.estimates[j].push_back({o["estimate"].get<double>(), o["std_error"].get<double>()});
      data.fractions[j].push_back(t);
    }
    if (seen != collecting_) {
      throw Error(Errc::MissingObservation, "observations missing for " + format_set(collecting_ - seen));
    }
    if (next == design_.stages()) {
      for (int j : collecting_.indices()) data.stopped_after[j] = next - 1;
    }
    validate_data(data, design_);

    AnalysisOptions opts;
    opts.estimators = true;
    const Analysis a = analyze(design_, data, opts);
    auto snapshot = std::make_shared<const json>(json::parse(json_report(design_, a, next)));

    std::unique_lock lock(read_);
    data_ = std::move(data);
    stage_ = next;
    if (next == design_.stages()) collecting_ = IndexSet{};
    snapshots_.push_back(snapshot);
    json out = *snapshot;
    out["session"] = summary_locked();
    return reply(200, out);
  }

  Reply decide(const json& body) {
    if (!body.is_object() || !body.contains("stop") || !body["stop"].is_array()) {
      throw Error(Errc::ValidationError, "body needs a 'stop' array");
    }
    if (stage_ == 0) throw Error(Errc::StageOverrun, "no stage has been conducted yet");
    IndexSet stops;
    for (const auto& x : body["stop"]) {
      if (!x.is_number_integer()) throw Error(Errc::ValidationError, "'stop' holds hypothesis numbers");
      const int j = x.get<int>() - 1;
      if (j < 0 || j >= design_.hypotheses()) throw Error(Errc::ValidationError, "hypothesis index out of range");
      stops.insert(j);
    }
    if (!stops.subset_of(collecting_)) {
      throw Error(Errc::NotCollecting, format_set(stops - collecting_) + " no longer collect data");
    }
    std::unique_lock lock(read_);
    for (int j : stops.indices()) data_.stopped_after[j] = stage_ - 1;
    collecting_ = collecting_ - stops;
    return reply(200, summary_locked());
  }

  Reply bounds(const std::string& stage_arg, const std::string& kind, const std::string& lambda) const {
    std::shared_ptr<const json> snap;
    int stage = 0;
    bool frozen = false;
    {
      std::shared_lock lock(read_);
      if (snapshots_.empty()) return error_reply(404, "NoStage", "no stage has been conducted yet");
      stage = static_cast<int>(snapshots_.size());
      if (!stage_arg.empty()) {
        try {
          stage = std::stoi(stage_arg);
        } catch (const std::exception&) {
          return error_reply(422, "ValidationError", "stage must be a number");
        }
      }
      if (stage < 1) return error_reply(422, "ValidationError", "stage must be at least 1");
      if (stage > static_cast<int>(snapshots_.size())) {
        if (!collecting_.empty()) return error_reply(404, "NoStage", "stage not conducted yet");
        frozen = true;
      }
      snap = snapshots_[std::min<std::size_t>(stage, snapshots_.size()) - 1];
    }
    const std::string k = kind.empty() ? "compatible" : kind;
    const std::string l = lambda.empty() ? "s" : lambda;
    std::string proc;
    if (k == "compatible") {
      proc = l == "r" ? "gsd-r" : l == "s" ? "gsd-s" : l == "c" ? "adjust" : "";
    } else if (k == "informative") {
      proc = l == "r" ? "isci-r" : l == "s" ? "isci-s" : l == "c" ? "isci-adjust" : "";
    }
    if (proc.empty()) return error_reply(422, "ValidationError", "kind must be compatible or informative, lambda r, s or c");
    json out{{"stage", stage}, {"analysis", (*snap)["analysis"]}, {"frozen", frozen}, {"kind", k}, {"lambda", l}};
    for (const auto& p : (*snap)["procedures"]) {
      if (p["procedure"] == proc) {
        out["procedure"] = proc;
        for (const auto& [key, v] : p.items()) {
          if (key != "procedure") out[key] = v;
        }
      }
    }
    if (snap->contains("estimators")) out["estimators"] = (*snap)["estimators"];
    return reply(200, out);
  }

  // Idempotent replays of mutating requests.
  const Reply* replay(const std::string& key) const {
    auto it = replies_.find(key);
    return it == replies_.end() ? nullptr : &it->second;
  }
  void remember(const std::string& key, const Reply& r) {
    if (!key.empty()) replies_[key] = r;
  }

 private:
  json summary_locked() const {
    json s;
    s["session_id"] = id_;
    s["hypotheses"] = design_.spec.hypotheses;
    s["stages"] = design_.stages();
    s["stage"] = stage_;
    s["collecting"] = set_json(collecting_);
    s["finished"] = collecting_.empty() || stage_ >= design_.stages();
    json stopped = json::array();
    for (int j = 0; j < design_.hypotheses(); ++j) {
      stopped.push_back(data_.stopped_after[j] >= 0 ? json(data_.stopped_after[j] + 1) : json(nullptr));
    }
    s["stopped_after"] = stopped;
    return s;
  }

  std::string id_;
  Design design_;
  fs::path log_;
  TrialData data_;
  IndexSet collecting_;
  int stage_ = 0;
  std::vector<std::shared_ptr<const json>> snapshots_;
  std::map<std::string, Reply> replies_;
  std::mutex write_;
  mutable std::shared_mutex read_;
};

MonitorService::MonitorService(ServiceOptions opts) : opts_(std::move(opts)) {
  fs::create_directories(opts_.data_dir);
  load_existing();
}

MonitorService::~MonitorService() = default;

std::size_t MonitorService::sessions() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::shared_ptr<Session> MonitorService::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void MonitorService::load_existing() {
  for (const auto& entry : fs::directory_iterator(opts_.data_dir)) {
    if (entry.path().extension() != ".log") continue;
    const auto records = read_records(entry.path());
    if (records.empty() || records[0].value("type", "") != "create") continue;
    const std::string id = entry.path().stem().string();
    auto session = std::make_shared<Session>(
        id, validate_design(parse_design(records[0]["design"].dump())), entry.path(), opts_.timeout_ms);
    const std::string key = records[0].value("key", "");
    const Reply created = reply(201, session->summary());
    session->remember(key, created);
    if (!key.empty()) creation_keys_[key] = id;
    for (std::size_t i = 1; i < records.size(); ++i) {
      const auto& r = records[i];
      Reply out;
      try {
        out = r["type"] == "stage" ? session->submit(r["body"]) : session->decide(r["body"]);
      } catch (const Error& e) {
        out = from_error(e);
      }
      session->remember(r.value("key", ""), out);
    }
    sessions_[id] = session;
  }
}

Reply MonitorService::create_session(const std::string& body, const std::string& key) {
  std::lock_guard create(create_mutex_);
  if (!key.empty()) {
    std::shared_lock lock(mutex_);
    auto it = creation_keys_.find(key);
    if (it != creation_keys_.end()) return *sessions_.at(it->second)->replay(key);
  }
  try {
    const json doc = parse_body(body);
    const json design_doc = doc.is_object() && doc.contains("design") ? doc["design"] : doc;
    Design design = validate_design(parse_design(design_doc.dump()));
    const std::string id = new_id();
    const fs::path log = fs::path(opts_.data_dir) / (id + ".log");
    append_record(log, json{{"type", "create"}, {"design", json::parse(serialize_design(design.spec))}, {"key", key}});
    auto session = std::make_shared<Session>(id, std::move(design), log, opts_.timeout_ms);
    const Reply r = reply(201, session->summary());
    session->remember(key, r);
    std::unique_lock lock(mutex_);
    sessions_[id] = session;
    if (!key.empty()) creation_keys_[key] = id;
    return r;
  } catch (const Error& e) {
    return error_reply(422, to_string(e.code()), e.what());
  }
}

namespace {

template <class Apply>
Reply mutate(Session& s, const std::string& type, const std::string& body, const std::string& key, Apply&& apply) {
  std::unique_lock guard(s.write_lock(), std::try_to_lock);
  if (!guard.owns_lock()) return error_reply(409, "Busy", "another change to this session is in progress");
  if (!key.empty()) {
    if (const Reply* r = s.replay(key)) return *r;
  }
  json doc;
  try {
    doc = parse_body(body);
  } catch (const Error& e) {
    return error_reply(422, to_string(e.code()), e.what());
  }
  Reply out;
  try {
    out = apply(doc);
  } catch (const Error& e) {
    return from_error(e);
  }
  append_record(s.log(), json{{"type", type}, {"body", doc}, {"key", key}});
  s.remember(key, out);
  return out;
}

}  // namespace

Reply MonitorService::submit_stage(const std::string& id, const std::string& body, const std::string& key) {
  auto s = find(id);
  if (!s) return error_reply(404, "NotFound", "unknown session");
  return mutate(*s, "stage", body, key, [&](const json& doc) { return s->submit(doc); });
}

Reply MonitorService::decide(const std::string& id, const std::string& body, const std::string& key) {
  auto s = find(id);
  if (!s) return error_reply(404, "NotFound", "unknown session");
  return mutate(*s, "decision", body, key, [&](const json& doc) { return s->decide(doc); });
}

Reply MonitorService::bounds(const std::string& id, const std::string& stage, const std::string& kind,
                             const std::string& lambda) {
  auto s = find(id);
  if (!s) return error_reply(404, "NotFound", "unknown session");
  return s->bounds(stage, kind, lambda);
}

Reply MonitorService::state(const std::string& id) {
  auto s = find(id);
  if (!s) return error_reply(404, "NotFound", "unknown session");
  return reply(200, s->summary());
}

void MonitorService::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  auto key_of = [](const httplib::Request& req) { return req.get_header_value("Idempotency-Key"); };

  server.Post("/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body, key_of(req)));
  });
  server.Get(R"(/sessions/([0-9a-f]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, state(req.matches[1]));
  });
  server.Post(R"(/sessions/([0-9a-f]+)/stages)", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, submit_stage(req.matches[1], req.body, key_of(req)));
  });
  server.Post(R"(/sessions/([0-9a-f]+)/decisions)", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, decide(req.matches[1], req.body, key_of(req)));
  });
  server.Get(R"(/sessions/([0-9a-f]+)/bounds)", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, bounds(req.matches[1], req.get_param_value("stage"), req.get_param_value("kind"),
                     req.get_param_value("lambda")));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", "Internal"}, {"message", what}}.dump() + "\n", "application/json");
  });
}

}  // namespace gsci
