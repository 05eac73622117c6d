#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace gsci {

struct ServiceOptions {
  std::string data_dir = "gsci-sessions";
  int timeout_ms = 10000;  // per bracket computation
};

struct Reply {
  int status = 200;
  std::string body;  // JSON
};

class Session;

// Monitoring sessions with an append-only log per session.
class MonitorService {
 public:
  explicit MonitorService(ServiceOptions opts);
  ~MonitorService();

  // Registers the HTTP routes.
  void mount(httplib::Server& server);

  // Transport independent entry points, bodies are JSON text.
  Reply create_session(const std::string& body, const std::string& idempotency_key);
  Reply submit_stage(const std::string& id, const std::string& body, const std::string& idempotency_key);
  Reply decide(const std::string& id, const std::string& body, const std::string& idempotency_key);
  Reply bounds(const std::string& id, const std::string& stage, const std::string& kind, const std::string& lambda);
  Reply state(const std::string& id);

  std::size_t sessions() const;

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  void load_existing();

  ServiceOptions opts_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::string> creation_keys_;  // idempotency key -> session id
  std::mutex create_mutex_;
};

}  // namespace gsci
