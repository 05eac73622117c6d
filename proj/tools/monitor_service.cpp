#include <iostream>

#include "CLI11.hpp"
#include "gsci/service.hpp"
#include "httplib.h"

int main(int argc, char** argv) {
  CLI::App app{"Monitoring service for group sequential graphical trials"};
  int port = 8080;
  std::string host = "127.0.0.1";
  gsci::ServiceOptions opts;
  app.add_option("--port", port, "Listening port")->envname("GSCI_PORT");
  app.add_option("--host", host, "Listening address")->envname("GSCI_HOST");
  app.add_option("--data-dir", opts.data_dir, "Directory of session logs")->envname("GSCI_DATA_DIR");
  app.add_option("--timeout-ms", opts.timeout_ms, "Time budget per bound computation")->envname("GSCI_TIMEOUT_MS");
  CLI11_PARSE(app, argc, argv);

  try {
    gsci::MonitorService service(opts);
    httplib::Server server;
    service.mount(server);
    std::cerr << "listening on " << host << ":" << port << " with " << service.sessions() << " stored sessions\n";
    if (!server.listen(host, port)) {
      std::cerr << "cannot listen on " << host << ":" << port << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
