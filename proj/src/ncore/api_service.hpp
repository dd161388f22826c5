#pragma once

#include <string>

#include <httplib.h>

#include "ncore/service.hpp"

namespace ncore {

// HTTP front: binds every endpoint (object API, search, feeds, OAI,
// replication, status) onto one httplib server over a Service.
class HttpFront {
 public:
  explicit HttpFront(Service& svc);

  // Blocking; returns false on bind failure.
  bool listen(const std::string& host, int port);

  // Two-step variant for tests and port-0 setups.
  int bind_any_port(const std::string& host);
  bool serve_after_bind();

  void stop();
  bool is_running() const { return srv_.is_running(); }
  httplib::Server& server() { return srv_; }

 private:
  void install();

  Service& svc_;
  httplib::Server srv_;
};

}  // namespace ncore
