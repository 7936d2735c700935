#pragma once

#include <memory>
#include <string>

#include "rulescope/session.hpp"

namespace httplib {
class Server;
}

namespace rulescope {

/// HTTP front end over one Session. Errors are returned as {code, message}.
class Service {
 public:
  explicit Service(Session& session);
  ~Service();

  /// Binds without serving; port 0 picks a free one. Returns the bound port
  /// and throws when the port is taken.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();
  bool running() const;

 private:
  void routes();

  Session& session_;
  std::unique_ptr<httplib::Server> server_;
};

/// Port from RULESCOPE_PORT, or the fallback when unset.
int port_from_env(int fallback = 8080);

}  // namespace rulescope
