#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "cbmrag/error.hpp"
#include "cbmrag/service/service.hpp"

namespace httplib {
class Server;
}

namespace cbmrag::service {

// HTTP status for a library error code. Unlisted codes map to 500.
int http_status(Errc code) noexcept;

// {"code": ..., "message": ...}
nlohmann::json error_body(const std::string& code, const std::string& message);

// Guesses a media type from a file name when the client sent none.
std::string media_type_from_filename(const std::string& filename);

// REST front end over a Service. Requests for distinct sessions are handled
// on a worker pool concurrently.
class HttpServer {
 public:
  explicit HttpServer(Service& service, bool log_requests = false);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port.
  // Errors: io_failure when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Blocks until stop(). In-flight requests finish before it returns.
  void serve();
  void stop();
  bool is_running() const;

 private:
  void install_routes();

  Service& service_;
  std::unique_ptr<httplib::Server> server_;
  bool log_requests_;
};

}  // namespace cbmrag::service
