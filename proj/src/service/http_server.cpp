#include "cbmrag/service/http_server.hpp"

#include <charconv>
#include <cstdio>
#include <iostream>

#include <httplib.h>

#include "cbmrag/util.hpp"

namespace cbmrag::service {

namespace {

constexpr std::size_t kMaxPayloadBytes = 64u << 20;

struct InvalidRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  send_json(res, status, error_body(code, message));
}

// Runs a handler and turns exceptions into {"code","message"} responses.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
  } catch (const InvalidRequest& e) {
    send_error(res, 400, "invalid_request", e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "invalid_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal_error", e.what());
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  auto body = nlohmann::json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw InvalidRequest("request body must be a JSON object");
  }
  return body;
}

std::size_t size_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return kDefaultHeatmapSide;
  const auto text = req.get_param_value(name);
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw Error(Errc::invalid_argument, std::string("query parameter '") + name +
                                            "' must be a positive integer");
  }
  return value;
}

const httplib::MultipartFormData& require_file(const httplib::Request& req) {
  if (!req.is_multipart_form_data() || !req.has_file("file")) {
    throw Error(Errc::invalid_argument, "expected multipart/form-data with a 'file' field");
  }
  // get_file_value returns by value; keep the entry in the request.
  return req.files.find("file")->second;
}

std::string upload_media_type(const httplib::MultipartFormData& file) {
  const auto base = util::trim(file.content_type.substr(0, file.content_type.find(';')));
  if (base.empty() || base == "application/octet-stream") {
    return media_type_from_filename(file.filename);
  }
  return file.content_type;
}

std::span<const std::uint8_t> bytes_of(const std::string& s) { return util::as_bytes(s); }

}  // namespace

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::unknown_session:
    case Errc::unknown_concept:
      return 404;
    case Errc::no_analysis:
    case Errc::duplicate_document:
      return 409;
    case Errc::unsupported_media_type:
      return 415;
    case Errc::invalid_argument:
    case Errc::empty_input:
    case Errc::score_out_of_range:
    case Errc::invalid_encoding:
    case Errc::invalid_chunk_params:
    case Errc::out_of_range:
      return 422;
    case Errc::remote_unavailable:
    case Errc::malformed_response:
    case Errc::dimension_mismatch:
    case Errc::script_exhausted:
    case Errc::parse_failure:
    case Errc::malformed_report:
      return 502;
    default:
      return 500;
  }
}

nlohmann::json error_body(const std::string& code, const std::string& message) {
  return {{"code", code}, {"message", message}};
}

std::string media_type_from_filename(const std::string& filename) {
  const auto dot = filename.rfind('.');
  if (dot == std::string::npos) return "application/octet-stream";
  std::string ext = filename.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "png") return "image/png";
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "txt") return "text/plain";
  if (ext == "md" || ext == "markdown") return "text/markdown";
  if (ext == "mp3") return "audio/mpeg";
  if (ext == "mp4") return "video/mp4";
  return "application/octet-stream";
}

HttpServer::HttpServer(Service& service, bool log_requests)
    : service_(service), server_(std::make_unique<httplib::Server>()), log_requests_(log_requests) {
  server_->set_payload_max_length(kMaxPayloadBytes);
  // httplib's default adds SO_REUSEPORT, which lets a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  install_routes();
}

HttpServer::~HttpServer() {
  if (server_->is_running()) server_->stop();
}

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound <= 0) throw Error(Errc::io_failure, "cannot bind " + host + " on any port");
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(Errc::io_failure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::serve() { server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

bool HttpServer::is_running() const { return server_->is_running(); }

void HttpServer::install_routes() {
  auto& svr = *server_;
  Service& service = service_;

  if (log_requests_) {
    svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      std::fprintf(stderr, "%s %s -> %d\n", req.method.c_str(), req.path.c_str(), res.status);
    });
  }

  svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  svr.Post("/v1/sessions", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, service.create_session()); });
  });

  svr.Get(R"(/v1/sessions/([^/]+))", [&service](const httplib::Request& req,
                                                 httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.get_session(req.matches[1])); });
  });

  svr.Post(R"(/v1/sessions/([^/]+)/image)", [&service](const httplib::Request& req,
                                                       httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      service.get_session(id);  // 404 before multipart validation
      const auto& file = require_file(req);
      send_json(res, 200, service.analyze_image(id, bytes_of(file.content), upload_media_type(file)));
    });
  });

  svr.Get(R"(/v1/sessions/([^/]+)/heatmaps/([^/]+))", [&service](const httplib::Request& req,
                                                                  httplib::Response& res) {
    guarded(res, [&] {
      const auto png = service.heatmap_png(req.matches[1], req.matches[2], size_param(req, "w"),
                                           size_param(req, "h"));
      res.status = 200;
      res.set_content(png, "image/png");
    });
  });

  svr.Patch(R"(/v1/sessions/([^/]+)/concepts)", [&service](const httplib::Request& req,
                                                           httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      const auto& raw = body.at("overrides");
      if (!raw.is_object()) throw Error(Errc::invalid_argument, "'overrides' must be an object");
      std::map<std::string, double> overrides;
      for (const auto& [key, value] : raw.items()) {
        if (!value.is_number()) {
          throw Error(Errc::invalid_argument, "override for '" + key + "' must be a number");
        }
        overrides[key] = value.get<double>();
      }
      send_json(res, 200, service.update_concepts(req.matches[1], overrides));
    });
  });

  svr.Post(R"(/v1/sessions/([^/]+)/uploads)", [&service](const httplib::Request& req,
                                                         httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      service.get_session(id);
      const auto& file = require_file(req);
      std::string doc_id = file.filename;
      if (req.has_file("doc_id")) doc_id = req.get_file_value("doc_id").content;
      send_json(res, 201,
                service.ingest_upload(id, bytes_of(file.content), upload_media_type(file), doc_id));
    });
  });

  svr.Post(R"(/v1/sessions/([^/]+)/report)", [&service](const httplib::Request& req,
                                                        httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.generate_report(req.matches[1])); });
  });

  svr.Post(R"(/v1/sessions/([^/]+)/chat)", [&service](const httplib::Request& req,
                                                      httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      service.get_session(id);
      const auto body = parse_body(req);
      const auto& message = body.at("message");
      if (!message.is_string()) throw Error(Errc::invalid_argument, "'message' must be a string");
      send_json(res, 200, service.chat_message(id, message.get<std::string>()));
    });
  });

  svr.Get(R"(/v1/sessions/([^/]+)/debug/chat_prompt)", [&service](const httplib::Request& req,
                                                                   httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.last_chat_prompt(req.matches[1])); });
  });

  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    send_error(res, res.status, res.status == 404 ? "not_found" : "invalid_request",
               "no route for this request");
  });
}

}  // namespace cbmrag::service
