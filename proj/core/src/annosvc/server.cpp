#include "httplib.h"

#include "mend/annosvc.hpp"

namespace mend::annosvc {
namespace {

using nlohmann::json;

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  send(res, status, {{"error", kind}, {"message", message}});
}

std::optional<int> int_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  const std::string v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used != v.size()) return std::nullopt;
    return n;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

struct Server::Impl {
  Service& service;
  httplib::Server http;
  int port = -1;

  explicit Impl(Service& s) : service(s) {}

  // Runs `body` for an authenticated caller and maps service errors onto
  // HTTP statuses.
  template <typename F>
  auto guarded(F body) {
    return [this, body](const httplib::Request& req, httplib::Response& res) {
      const auto who = service.authenticate(req.get_header_value("X-Annotator-Token"));
      if (!who) return send_error(res, 401, "unauthorized", "missing or unknown X-Annotator-Token");
      try {
        body(*who, req, res);
      } catch (const DuplicateAnnotation& e) {
        send(res, 409, {{"error", "duplicate"}, {"message", e.what()}, {"existing", to_json(e.existing())}});
      } catch (const UnknownRecord& e) {
        send_error(res, 404, "unknown_record", e.what());
      } catch (const UnknownAnnotator& e) {
        send_error(res, 404, "unknown_annotator", e.what());
      } catch (const RoundClosed& e) {
        send_error(res, 409, "round_closed", e.what());
      } catch (const NoOverlap& e) {
        send_error(res, 422, "no_overlap", e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, "invalid", e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "invalid", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    http.Get("/api/tasks/next", guarded([this](const std::string& who, const auto& req, auto& res) {
               const std::string annotator = req.has_param("annotator") ? req.get_param_value("annotator") : who;
               if (annotator != who) return send_error(res, 403, "forbidden", "token does not belong to " + annotator);
               const auto round = int_param(req, "round");
               if (!round) return send_error(res, 400, "invalid", "round query parameter required");
               auto task = service.next_task(annotator, *round);
               if (!task) return send(res, 200, {{"done", true}, {"round", *round}});
               json body = to_json(*task);
               body["done"] = false;
               send(res, 200, body);
             }));

    http.Post("/api/annotations", guarded([this](const std::string& who, const auto& req, auto& res) {
                json body = json::parse(req.body);
                if (!body.contains("annotator_id")) body["annotator_id"] = who;
                Annotation a = annotation_from_json(body);
                if (a.annotator_id != who) {
                  return send_error(res, 403, "forbidden", "token does not belong to " + a.annotator_id);
                }
                send(res, 201, to_json(service.submit(std::move(a))));
              }));

    http.Get("/api/agreement", guarded([this](const std::string&, const auto& req, auto& res) {
               const auto round = int_param(req, "round");
               if (!round) return send_error(res, 400, "invalid", "round query parameter required");
               send(res, 200, to_json(service.agreement(*round)));
             }));

    http.Get("/api/progress", guarded([this](const std::string&, const auto&, auto& res) {
               send(res, 200, service.progress());
             }));

    http.Get(R"(/api/records/(.+))", guarded([this](const std::string&, const auto& req, auto& res) {
               send(res, 200, service.record_view(req.matches[1].str()));
             }));

    http.Post(R"(/api/rounds/(\d+)/close)", guarded([this](const std::string&, const auto& req, auto& res) {
                std::string codebook;
                if (!req.body.empty()) codebook = json::parse(req.body).value("codebook", std::string());
                const Round closed = service.close_round(std::stoi(req.matches[1].str()), codebook);
                const auto rounds = service.rounds();
                send(res, 200,
                     {{"round", closed.number},
                      {"gate_passed", closed.gate_passed ? json(*closed.gate_passed) : json(nullptr)},
                      {"next_round", rounds.back().number == closed.number ? json(nullptr) : json(rounds.back().number)},
                      {"next_kind", rounds.back().number == closed.number ? json(nullptr)
                                                                         : json(to_string(rounds.back().kind))}});
              }));
  }
};

Server::Server(Service& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  impl_->routes();
  if (static_dir && !impl_->http.set_mount_point("/", static_dir->string())) {
    throw AnnoError("static directory not found: " + static_dir->string());
  }
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->port = impl_->http.bind_to_any_port(host);
  } else {
    impl_->port = impl_->http.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port < 0) throw AnnoError("cannot bind " + host + ":" + std::to_string(port));
  return impl_->port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace mend::annosvc
