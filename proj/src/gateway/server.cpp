#include <httplib.h>

#include <atomic>
#include <chrono>

#include "sankofa/gateway/gateway.hpp"

namespace sankofa::gateway {

namespace {

constexpr auto kStreamPoll = std::chrono::milliseconds(100);

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
  send_json(res, http_status(code), {{"error", std::string(to_string(code))}, {"message", message}});
}

std::string bearer(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  if (header.rfind("Bearer ", 0) == 0) return header.substr(7);
  // EventSource cannot set headers.
  if (req.has_param("token")) return req.get_param_value("token");
  return {};
}

Json parse_body(const httplib::Request& req) {
  try {
    auto j = Json::parse(req.body);
    if (!j.is_object()) throw Error(Errc::ParseError, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("bad JSON body: ") + e.what());
  }
}

Json item_json(const ItemPayload& p) {
  return {{"item_id", p.item_id}, {"prompt_ref", p.prompt_ref}, {"prompt", p.prompt}};
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const Json::exception& e) {
      send_error(res, Errc::ParseError, e.what());
    } catch (const std::exception& e) {
      send_error(res, Errc::InvalidArgument, e.what());
    }
  };
}

}  // namespace

struct Server::Impl {
  httplib::Server http;
  std::atomic<int> open_streams{0};
};

Server::Server(Gateway& gateway) : gateway_(gateway), impl_(std::make_unique<Impl>()) {
  auto& http = impl_->http;
  Gateway& gw = gateway_;
  Impl* impl = impl_.get();
  // SO_REUSEADDR only; the library default also sets SO_REUSEPORT.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  http.Post("/api/login", guarded([&gw](const httplib::Request& req, httplib::Response& res) {
              const auto body = parse_body(req);
              const auto s = gw.login(body.value("role", ""), body.value("secret", ""));
              send_json(res, 200,
                        {{"token", s.token},
                         {"role", std::string(to_string(s.role))},
                         {"expires_in_s", static_cast<double>(gw.config().token_ttl) / 1e9}});
            }));

  http.Post("/api/lessons", guarded([&gw](const httplib::Request& req, httplib::Response& res) {
              const auto token = bearer(req);
              gw.authorize(token, ApiRole::Teacher);
              const auto body = parse_body(req);
              agent::LessonRequest r;
              r.language = body.at("language").get<std::string>();
              r.subject = body.value("subject", "");
              r.grade = body.at("grade").get<int>();
              r.max_tokens = body.value("max_tokens", std::size_t{256});
              r.seed = body.value("seed", std::uint64_t{0});
              if (body.contains("backend")) r.backend = body.at("backend").get<std::string>();
              send_json(res, 202, {{"lesson_id", gw.start_lesson(token, r)}});
            }));

  http.Get(R"(/api/lessons/([^/]+)/stream)",
           guarded([&gw, impl](const httplib::Request& req, httplib::Response& res) {
             auto stream = gw.stream_lesson(bearer(req), req.matches[1]);
             std::size_t next = 0;
             if (req.has_param("from")) next = std::stoul(req.get_param_value("from"));
             ++impl->open_streams;
             res.set_header("Cache-Control", "no-cache");
             res.set_chunked_content_provider(
                 "text/event-stream",
                 [stream, next](std::size_t, httplib::DataSink& sink) mutable {
                   for (const auto& f : stream->read(next, kStreamPoll)) {
                     const auto text = format_sse(f);
                     if (!sink.write(text.data(), text.size())) return false;
                     next = f.index + 1;
                     if (f.event != FrameEvent::Token) {
                       sink.done();
                       return true;
                     }
                   }
                   return sink.is_writable();
                 },
                 [impl](bool) { --impl->open_streams; });
           }));

  http.Post("/api/assessments", guarded([&gw](const httplib::Request& req, httplib::Response& res) {
              const auto body = parse_body(req);
              const auto start = gw.start_assessment(bearer(req), body.at("lesson_id").get<std::string>());
              send_json(res, 201, {{"session_id", start.session_id}, {"item", item_json(start.item)}});
            }));

  http.Post(R"(/api/assessments/([^/]+)/answers)",
            guarded([&gw](const httplib::Request& req, httplib::Response& res) {
              const auto body = parse_body(req);
              const auto r = gw.submit_answer(bearer(req), req.matches[1], body.at("item_id").get<int>(),
                                              body.at("correct").get<bool>());
              Json out{{"done", r.done}, {"theta", r.theta}, {"se", r.se}, {"items_used", r.items_used}};
              if (r.next) out["item"] = item_json(*r.next);
              if (r.done) out["stop_reason"] = std::string(irt::to_string(r.stop));
              send_json(res, 200, out);
            }));

  http.Get("/api/reports/benchmark", guarded([&gw](const httplib::Request& req, httplib::Response& res) {
             res.set_content(gw.benchmark_report(bearer(req)), "text/plain; charset=utf-8");
           }));

  http.Get("/api/health",
           guarded([&gw](const httplib::Request&, httplib::Response& res) { send_json(res, 200, gw.health()); }));
}

Server::~Server() { stop(); }

int Server::bind() {
  const auto& cfg = gateway_.config();
  if (cfg.bind_port == 0) {
    port_ = impl_->http.bind_to_any_port(cfg.bind_host);
    if (port_ < 0) port_ = 0;
  } else if (impl_->http.bind_to_port(cfg.bind_host, cfg.bind_port)) {
    port_ = cfg.bind_port;
  }
  if (port_ == 0) {
    throw Error(Errc::BindFailed, "cannot bind " + cfg.bind_host + ":" + std::to_string(cfg.bind_port));
  }
  return port_;
}

void Server::start() {
  thread_ = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::stop() {
  gateway_.shutdown();
  const auto give_up = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  while (impl_->open_streams.load() > 0 && std::chrono::steady_clock::now() < give_up) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  impl_->http.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace sankofa::gateway
