#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sankofa/agent/runtime.hpp"
#include "sankofa/common/config.hpp"
#include "sankofa/irt/irt.hpp"
#include "sankofa/metrics/metrics.hpp"

namespace sankofa::gateway {

using Json = nlohmann::json;

enum class ApiRole { Teacher, Learner };
std::string_view to_string(ApiRole r);

struct ApiSession {
  std::string token;
  ApiRole role = ApiRole::Learner;
  Nanos created_at = 0;
};

enum class FrameEvent { Token, Done, Error };
std::string_view to_string(FrameEvent e);

struct StreamFrame {
  FrameEvent event = FrameEvent::Token;
  std::size_t index = 0;
  /// Token text, or the error message for an Error frame.
  std::string text;
  /// First Token frame only.
  std::optional<double> ttft_ms;
  /// Done frames.
  std::string finish_reason;
  std::optional<metrics::LatencyMetrics> metrics;
  /// Error frames.
  std::string code;
  std::string stage;
};

/// `data:` payload of a frame.
Json frame_json(const StreamFrame& f);
/// `event: <kind>\ndata: <json>\n\n`
std::string format_sse(const StreamFrame& f);

/// Token history of one lesson. Frames are appended once and never change, so a reader can
/// start at any index.
class LessonStream {
 public:
  void append(StreamFrame f);
  /// Appends a terminal frame unless one is already present. Returns whether it did.
  bool finish(StreamFrame f);
  /// Frames from `from` on, waiting up to `timeout` when none are available yet.
  std::vector<StreamFrame> read(std::size_t from, std::chrono::nanoseconds timeout) const;
  bool terminated() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::vector<StreamFrame> frames_;
  bool terminated_ = false;
};

struct GatewayConfig {
  /// Role table: login secret per role. An empty secret disables that role.
  std::string teacher_secret;
  std::string learner_secret;
  Nanos token_ttl = seconds(8 * 3600);
  std::string bind_host = "127.0.0.1";
  int bind_port = 8080;
  /// Machine-format benchmark report served by get_benchmark_report, re-read on each call.
  std::optional<std::filesystem::path> report_file;
  std::string version = "0.0.0";
};

/// `[auth] teacher, learner, token_ttl_s`, `[server] bind = host:port, report`.
/// Throws Error{InvalidArgument}.
GatewayConfig gateway_config_from(const Config& config, const std::filesystem::path& base_dir = {});

struct ItemPayload {
  int item_id = 0;
  std::string prompt_ref;
  std::string prompt;
};

struct AssessmentStart {
  std::string session_id;
  ItemPayload item;
};

struct AnswerResult {
  bool done = false;
  std::optional<ItemPayload> next;
  double theta = 0;
  double se = 0;
  std::size_t items_used = 0;
  irt::StopReason stop = irt::StopReason::None;
};

/// Transport-independent gateway over an agent runtime. All methods are thread-safe; steps of
/// one assessment session are serialized.
class Gateway {
 public:
  /// The runtime runs in threaded mode regardless of `runtime_config.mode`.
  Gateway(agent::RuntimeResources resources, agent::RuntimeConfig runtime_config, GatewayConfig config,
          Clock& clock = SteadyClock::instance());
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Throws Error{Unauthorized} for an unknown role or wrong secret.
  ApiSession login(std::string_view role, std::string_view secret);
  /// Throws Error{Unauthorized} for an unknown or expired token, or a role below `required`.
  ApiSession authorize(std::string_view token, std::optional<ApiRole> required) const;

  /// Teacher only. Throws Error{Unauthorized}, Error{UnknownLanguage}, Error{InvalidGrade}.
  std::string start_lesson(std::string_view token, const agent::LessonRequest& request);
  /// Teacher only. Throws Error{Unauthorized}, Error{UnknownLesson}.
  std::shared_ptr<const LessonStream> stream_lesson(std::string_view token, const std::string& lesson_id) const;
  /// Blocks until the lesson settles. Throws Error{UnknownLesson}.
  void wait_lesson(const std::string& lesson_id) const;

  /// Any role. First item is selected at theta = 0.
  /// Throws Error{Unauthorized}, Error{UnknownLesson}, Error{LessonNotReady}.
  AssessmentStart start_assessment(std::string_view token, const std::string& lesson_id);
  /// Any role. Throws Error{Unauthorized}, Error{UnknownSession}, Error{SessionStopped},
  /// Error{WrongItem}.
  AnswerResult submit_answer(std::string_view token, const std::string& session_id, int item_id, bool correct);
  std::vector<irt::TranscriptEntry> transcript(const std::string& session_id) const;

  /// Stores render_report(report, Machine) as the current snapshot.
  void publish_benchmark(const metrics::BenchmarkReport& report);
  /// Teacher only. Throws Error{Unauthorized}, Error{NoReportYet}.
  std::string benchmark_report(std::string_view token) const;

  Json health() const;

  /// Appends an Error frame to every unterminated stream and stops the runtime.
  void shutdown();
  bool stopped() const { return stopped_.load(); }

  const GatewayConfig& config() const { return config_; }
  agent::Runtime& runtime() { return *runtime_; }

 private:
  struct Lesson {
    agent::TaskId root = 0;
    std::shared_ptr<LessonStream> stream;
    bool first_token_seen = false;
    std::optional<agent::LessonPackage> package;
    std::shared_future<agent::LessonPackage> result;
  };
  struct Session {
    std::mutex mutex;
    std::unique_ptr<irt::AdaptiveSession> cat;
  };

  void on_token(agent::TaskId root, const content::TokenEvent& e, Nanos dispatched_at);
  void watch(std::string lesson_id);
  std::shared_ptr<Lesson> lesson(const std::string& id) const;
  ItemPayload item_payload(const irt::AdaptiveSession& s, int item_id) const;

  GatewayConfig config_;
  Clock& clock_;
  Nanos started_at_;
  std::map<std::string, std::string> prompts_;
  std::unique_ptr<agent::Runtime> runtime_;

  mutable std::mutex mutex_;
  std::map<std::string, ApiSession> tokens_;
  std::map<std::string, std::shared_ptr<Lesson>> lessons_;
  std::map<agent::TaskId, std::shared_ptr<Lesson>> by_root_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::vector<std::thread> watchers_;
  std::uint64_t next_session_ = 1;
  std::shared_ptr<const std::string> report_;
  std::atomic<bool> stopped_{false};
};

/// HTTP transport: JSON request/response endpoints plus event-stream lesson streams.
class Server {
 public:
  explicit Server(Gateway& gateway);
  ~Server();

  /// Binds config().bind_host:bind_port (port 0 picks a free port). Throws Error{BindFailed}.
  int bind();
  /// Serves on a background thread until stop().
  void start();
  /// Terminates open streams with an Error frame, lets them flush, then closes the listener.
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  Gateway& gateway_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

/// Status code for an error returned by an endpoint.
int http_status(Errc code);

}  // namespace sankofa::gateway
