#include "sankofa/gateway/gateway.hpp"

#include <fmt/format.h>

#include <random>

#include "sankofa/common/text.hpp"

namespace sankofa::gateway {

std::string_view to_string(ApiRole r) { return r == ApiRole::Teacher ? "teacher" : "learner"; }

std::string_view to_string(FrameEvent e) {
  switch (e) {
    case FrameEvent::Token: return "token";
    case FrameEvent::Done: return "done";
    case FrameEvent::Error: return "error";
  }
  return "error";
}

Json frame_json(const StreamFrame& f) {
  Json j{{"index", f.index}};
  switch (f.event) {
    case FrameEvent::Token:
      j["text"] = f.text;
      if (f.ttft_ms) j["ttft_ms"] = *f.ttft_ms;
      break;
    case FrameEvent::Done:
      j["finish_reason"] = f.finish_reason;
      if (f.metrics) {
        const auto& m = *f.metrics;
        j["metrics"] = {{"ttft_ms", m.ttft_ms},
                        {"itl_ms", {{"mean", m.itl_ms.mean}, {"p50", m.itl_ms.p50}, {"p95", m.itl_ms.p95}}},
                        {"throughput_tps", m.throughput_tps},
                        {"token_count", m.token_count}};
      }
      break;
    case FrameEvent::Error:
      j["code"] = f.code;
      j["stage"] = f.stage;
      j["message"] = f.text;
      break;
  }
  return j;
}

std::string format_sse(const StreamFrame& f) {
  return fmt::format("event: {}\ndata: {}\n\n", to_string(f.event), frame_json(f).dump());
}

void LessonStream::append(StreamFrame f) {
  {
    std::lock_guard lock(mutex_);
    if (terminated_) return;
    f.index = frames_.size();
    frames_.push_back(std::move(f));
  }
  changed_.notify_all();
}

bool LessonStream::finish(StreamFrame f) {
  {
    std::lock_guard lock(mutex_);
    if (terminated_) return false;
    f.index = frames_.size();
    frames_.push_back(std::move(f));
    terminated_ = true;
  }
  changed_.notify_all();
  return true;
}

std::vector<StreamFrame> LessonStream::read(std::size_t from, std::chrono::nanoseconds timeout) const {
  std::unique_lock lock(mutex_);
  changed_.wait_for(lock, timeout, [&] { return frames_.size() > from || terminated_; });
  if (from >= frames_.size()) return {};
  return {frames_.begin() + static_cast<std::ptrdiff_t>(from), frames_.end()};
}

bool LessonStream::terminated() const {
  std::lock_guard lock(mutex_);
  return terminated_;
}

std::size_t LessonStream::size() const {
  std::lock_guard lock(mutex_);
  return frames_.size();
}

GatewayConfig gateway_config_from(const Config& config, const std::filesystem::path& base_dir) {
  GatewayConfig g;
  g.teacher_secret = config.get_or("auth", "teacher", "");
  g.learner_secret = config.get_or("auth", "learner", "");
  const double ttl = config.get_double("auth", "token_ttl_s", 8 * 3600.0);
  if (!(ttl > 0)) throw Error(Errc::InvalidArgument, "[auth] token_ttl_s must be positive");
  g.token_ttl = static_cast<Nanos>(ttl * 1e9);
  if (auto bind = config.get("server", "bind")) {
    const auto colon = bind->rfind(':');
    if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "[server] bind must be host:port");
    g.bind_host = bind->substr(0, colon);
    try {
      std::size_t used = 0;
      g.bind_port = std::stoi(bind->substr(colon + 1), &used);
      if (used != bind->size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "[server] bind port is not a number: " + *bind);
    }
    if (g.bind_port < 0 || g.bind_port > 65535 || g.bind_host.empty()) {
      throw Error(Errc::InvalidArgument, "[server] bind out of range: " + *bind);
    }
  }
  if (auto report = config.get("server", "report")) g.report_file = base_dir / *report;
  return g;
}

namespace {

std::string random_token() {
  std::random_device rd;
  std::string out;
  for (int i = 0; i < 4; ++i) out += fmt::format("{:08x}", static_cast<std::uint32_t>(rd()));
  return out;
}

}  // namespace

Gateway::Gateway(agent::RuntimeResources resources, agent::RuntimeConfig runtime_config, GatewayConfig config,
                 Clock& clock)
    : config_(std::move(config)), clock_(clock), started_at_(clock.now()) {
  for (const auto& t : resources.template_bank) prompts_[t.template_id] = t.prompt;
  runtime_config.mode = agent::RunMode::Threaded;
  runtime_ = std::make_unique<agent::Runtime>(std::move(resources), std::move(runtime_config), clock_);
  runtime_->set_stream_observer(
      [this](agent::TaskId root, const content::TokenEvent& e, Nanos dispatched) { on_token(root, e, dispatched); });
  runtime_->start();
}

Gateway::~Gateway() { shutdown(); }

ApiSession Gateway::login(std::string_view role, std::string_view secret) {
  ApiSession s;
  if (role == "teacher" && !config_.teacher_secret.empty() && secret == config_.teacher_secret) {
    s.role = ApiRole::Teacher;
  } else if (role == "learner" && !config_.learner_secret.empty() && secret == config_.learner_secret) {
    s.role = ApiRole::Learner;
  } else {
    throw Error(Errc::Unauthorized, "bad role or secret");
  }
  s.created_at = clock_.now();
  std::lock_guard lock(mutex_);
  do {
    s.token = random_token();
  } while (tokens_.count(s.token));
  tokens_[s.token] = s;
  return s;
}

ApiSession Gateway::authorize(std::string_view token, std::optional<ApiRole> required) const {
  std::lock_guard lock(mutex_);
  auto it = tokens_.find(std::string(token));
  if (it == tokens_.end()) throw Error(Errc::Unauthorized, "unknown session token");
  if (clock_.now() - it->second.created_at > config_.token_ttl) throw Error(Errc::Unauthorized, "session token expired");
  if (required && it->second.role != *required) {
    throw Error(Errc::Unauthorized, fmt::format("{} role required", to_string(*required)));
  }
  return it->second;
}

std::string Gateway::start_lesson(std::string_view token, const agent::LessonRequest& request) {
  authorize(token, ApiRole::Teacher);
  if (stopped_) throw Error(Errc::QueueClosed, "gateway shutting down");
  auto entry = std::make_shared<Lesson>();
  entry->stream = std::make_shared<LessonStream>();
  std::string id;
  {
    // Held across submission so the first token cannot arrive before the lesson is indexed.
    std::lock_guard lock(mutex_);
    entry->root = runtime_->submit_request(request);
    entry->result = runtime_->result(entry->root);
    id = fmt::format("lesson-{}", entry->root);
    lessons_[id] = entry;
    by_root_[entry->root] = entry;
    watchers_.emplace_back([this, id] { watch(id); });
  }
  return id;
}

void Gateway::on_token(agent::TaskId root, const content::TokenEvent& e, Nanos dispatched_at) {
  std::shared_ptr<Lesson> entry;
  {
    std::lock_guard lock(mutex_);
    auto it = by_root_.find(root);
    if (it == by_root_.end()) return;
    entry = it->second;
  }
  StreamFrame f;
  f.event = FrameEvent::Token;
  f.text = e.text;
  if (e.index == 0) f.ttft_ms = static_cast<double>(e.arrived_at - dispatched_at) / 1e6;
  entry->stream->append(std::move(f));
}

void Gateway::watch(std::string lesson_id) {
  auto entry = lesson(lesson_id);
  StreamFrame f;
  try {
    auto package = entry->result.get();
    f.event = FrameEvent::Done;
    f.finish_reason = std::string(content::to_string(package.content.finish_reason));
    f.metrics = metrics::compute_metrics(metrics::record_trace(package.content));
    {
      std::lock_guard lock(mutex_);
      entry->package = std::move(package);
    }
  } catch (const agent::StageError& e) {
    f.event = FrameEvent::Error;
    f.code = std::string(sankofa::to_string(e.code()));
    f.stage = std::string(agent::to_string(e.stage()));
    f.text = e.what();
  } catch (const Error& e) {
    f.event = FrameEvent::Error;
    f.code = std::string(sankofa::to_string(e.code()));
    f.text = e.what();
  } catch (const std::exception& e) {
    f.event = FrameEvent::Error;
    f.code = "StageFailed";
    f.text = e.what();
  }
  entry->stream->finish(std::move(f));
}

std::shared_ptr<Gateway::Lesson> Gateway::lesson(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = lessons_.find(id);
  if (it == lessons_.end()) throw Error(Errc::UnknownLesson, "no lesson " + id);
  return it->second;
}

std::shared_ptr<const LessonStream> Gateway::stream_lesson(std::string_view token, const std::string& lesson_id) const {
  authorize(token, ApiRole::Teacher);
  return lesson(lesson_id)->stream;
}

void Gateway::wait_lesson(const std::string& lesson_id) const {
  auto entry = lesson(lesson_id);
  entry->result.wait();
  while (!entry->stream->terminated()) entry->stream->read(entry->stream->size(), std::chrono::milliseconds(50));
}

ItemPayload Gateway::item_payload(const irt::AdaptiveSession& s, int item_id) const {
  ItemPayload p;
  p.item_id = item_id;
  p.prompt_ref = s.item(item_id).prompt_ref;
  if (auto it = prompts_.find(p.prompt_ref); it != prompts_.end()) p.prompt = it->second;
  return p;
}

AssessmentStart Gateway::start_assessment(std::string_view token, const std::string& lesson_id) {
  authorize(token, std::nullopt);
  auto entry = lesson(lesson_id);
  std::vector<irt::ItemParams> pool;
  irt::StopRule rule;
  irt::Method method = irt::Method::EAP;
  {
    std::lock_guard lock(mutex_);
    if (!entry->package || entry->package->assessment.pool.empty()) {
      throw Error(Errc::LessonNotReady, lesson_id + " has no assessment yet");
    }
    pool = entry->package->assessment.pool;
    rule = entry->package->assessment.stop_rule;
    method = entry->package->assessment.method;
  }
  auto session = std::make_shared<Session>();
  AssessmentStart start;
  {
    std::lock_guard lock(mutex_);
    start.session_id = fmt::format("session-{}", next_session_++);
    session->cat = std::make_unique<irt::AdaptiveSession>(start.session_id, std::move(pool), rule, method);
    sessions_[start.session_id] = session;
  }
  std::lock_guard lock(session->mutex);
  start.item = item_payload(*session->cat, session->cat->begin());
  return start;
}

AnswerResult Gateway::submit_answer(std::string_view token, const std::string& session_id, int item_id,
                                    bool correct) {
  authorize(token, std::nullopt);
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(Errc::UnknownSession, "no session " + session_id);
    session = it->second;
  }
  std::lock_guard lock(session->mutex);
  auto& cat = *session->cat;
  if (cat.stopped()) throw Error(Errc::SessionStopped, session_id + " has stopped");
  if (cat.pending_item() != item_id) {
    throw Error(Errc::WrongItem,
                fmt::format("item {} is not pending (pending {})", item_id, cat.pending_item().value_or(0)));
  }
  const auto outcome = cat.step(correct);
  AnswerResult r;
  r.theta = outcome.estimate.theta;
  r.se = outcome.estimate.standard_error;
  r.items_used = cat.administered().size();
  r.stop = outcome.stop;
  r.done = outcome.stop != irt::StopReason::None;
  if (outcome.next_item) r.next = item_payload(cat, *outcome.next_item);
  return r;
}

std::vector<irt::TranscriptEntry> Gateway::transcript(const std::string& session_id) const {
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(Errc::UnknownSession, "no session " + session_id);
    session = it->second;
  }
  std::lock_guard lock(session->mutex);
  return session->cat->transcript();
}

void Gateway::publish_benchmark(const metrics::BenchmarkReport& report) {
  auto text = std::make_shared<const std::string>(metrics::render_report(report, metrics::ReportFormat::Machine));
  std::lock_guard lock(mutex_);
  report_ = std::move(text);
}

std::string Gateway::benchmark_report(std::string_view token) const {
  authorize(token, ApiRole::Teacher);
  if (config_.report_file && std::filesystem::exists(*config_.report_file)) {
    auto text = read_file(*config_.report_file);
    metrics::parse_machine_report(text);
    return text;
  }
  std::shared_ptr<const std::string> snapshot;
  {
    std::lock_guard lock(mutex_);
    snapshot = report_;
  }
  if (!snapshot) throw Error(Errc::NoReportYet, "no benchmark has been run");
  return *snapshot;
}

Json Gateway::health() const {
  return {{"status", "ok"},
          {"version", config_.version},
          {"uptime_s", static_cast<double>(clock_.now() - started_at_) / 1e9}};
}

void Gateway::shutdown() {
  if (stopped_.exchange(true)) return;
  std::vector<std::shared_ptr<Lesson>> open;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, entry] : lessons_) open.push_back(entry);
  }
  for (auto& entry : open) {
    StreamFrame f;
    f.event = FrameEvent::Error;
    f.code = "QueueClosed";
    f.text = "server shutting down";
    entry->stream->finish(std::move(f));
  }
  runtime_->shutdown();
  std::vector<std::thread> watchers;
  {
    std::lock_guard lock(mutex_);
    watchers.swap(watchers_);
  }
  for (auto& t : watchers) {
    if (t.joinable()) t.join();
  }
}

int http_status(Errc code) {
  switch (code) {
    case Errc::Unauthorized: return 401;
    case Errc::UnknownLesson:
    case Errc::UnknownSession:
    case Errc::NoReportYet: return 404;
    case Errc::LessonNotReady:
    case Errc::SessionStopped:
    case Errc::WrongItem:
    case Errc::NoPendingItem: return 409;
    case Errc::QueueClosed: return 503;
    case Errc::UnknownLanguage:
    case Errc::InvalidGrade:
    case Errc::InvalidArgument:
    case Errc::ParseError:
    case Errc::BackendUnavailable: return 400;
    default: return 500;
  }
}

}  // namespace sankofa::gateway
