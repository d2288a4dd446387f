#include <fmt/format.h>

#include <sstream>

#include "sankofa/agent/agent.hpp"
#include "sankofa/common/text.hpp"

namespace sankofa::agent {

namespace {

constexpr std::string_view kRoleNames[] = {"coordinator", "curriculum_planner", "content_generator",
                                           "linguistic_adapter", "assessment_synthesizer"};
constexpr std::string_view kKindNames[] = {"TaskAssign", "TaskResult", "StateSync", "Failure", "Heartbeat"};

}  // namespace

std::string_view to_string(Role r) { return kRoleNames[static_cast<int>(r)]; }

Role role_from_string(std::string_view s) {
  for (int i = 0; i < 5; ++i) {
    if (kRoleNames[i] == s) return static_cast<Role>(i);
  }
  throw Error(Errc::ParseError, "unknown role: " + std::string(s));
}

std::string to_string(const AgentId& id) { return fmt::format("{}/{}", to_string(id.role), id.instance); }

AgentId agent_id_from_string(std::string_view s) {
  const auto slash = s.find('/');
  if (slash == std::string_view::npos) throw Error(Errc::ParseError, "bad agent id: " + std::string(s));
  const std::string instance(s.substr(slash + 1));
  std::size_t used = 0;
  int n = -1;
  try {
    n = std::stoi(instance, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != instance.size() || n < 0) {
    throw Error(Errc::ParseError, "bad agent instance: " + std::string(s));
  }
  return {role_from_string(s.substr(0, slash)), n};
}

std::string_view to_string(MessageKind k) { return kKindNames[static_cast<int>(k)]; }

MessageKind message_kind_from_string(std::string_view s) {
  for (int i = 0; i < 5; ++i) {
    if (kKindNames[i] == s) return static_cast<MessageKind>(i);
  }
  throw Error(Errc::ParseError, "unknown message kind: " + std::string(s));
}

void Mailbox::push(Message m) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(Errc::QueueClosed, "mailbox closed");
    queue_.push_back(std::move(m));
  }
  ready_.notify_one();
}

std::optional<Message> Mailbox::try_pop() {
  std::lock_guard lock(mutex_);
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::optional<Message> Mailbox::pop_wait(std::chrono::nanoseconds timeout) {
  std::unique_lock lock(mutex_);
  ready_.wait_for(lock, timeout, [this] { return !queue_.empty() || closed_ || interrupted_; });
  interrupted_ = false;
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

void Mailbox::interrupt() {
  {
    std::lock_guard lock(mutex_);
    interrupted_ = true;
  }
  ready_.notify_all();
}

void Mailbox::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  ready_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::size_t Mailbox::size() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::string format_replay_record(const ReplayRecord& r) {
  return fmt::format("{} {} {} {} {} {}", r.at, r.msg_id, to_string(r.sender), to_string(r.recipient),
                     to_string(r.kind), r.correlation_id);
}

std::vector<ReplayRecord> parse_replay_log(std::string_view text) {
  std::vector<ReplayRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 6) throw Error(Errc::ParseError, fmt::format("replay line {}: expected 6 fields", line_no));
    try {
      records.push_back({std::stoll(f[0]), std::stoull(f[1]), agent_id_from_string(f[2]),
                         agent_id_from_string(f[3]), message_kind_from_string(f[4]), std::stoull(f[5])});
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, fmt::format("replay line {}: bad number", line_no));
    }
  }
  return records;
}

std::size_t count_fifo_violations(const std::vector<ReplayRecord>& log) {
  std::map<std::pair<AgentId, AgentId>, std::uint64_t> last;
  std::size_t violations = 0;
  for (const auto& r : log) {
    auto& prev = last[{r.sender, r.recipient}];
    if (r.msg_id <= prev) ++violations;
    prev = r.msg_id;
  }
  return violations;
}

Router::Router(Clock& clock, std::optional<std::filesystem::path> trace_log) : clock_(clock) {
  if (trace_log) {
    log_file_.open(*trace_log, std::ios::out | std::ios::trunc);
    if (!log_file_) throw Error(Errc::UnreadableFile, "cannot open trace log " + trace_log->string());
  }
}

void Router::register_agent(const AgentId& id) {
  std::lock_guard lock(agents_mutex_);
  if (mailboxes_.count(id)) throw Error(Errc::DuplicateName, "agent already registered: " + to_string(id));
  mailboxes_.emplace(id, std::make_unique<Mailbox>());
}

bool Router::registered(const AgentId& id) const {
  std::lock_guard lock(agents_mutex_);
  return mailboxes_.count(id) != 0;
}

std::vector<AgentId> Router::agents() const {
  std::lock_guard lock(agents_mutex_);
  std::vector<AgentId> ids;
  for (const auto& [id, box] : mailboxes_) ids.push_back(id);
  return ids;
}

Mailbox& Router::mailbox(const AgentId& id) const {
  std::lock_guard lock(agents_mutex_);
  auto it = mailboxes_.find(id);
  if (it == mailboxes_.end()) throw Error(Errc::UnknownRecipient, "no such agent: " + to_string(id));
  return *it->second;
}

std::uint64_t Router::route(Message m) {
  if (closed_) throw Error(Errc::QueueClosed, "runtime is shutting down");
  if (!registered(m.sender)) throw Error(Errc::InvalidArgument, "unregistered sender " + to_string(m.sender));
  Mailbox& box = mailbox(m.recipient);
  m.msg_id = next_msg_id_.fetch_add(1);
  m.sent_at = clock_.now();
  const auto id = m.msg_id;
  box.push(std::move(m));
  return id;
}

std::optional<Message> Router::record(std::optional<Message> m) {
  if (!m) return m;
  const ReplayRecord r{clock_.now(), m->msg_id, m->sender, m->recipient, m->kind, m->correlation_id};
  std::lock_guard lock(log_mutex_);
  log_.push_back(r);
  if (log_file_.is_open()) log_file_ << format_replay_record(r) << '\n' << std::flush;
  return m;
}

std::optional<Message> Router::take(const AgentId& id) { return record(mailbox(id).try_pop()); }

std::optional<Message> Router::take_wait(const AgentId& id, std::chrono::nanoseconds timeout) {
  return record(mailbox(id).pop_wait(timeout));
}

bool Router::has_mail(const AgentId& id) const { return mailbox(id).size() > 0; }

void Router::interrupt(const AgentId& id) { mailbox(id).interrupt(); }

void Router::close() {
  closed_ = true;
  std::lock_guard lock(agents_mutex_);
  for (auto& [id, box] : mailboxes_) box->close();
}

std::vector<ReplayRecord> Router::replay() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

}  // namespace sankofa::agent
