#pragma once

#include <any>
#include <atomic>
#include <chrono>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sankofa/common/clock.hpp"
#include "sankofa/common/error.hpp"

namespace sankofa::agent {

enum class Role { Coordinator, CurriculumPlanner, ContentGenerator, LinguisticAdapter, AssessmentSynthesizer };
std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct AgentId {
  Role role = Role::Coordinator;
  int instance = 0;

  auto operator<=>(const AgentId&) const = default;
};
/// `content_generator/1`
std::string to_string(const AgentId& id);
AgentId agent_id_from_string(std::string_view s);

using TaskId = std::uint64_t;

enum class TaskKind { Lesson, PlanCurriculum, GenerateContent, AdaptContent, SynthesizeAssessment };
std::string_view to_string(TaskKind k);

/// Role responsible for a pipeline stage.
Role role_for(TaskKind k);

struct TaskSpec {
  TaskId task_id = 0;
  TaskKind kind = TaskKind::Lesson;
  TaskId root = 0;
  std::string language;
  std::string subject;
  int grade = 1;
  std::size_t max_tokens = 256;
  std::uint64_t seed = 0;
  std::optional<std::string> backend;
  std::vector<TaskId> depends_on;
  /// Shared-state keys of completed upstream stages, filled in at assignment.
  std::vector<std::pair<TaskKind, std::string>> inputs;
};

/// Throws Error{CyclicDependency} when depends_on edges among `specs` form a cycle, and
/// Error{UnknownTask} for a dependency outside the set.
void validate_dag(const std::vector<TaskSpec>& specs);

enum class MessageKind { TaskAssign, TaskResult, StateSync, Failure, Heartbeat };
std::string_view to_string(MessageKind k);
MessageKind message_kind_from_string(std::string_view s);

struct TaskResultPayload {
  std::string output_key;
  std::uint64_t version = 0;
  std::string model_name;
  std::optional<std::string> trace_id;
};

struct FailurePayload {
  Errc code = Errc::StageFailed;
  std::string message;
};

using Payload = std::variant<std::monostate, TaskSpec, TaskResultPayload, FailurePayload>;

struct Message {
  std::uint64_t msg_id = 0;
  AgentId sender;
  AgentId recipient;
  TaskId correlation_id = 0;
  MessageKind kind = MessageKind::Heartbeat;
  Payload payload;
  Nanos sent_at = 0;
};

/// FIFO queue for one recipient.
class Mailbox {
 public:
  /// Throws Error{QueueClosed}.
  void push(Message m);
  std::optional<Message> try_pop();
  /// Waits until a message, interrupt(), close() or the timeout.
  std::optional<Message> pop_wait(std::chrono::nanoseconds timeout);
  void interrupt();
  void close();
  bool closed() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<Message> queue_;
  bool closed_ = false;
  bool interrupted_ = false;
};

/// Delivery record: `<ns> <msg_id> <sender> <recipient> <kind> <correlation_id>`, written when
/// the recipient takes the message.
struct ReplayRecord {
  Nanos at = 0;
  std::uint64_t msg_id = 0;
  AgentId sender;
  AgentId recipient;
  MessageKind kind = MessageKind::Heartbeat;
  TaskId correlation_id = 0;
};
std::string format_replay_record(const ReplayRecord& r);
/// Throws Error{ParseError}.
std::vector<ReplayRecord> parse_replay_log(std::string_view text);

/// Pairs (sender, recipient) whose msg_ids are not strictly increasing in delivery order.
std::size_t count_fifo_violations(const std::vector<ReplayRecord>& log);

class Router {
 public:
  explicit Router(Clock& clock, std::optional<std::filesystem::path> trace_log = std::nullopt);

  /// Throws Error{DuplicateName}.
  void register_agent(const AgentId& id);
  bool registered(const AgentId& id) const;
  std::vector<AgentId> agents() const;

  /// Stamps msg_id and sent_at and enqueues. Returns the msg_id.
  /// Throws Error{UnknownRecipient}, Error{QueueClosed}, Error{InvalidArgument} for an
  /// unregistered sender.
  std::uint64_t route(Message m);

  std::optional<Message> take(const AgentId& id);
  std::optional<Message> take_wait(const AgentId& id, std::chrono::nanoseconds timeout);
  bool has_mail(const AgentId& id) const;
  void interrupt(const AgentId& id);
  void close();
  bool closed() const { return closed_.load(); }

  std::vector<ReplayRecord> replay() const;

 private:
  Mailbox& mailbox(const AgentId& id) const;
  std::optional<Message> record(std::optional<Message> m);

  Clock& clock_;
  mutable std::mutex agents_mutex_;
  std::map<AgentId, std::unique_ptr<Mailbox>> mailboxes_;
  std::atomic<std::uint64_t> next_msg_id_{1};
  std::atomic<bool> closed_{false};
  mutable std::mutex log_mutex_;
  std::vector<ReplayRecord> log_;
  std::ofstream log_file_;
};

enum class TaskStatus { Pending, Assigned, Running, AwaitingDependency, Completed, Failed, Cancelled };
std::string_view to_string(TaskStatus s);

enum class TaskEvent { Assign, Start, Block, Unblock, Complete, Fail, Cancel };
std::string_view to_string(TaskEvent e);

/// The task state machine; nullopt for a forbidden event.
std::optional<TaskStatus> apply_event(TaskStatus from, TaskEvent event);
bool permitted_edge(TaskStatus from, TaskStatus to);
bool is_terminal(TaskStatus s);

struct TaskState {
  TaskStatus current = TaskStatus::Pending;
  std::vector<std::pair<TaskStatus, Nanos>> history;
};

struct TaskRecord {
  TaskSpec spec;
  TaskState state;
  std::optional<AgentId> owner;
  Nanos assigned_at = 0;
};

struct TransitionRecord {
  Nanos at = 0;
  TaskId task = 0;
  TaskStatus from = TaskStatus::Pending;
  TaskStatus to = TaskStatus::Pending;
};

/// Transitions that are not permitted edges, or that leave a terminal state.
std::size_t count_edge_violations(const std::vector<TransitionRecord>& log);

class TaskTable {
 public:
  explicit TaskTable(Clock& clock) : clock_(clock) {}

  /// Assigns the next id (strictly increasing) and stores the task as Pending.
  TaskId create(TaskSpec spec);
  /// Throws Error{UnknownTask}, Error{IllegalTransition}.
  TaskState transition(TaskId id, TaskEvent event);
  void set_owner(TaskId id, const AgentId& owner);
  void set_inputs(TaskId id, std::vector<std::pair<TaskKind, std::string>> inputs);

  /// Throws Error{UnknownTask}.
  TaskRecord get(TaskId id) const;
  bool contains(TaskId id) const;
  /// Subtasks of a root in creation order.
  std::vector<TaskId> children(TaskId root) const;
  std::vector<TaskId> ids() const;
  std::vector<TransitionRecord> transitions() const;

 private:
  Clock& clock_;
  mutable std::mutex mutex_;
  std::map<TaskId, TaskRecord> tasks_;
  std::vector<TransitionRecord> log_;
  TaskId next_id_ = 1;
};

struct Versioned {
  std::shared_ptr<const std::any> value;
  std::uint64_t version = 0;
};

/// Versioned key-value store. Each successful write bumps the key's version by one.
class SharedState {
 public:
  /// Version 0 and no value for an unknown key.
  Versioned read(const std::string& key) const;
  /// Compare-and-set. Throws Error{VersionConflict} when `expected_version` is stale.
  std::uint64_t sync_state(const std::string& key, std::any value, std::uint64_t expected_version);

  template <typename T>
  std::shared_ptr<const T> get(const std::string& key) const {
    auto v = read(key);
    if (!v.value) return nullptr;
    const T* p = std::any_cast<T>(v.value.get());
    if (!p) return nullptr;
    return std::shared_ptr<const T>(v.value, p);
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, Versioned> entries_;
};

}  // namespace sankofa::agent
